//! Acceptance suite: one test per release criterion, each printing a
//! PASS line when it holds. Run with
//! `cargo test --test acceptance -- --nocapture --test-threads=1`.

mod common;

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gpirt::adaptive::{
    binary_entropy, marginal_prob, mutual_information, replay_experiment, update_belief,
    BeliefGrid,
};
use gpirt::baselines::{fit_2pl_mml, fit_ks_irt, predict_2pl, QuadratureRule};
use gpirt::gp::{gp_condition, KernelParams, MeanParams, ThetaGrid};
use gpirt::io::synth::{synth_generate, ItemFamily, SynthSpec, ThetaSource};
use gpirt::model::{drop_degenerate_items, GpirtConfig};
use gpirt::sampler::{
    compute_log_joint, ess_update, fix_reflection, inverse_transform_sample, run_chain, Anchor,
    SamplerContext,
};
use gpirt::scoring::{
    auc, estimate_irfs, holdout_mask, paired_t_test, predict_prob, score_predictions,
    theta_estimates, IRFTable,
};

use common::{
    brute_force_condition, ks_critical, ks_statistic, pairwise_auc, pearson, std_normal_cdf,
};

fn synth_spec(items: Vec<ItemFamily>, m: usize, seed: u64) -> SynthSpec {
    SynthSpec {
        n_respondents: m,
        items,
        seed,
        theta_source: ThetaSource::StandardNormal,
        grid: ThetaGrid::default(),
        kernel: KernelParams::default(),
    }
}

/// Anchor on the respondent whose true score is most extreme.
fn truth_anchor(ids: &[String], truth: &[f64]) -> Anchor {
    let best = truth
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .unwrap()
        .0;
    Anchor {
        respondent_id: ids[best].clone(),
        positive: truth[best] > 0.0,
    }
}

#[test]
fn criterion_01_gp_conditioning_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for case in 0..500 {
        let n_obs = rng.random_range(0..=8usize);
        let n_star = rng.random_range(1..=8usize);
        // keep observation points separated so both routes are
        // well-conditioned and comparable at tight tolerance
        let mut theta_obs: Vec<f64> = Vec::new();
        while theta_obs.len() < n_obs {
            let t = rng.random_range(-4.0..4.0);
            if theta_obs.iter().all(|&u| (u - t).abs() > 0.35) {
                theta_obs.push(t);
            }
        }
        let theta_star: Vec<f64> = (0..n_star).map(|_| rng.random_range(-4.5..4.5)).collect();
        let degree = rng.random_range(0..=2usize);
        let coeffs: Vec<f64> = (0..=degree).map(|_| rng.random_range(-2.0..2.0)).collect();
        let f_obs: Vec<f64> = (0..n_obs).map(|_| rng.random_range(-3.0..3.0)).collect();
        let scale = rng.random_range(0.7..1.4);
        let length = rng.random_range(0.6..1.3);

        let mean = MeanParams::new(coeffs.clone()).unwrap();
        let kernel = KernelParams::new(scale, length).unwrap();
        let (m_fast, c_fast) =
            gp_condition(&theta_obs, &f_obs, &theta_star, &mean, &kernel).unwrap();
        let (m_ref, c_ref) =
            brute_force_condition(&theta_obs, &f_obs, &theta_star, &coeffs, scale, length);

        for k in 0..n_star {
            worst = worst.max((m_fast[k] - m_ref[k]).abs());
            for l in 0..n_star {
                worst = worst.max((c_fast[(k, l)] - c_ref[(k, l)]).abs());
            }
        }
        assert!(
            worst <= 1e-8,
            "case {case}: max deviation {worst:e} exceeds 1e-8"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "acceptance 01 (gp conditioning vs brute force, max dev {worst:.2e}, {:?}): PASS",
        elapsed
    );
}

#[test]
fn criterion_02_ess_flat_likelihood_stationarity() {
    let start = Instant::now();
    let dims = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let mean = [1.0, -1.0, 0.5, 0.0, 2.0];
    let kernel = KernelParams::default();
    let k = gpirt::gp::sq_exp_cov(&dims, &dims, &kernel).unwrap();
    let factor = gpirt::gp::chol_psd(&k, 1e-4, "stationarity prior").unwrap();

    let n = 5000;
    let mut f: Vec<f64> = mean.iter().map(|m| m + 8.0).collect(); // dispersed start
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut draws: Vec<Vec<f64>> = (0..5).map(|_| Vec::with_capacity(n)).collect();
    for _ in 0..n {
        f = ess_update(&f, &mean, factor.l(), |_| 0.0, &mut rng).unwrap();
        for (d, col) in draws.iter_mut().enumerate() {
            col.push(f[d]);
        }
    }
    // Bonferroni over the five coordinates
    let crit = ks_critical(n, 0.01 / 5.0);
    for (d, col) in draws.iter().enumerate() {
        let mu = mean[d];
        let sd = k[(d, d)].sqrt();
        let stat = ks_statistic(col, |x| std_normal_cdf((x - mu) / sd));
        assert!(
            stat < crit,
            "coordinate {d}: KS {stat:.5} >= critical {crit:.5}"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!("acceptance 02 (slice-sampler stationarity under flat likelihood, {elapsed:?}): PASS");
}

#[test]
fn criterion_03_inverse_transform_ks() {
    let start = Instant::now();
    let grid = ThetaGrid::default();
    let log_weights: Vec<f64> = grid.points().iter().map(|&t| -0.5 * t * t).collect();

    // discretized target CDF on the grid
    let weights: Vec<f64> = log_weights.iter().map(|lw| lw.exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut target_cdf = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        target_cdf.push(acc);
    }

    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut counts = vec![0usize; grid.len()];
    for _ in 0..n {
        let v = inverse_transform_sample(&grid, &log_weights, &mut rng).unwrap();
        counts[grid.nearest_index(v)] += 1;
    }
    let mut empirical = 0.0;
    let mut stat = 0.0f64;
    for (k, &c) in counts.iter().enumerate() {
        empirical += c as f64 / n as f64;
        stat = stat.max((empirical - target_cdf[k]).abs());
    }
    let crit = ks_critical(n, 0.01);
    assert!(stat < crit, "KS {stat:.5} >= critical {crit:.5}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!("acceptance 03 (inverse transform vs discretized normal, KS {stat:.4} < {crit:.4}, {elapsed:?}): PASS");
}

fn linear_battery(n: usize, rng: &mut ChaCha8Rng) -> Vec<ItemFamily> {
    (0..n)
        .map(|_| {
            let b0: f64 = rng.random_range(-1.0..1.0);
            let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
            let b1 = sign * rng.random_range(0.7..2.5);
            ItemFamily::Linear { b0, b1 }
        })
        .collect()
}

#[test]
fn criterion_04_synthetic_recovery_monotone() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let items = linear_battery(40, &mut rng);
    let (data, truth) = synth_generate(&synth_spec(items, 200, 404)).unwrap();

    let config = GpirtConfig {
        n_iterations: 3000,
        burn_in: 1500,
        thin: 5,
        seed: 405,
        ..GpirtConfig::default()
    }
    .with_mean_degree(1);
    let chain = run_chain(&data, &config).unwrap();
    let anchor = truth_anchor(data.respondent_ids(), &truth.thetas);
    let (chain, _) = fix_reflection(&chain, &anchor).unwrap();
    let (means, _) = theta_estimates(&chain).unwrap();
    let r = pearson(&means, &truth.thetas);
    assert!(
        r.abs() >= 0.90,
        "posterior-mean scores correlate {r:.4} with truth (need |r| >= 0.90)"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 1800, "took {elapsed:?}");
    println!("acceptance 04 (monotone synthetic recovery, |r| = {:.4}, {elapsed:?}): PASS", r.abs());
}

#[test]
fn criterion_05_non_monotone_heldout_advantage() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut items = linear_battery(20, &mut rng);
    for _ in 0..10 {
        let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
        items.push(ItemFamily::Quadratic {
            b0: rng.random_range(-1.8..-0.8) * sign,
            b1: rng.random_range(-0.3..0.3),
            b2: rng.random_range(0.9..1.5) * sign,
        });
    }
    let (data, _) = synth_generate(&synth_spec(items, 300, 505)).unwrap();
    let (data, dropped) = drop_degenerate_items(&data, 0.01).unwrap();
    assert!(dropped.len() <= 2, "synthetic battery mostly retained");

    let repeats = 10;
    let mut gpirt_ln = Vec::with_capacity(repeats);
    let mut two_pl_ln = Vec::with_capacity(repeats);
    for rep in 0..repeats {
        let mut rng = gpirt::rng::substream(506, gpirt::rng::StreamPhase::Holdout, rep as u64, 0);
        let (train, masked) = holdout_mask(&data, 0.2, &mut rng).unwrap();
        let labels: Vec<i8> = masked.iter().map(|&(r, i)| data.get(r, i).unwrap()).collect();

        let config = GpirtConfig {
            n_iterations: 500,
            burn_in: 250,
            thin: 5,
            seed: 507 + rep as u64,
            ..GpirtConfig::default()
        }
        .with_mean_degree(2);
        let chain = run_chain(&train, &config).unwrap();
        let anchor = gpirt::scoring::auto_anchor(&chain).unwrap();
        let (chain, _) = fix_reflection(&chain, &anchor).unwrap();
        let irfs = estimate_irfs(&chain).unwrap();
        let (theta_mean, _) = theta_estimates(&chain).unwrap();
        let probs: Vec<f64> = masked
            .iter()
            .map(|&(r, i)| {
                predict_prob(
                    &irfs,
                    theta_mean[r].clamp(config.grid.lower, config.grid.upper),
                    i,
                )
                .unwrap()
            })
            .collect();
        gpirt_ln.push(
            score_predictions(&probs, &labels)
                .unwrap()
                .mean_loglik_per_response,
        );

        let fit = fit_2pl_mml(&train, &QuadratureRule::default(), 200, 1e-4).unwrap();
        let probs: Vec<f64> = masked
            .iter()
            .map(|&(r, i)| predict_2pl(&fit.items[i], fit.theta_eap[r]))
            .collect();
        two_pl_ln.push(
            score_predictions(&probs, &labels)
                .unwrap()
                .mean_loglik_per_response,
        );
        println!(
            "  rep {rep}: held-out L/N gpirt {:.4} vs 2pl {:.4}",
            gpirt_ln[rep], two_pl_ln[rep]
        );
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let (t, p) = paired_t_test(&gpirt_ln, &two_pl_ln).unwrap();
    assert!(
        mean(&gpirt_ln) > mean(&two_pl_ln),
        "mean held-out L/N: gpirt {:.4} must exceed 2pl {:.4}",
        mean(&gpirt_ln),
        mean(&two_pl_ln)
    );
    assert!(p < 0.05, "paired t-test p = {p:.4} (t = {t:.2}) not significant");
    let elapsed = start.elapsed();
    println!(
        "acceptance 05 (non-monotone held-out advantage, L/N {:.4} vs {:.4}, p = {p:.1e}, {elapsed:?}): PASS",
        mean(&gpirt_ln),
        mean(&two_pl_ln)
    );
}

#[test]
fn criterion_06_baseline_sanity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let items = linear_battery(12, &mut rng);
    let (data, _) = synth_generate(&synth_spec(items, 150, 606)).unwrap();

    let fit = fit_2pl_mml(&data, &QuadratureRule::default(), 200, 1e-5).unwrap();
    for w in fit.loglik_trace.windows(2) {
        assert!(
            w[1] >= w[0] - 1e-8,
            "marginal log likelihood decreased: {} -> {}",
            w[0],
            w[1]
        );
    }

    let ks = fit_ks_irt(&data, None, &ThetaGrid::default()).unwrap();
    let raw: Vec<f64> = (0..data.n_respondents())
        .map(|j| {
            let obs = data.respondent_observations(j);
            obs.iter().filter(|(_, y)| *y > 0).count() as f64 / obs.len() as f64
        })
        .collect();
    for a in 0..raw.len() {
        for b in 0..raw.len() {
            if raw[a] < raw[b] {
                assert!(
                    ks.theta_hat[a] < ks.theta_hat[b] + 1e-12,
                    "ability proxies must be monotone in raw score"
                );
            }
            if raw[a] == raw[b] {
                assert_eq!(ks.theta_hat[a], ks.theta_hat[b], "ties map equally");
            }
        }
    }

    // both baselines feed the shared evaluation harness
    let grid = ThetaGrid::default();
    let table_2pl =
        gpirt::baselines::two_pl_irf_table(&fit.items, data.item_ids(), &grid).unwrap();
    for table in [&table_2pl, &ks.irfs] {
        let mut probs = Vec::new();
        let mut labels = Vec::new();
        for r in 0..20 {
            for i in 0..data.n_items() {
                if let Some(y) = data.get(r, i) {
                    probs.push(predict_prob(table, 0.3, i).unwrap());
                    labels.push(y);
                }
            }
        }
        let report = score_predictions(&probs, &labels).unwrap();
        assert!(report.mean_loglik_per_response.is_finite());
        assert!(report.auc >= 0.0 && report.auc <= 1.0);
    }
    let elapsed = start.elapsed();
    println!("acceptance 06 (baseline sanity: monotone EM, monotone proxies, shared tables, {elapsed:?}): PASS");
}

#[test]
fn criterion_07_mutual_information_properties() {
    let start = Instant::now();
    let grid = Arc::new(ThetaGrid::new(-4.0, 4.0, 0.08).unwrap());
    let n = grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(707);

    let random_irf = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let a: f64 = rng.random_range(-2.0..2.0);
        let b: f64 = rng.random_range(-2.5..2.5);
        let c: f64 = rng.random_range(-1.0..1.0);
        let w: f64 = rng.random_range(0.5..2.0);
        grid.points()
            .iter()
            .map(|&t| {
                let f = a + b * t + c * (w * t).sin();
                (1.0 / (1.0 + (-f).exp())).clamp(1e-9, 1.0 - 1e-9)
            })
            .collect()
    };
    let random_belief = |rng: &mut ChaCha8Rng| -> BeliefGrid {
        let center: f64 = rng.random_range(-2.0..2.0);
        let spread: f64 = rng.random_range(0.3..2.0);
        let tilt: f64 = rng.random_range(-1.0..1.0);
        let lm: Vec<f64> = grid
            .points()
            .iter()
            .map(|&t| -0.5 * ((t - center) / spread).powi(2) + tilt * t)
            .collect();
        BeliefGrid::new(Arc::clone(&grid), lm).unwrap()
    };

    for case in 0..1000 {
        let irfs = IRFTable::new(
            Arc::clone(&grid),
            vec!["probe".into()],
            vec![random_irf(&mut rng)],
        )
        .unwrap();
        let belief = random_belief(&mut rng);
        let mi = mutual_information(&irfs, 0, &belief).unwrap();
        let p_star = marginal_prob(&irfs, 0, &belief).unwrap();
        let bound = binary_entropy(p_star.clamp(1e-9, 1.0 - 1e-9))
            .unwrap()
            .min(belief.entropy());
        assert!(mi >= 0.0, "case {case}: MI {mi} negative");
        assert!(
            mi <= bound + 1e-12,
            "case {case}: MI {mi} exceeds bound {bound}"
        );
    }

    // constant response functions carry no information
    for _ in 0..50 {
        let level: f64 = rng.random_range(0.05..0.95);
        let irfs = IRFTable::new(
            Arc::clone(&grid),
            vec!["flat".into()],
            vec![vec![level; n]],
        )
        .unwrap();
        let belief = random_belief(&mut rng);
        let mi = mutual_information(&irfs, 0, &belief).unwrap();
        assert!(mi <= 1e-12, "constant response function gave MI {mi}");
    }

    // belief updates are order-invariant
    for _ in 0..200 {
        let irfs = IRFTable::new(
            Arc::clone(&grid),
            vec!["a".into(), "b".into()],
            vec![random_irf(&mut rng), random_irf(&mut rng)],
        )
        .unwrap();
        let belief = random_belief(&mut rng);
        let ya = if rng.random::<f64>() < 0.5 { 1 } else { -1 };
        let yb = if rng.random::<f64>() < 0.5 { 1 } else { -1 };
        let ab = update_belief(&update_belief(&belief, &irfs, 0, ya).unwrap(), &irfs, 1, yb)
            .unwrap();
        let ba = update_belief(&update_belief(&belief, &irfs, 1, yb).unwrap(), &irfs, 0, ya)
            .unwrap();
        for (x, y) in ab.normalized().iter().zip(&ba.normalized()) {
            assert!((x - y).abs() <= 1e-10, "update order changed the belief");
        }
    }
    let elapsed = start.elapsed();
    println!("acceptance 07 (mutual-information bounds and belief-update invariance, {elapsed:?}): PASS");
}

#[test]
fn criterion_08_adaptive_replay_beats_random() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut items = Vec::new();
    for _ in 0..10 {
        let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
        items.push(ItemFamily::Linear {
            b0: rng.random_range(-1.5..1.5),
            b1: sign * rng.random_range(2.2..3.2),
        });
    }
    for _ in 0..10 {
        let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
        items.push(ItemFamily::Linear {
            b0: rng.random_range(-1.0..1.0),
            b1: sign * rng.random_range(1.0..1.6),
        });
    }
    for _ in 0..10 {
        let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
        items.push(ItemFamily::Linear {
            b0: rng.random_range(-0.5..0.5),
            b1: sign * rng.random_range(0.1..0.4),
        });
    }
    for _ in 0..10 {
        let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
        items.push(ItemFamily::Quadratic {
            b0: -1.2 * sign,
            b1: rng.random_range(-0.2..0.2),
            b2: sign * rng.random_range(0.9..1.4),
        });
    }

    let mut improvements = Vec::new();
    for seed in 0..5u64 {
        let (data, truth) = synth_generate(&synth_spec(items.clone(), 200, 8080 + seed)).unwrap();
        let report = replay_experiment(&truth.irfs, &data, 16, None, 9090 + seed).unwrap();
        println!(
            "  seed {seed}: RMSE adaptive {:.4} vs random {:.4} ({:+.1}%)",
            report.rmse_cat, report.rmse_random, report.improvement_cat_pct
        );
        assert!(
            report.rmse_cat <= report.rmse_random,
            "seed {seed}: adaptive RMSE {} exceeds random {}",
            report.rmse_cat,
            report.rmse_random
        );
        improvements.push(report.improvement_cat_pct);
    }
    let mean_improvement = improvements.iter().sum::<f64>() / improvements.len() as f64;
    assert!(
        mean_improvement >= 10.0,
        "mean improvement {mean_improvement:.1}% below 10%"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    println!(
        "acceptance 08 (adaptive replay, mean improvement {mean_improvement:.1}% vs random, {elapsed:?}): PASS"
    );
}

#[test]
fn criterion_09_auc_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    for case in 0..200 {
        let n = rng.random_range(2..=200usize);
        // mix continuous scores with a coarse lattice to force ties
        let lattice = rng.random::<f64>() < 0.5;
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if lattice {
                    (rng.random_range(0..=10) as f64) / 10.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let mut labels: Vec<i8> = (0..n)
            .map(|_| if rng.random::<f64>() < 0.5 { 1 } else { -1 })
            .collect();
        // both classes must be present
        labels[0] = 1;
        if n > 1 {
            labels[1] = -1;
        } else {
            continue;
        }
        let fast = auc(&scores, &labels).unwrap();
        let oracle = pairwise_auc(&scores, &labels);
        assert_eq!(fast, oracle, "case {case}: rank form {fast} vs pairwise {oracle}");
    }
    let elapsed = start.elapsed();
    println!("acceptance 09 (rank AUC equals all-pairs oracle exactly, {elapsed:?}): PASS");
}

#[test]
fn criterion_10_reflection_invariance_of_log_joint() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let items = linear_battery(6, &mut rng);
    let (data, _) = synth_generate(&synth_spec(items, 25, 1010)).unwrap();
    let config = GpirtConfig {
        n_iterations: 300,
        burn_in: 150,
        thin: 5,
        seed: 1011,
        ..GpirtConfig::default()
    }
    .with_mean_degree(1);
    let chain = run_chain(&data, &config).unwrap();
    let ctx = SamplerContext::new(&config).unwrap();

    // Orienting the same chain both ways yields, for every state, the
    // state and its mirror image.
    let anchor_pos = Anchor {
        respondent_id: data.respondent_ids()[0].clone(),
        positive: true,
    };
    let anchor_neg = Anchor {
        respondent_id: data.respondent_ids()[0].clone(),
        positive: false,
    };
    let (pos, _) = fix_reflection(&chain, &anchor_pos).unwrap();
    let (neg, _) = fix_reflection(&chain, &anchor_neg).unwrap();
    let mut mirrored_pairs = 0;
    let mut worst = 0.0f64;
    for (a, b) in pos.states.iter().zip(&neg.states) {
        let la = compute_log_joint(a, &data, &config, &ctx).unwrap();
        let lb = compute_log_joint(b, &data, &config, &ctx).unwrap();
        worst = worst.max((la - lb).abs());
        if a.thetas != b.thetas {
            mirrored_pairs += 1;
        }
    }
    assert!(mirrored_pairs > 0, "no state was actually reflected");
    assert!(
        worst <= 1e-8,
        "joint log density changed by {worst:e} under reflection"
    );
    let elapsed = start.elapsed();
    println!(
        "acceptance 10 (joint log density reflection-invariant over {mirrored_pairs} mirrored states, dev {worst:.2e}, {elapsed:?}): PASS"
    );
}

#[test]
fn criterion_11_pipeline_bitwise_reproducibility() {
    let start = Instant::now();
    let bin = env!("CARGO_BIN_EXE_gpirt");
    let base = tempfile::tempdir().unwrap();

    let run_pipeline = |dir: &std::path::Path, threads: &str| {
        std::fs::create_dir_all(dir).unwrap();
        let run = |args: &[&str]| {
            let status = std::process::Command::new(bin)
                .current_dir(dir)
                .args(args)
                .stdout(std::process::Stdio::null())
                .stderr(std::process::Stdio::null())
                .status()
                .unwrap();
            assert!(status.success(), "command {args:?} failed");
        };
        run(&[
            "synth", "--seed", "31", "--threads", threads,
            "--out", "data.csv", "--respondents", "25", "--items", "linear:8",
            "--truth-theta", "truth.csv",
        ]);
        run(&[
            "fit", "--seed", "32", "--threads", threads,
            "--iterations", "80", "--burn-in", "40", "--thin", "2",
            "--grid-step", "0.05", "--mean-degree", "1",
            "--data", "data.csv", "--out", "chain.bin",
        ]);
        run(&[
            "irf", "--threads", threads,
            "--chain", "chain.bin", "--out", "irf.csv",
        ]);
        run(&[
            "evaluate", "--seed", "33", "--threads", threads,
            "--iterations", "60", "--burn-in", "30", "--thin", "2",
            "--grid-step", "0.05", "--mean-degree", "1",
            "--data", "data.csv", "--holdout", "0.2", "--repeats", "2",
            "--out", "report.txt", "--kv", "report.kv",
        ]);
    };

    let artifacts = [
        "data.csv",
        "truth.csv",
        "chain.bin",
        "irf.csv",
        "report.txt",
        "report.kv",
        "data.csv.manifest.json",
        "chain.bin.manifest.json",
        "irf.csv.manifest.json",
        "report.txt.manifest.json",
    ];

    let dir_a = base.path().join("a");
    let dir_b = base.path().join("b");
    let dir_c = base.path().join("c");
    run_pipeline(&dir_a, "2");
    run_pipeline(&dir_b, "2");
    run_pipeline(&dir_c, "1");

    for name in &artifacts {
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        let c = std::fs::read(dir_c.join(name)).unwrap();
        assert_eq!(a, b, "artifact {name} differs between identical runs");
        assert_eq!(a, c, "artifact {name} differs across thread counts");
    }
    let elapsed = start.elapsed();
    println!(
        "acceptance 11 (synth/fit/irf/evaluate bitwise-reproducible incl. --threads 2 vs 1, {elapsed:?}): PASS"
    );
}
