//! Comparison models: the two-parameter logistic model fit by marginal
//! maximum likelihood, and kernel-smoothed IRT over quantile-proxy
//! ability estimates. Both emit the same IRF table format as the main
//! model so the evaluation harness treats all models uniformly.

use std::sync::Arc;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{GpirtError, Result};
use crate::gp::ThetaGrid;
use crate::model::ResponseMatrix;
use crate::num::{logsumexp, sigmoid, std_normal_logpdf};
use crate::scoring::IRFTable;

/// Coefficient magnitude beyond which an item is treated as separated and
/// clamped.
pub const BETA_CLAMP: f64 = 50.0;

/// Intercept and discrimination of one linear-latent-function item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPLItem {
    pub beta0: f64,
    pub beta1: f64,
}

/// Positive-response probability under a linear latent function.
pub fn predict_2pl(item: &TwoPLItem, theta: f64) -> f64 {
    sigmoid(item.beta0 + item.beta1 * theta)
}

/// Quadrature nodes with weights normalized against a standard normal
/// latent-score distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Equally spaced nodes on [lower, upper] weighted by the standard
    /// normal density.
    pub fn equispaced_normal(n_nodes: usize, lower: f64, upper: f64) -> Result<Self> {
        if n_nodes < 2 || lower >= upper {
            return Err(GpirtError::InvalidArgument(
                "quadrature needs at least two ordered nodes".into(),
            ));
        }
        let step = (upper - lower) / (n_nodes - 1) as f64;
        let nodes: Vec<f64> = (0..n_nodes).map(|k| lower + k as f64 * step).collect();
        let raw: Vec<f64> = nodes.iter().map(|&x| std_normal_logpdf(x).exp()).collect();
        let total: f64 = raw.iter().sum();
        Ok(QuadratureRule {
            nodes,
            weights: raw.into_iter().map(|w| w / total).collect(),
        })
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule::equispaced_normal(61, -5.0, 5.0).expect("default rule is valid")
    }
}

/// An item whose coefficients ran away during estimation (complete or
/// quasi-complete separation) and was clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationWarning {
    pub item_id: String,
    pub clamped: TwoPLItem,
}

/// Result of the marginal-maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPlFit {
    pub items: Vec<TwoPLItem>,
    pub theta_eap: Vec<f64>,
    /// Marginal log likelihood at the start of each EM iteration;
    /// non-decreasing up to floating-point noise.
    pub loglik_trace: Vec<f64>,
    pub warnings: Vec<SeparationWarning>,
}

/// Fit linear items by EM on the marginal likelihood: the E-step computes
/// each respondent's posterior weights over the quadrature nodes, the
/// M-step runs a damped-Newton weighted logistic regression per item on
/// the expected response counts. Latent scores are summarized afterwards
/// by their expected a posteriori values.
pub fn fit_2pl_mml(
    data: &ResponseMatrix,
    rule: &QuadratureRule,
    max_em_iters: usize,
    tol: f64,
) -> Result<TwoPlFit> {
    let m = data.n_respondents();
    let n_items = data.n_items();
    if m == 0 || n_items == 0 {
        return Err(GpirtError::InvalidArgument("empty response matrix".into()));
    }
    let n_nodes = rule.nodes.len();
    let resp_obs: Vec<Vec<(usize, i8)>> =
        (0..m).map(|r| data.respondent_observations(r)).collect();
    let item_obs: Vec<Vec<(usize, i8)>> =
        (0..n_items).map(|i| data.item_observations(i)).collect();
    for (i, obs) in item_obs.iter().enumerate() {
        let pos = obs.iter().filter(|(_, y)| *y > 0).count();
        if pos == 0 || pos == obs.len() {
            return Err(GpirtError::DegenerateDataset(format!(
                "item '{}' lacks one response class",
                data.item_ids()[i]
            )));
        }
    }
    let log_weights: Vec<f64> = rule.weights.iter().map(|w| w.ln()).collect();

    // Start from the observed base rates with unit discrimination.
    let mut items: Vec<TwoPLItem> = item_obs
        .iter()
        .map(|obs| {
            let pos = obs.iter().filter(|(_, y)| *y > 0).count() as f64;
            let rate = (pos / obs.len() as f64).clamp(0.05, 0.95);
            TwoPLItem {
                beta0: (rate / (1.0 - rate)).ln(),
                beta1: 1.0,
            }
        })
        .collect();

    let e_step = |items: &[TwoPLItem]| -> (Vec<Vec<f64>>, f64) {
        let mut posterior = vec![vec![0.0; n_nodes]; m];
        let mut total = 0.0;
        for (j, obs) in resp_obs.iter().enumerate() {
            let mut lw = log_weights.clone();
            for &(i, y) in obs {
                let it = &items[i];
                for (k, &x) in rule.nodes.iter().enumerate() {
                    lw[k] += crate::num::log_sigmoid(f64::from(y) * (it.beta0 + it.beta1 * x));
                }
            }
            let marginal = logsumexp(&lw);
            total += marginal;
            for (k, p) in posterior[j].iter_mut().enumerate() {
                *p = (lw[k] - marginal).exp();
            }
        }
        (posterior, total)
    };

    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut posterior;
    loop {
        let (post, loglik) = e_step(&items);
        posterior = post;
        trace.push(loglik);
        if trace.len() > max_em_iters {
            break;
        }

        // Expected positive counts and totals per (item, node).
        let mut max_change = 0.0f64;
        for (i, obs) in item_obs.iter().enumerate() {
            let mut r_k = vec![0.0; n_nodes];
            let mut n_k = vec![0.0; n_nodes];
            for &(j, y) in obs {
                for (k, &w) in posterior[j].iter().enumerate() {
                    n_k[k] += w;
                    if y > 0 {
                        r_k[k] += w;
                    }
                }
            }
            let updated = newton_logistic(&items[i], &rule.nodes, &r_k, &n_k);
            if updated.beta0.abs() >= BETA_CLAMP || updated.beta1.abs() >= BETA_CLAMP {
                warnings.push(SeparationWarning {
                    item_id: data.item_ids()[i].clone(),
                    clamped: updated,
                });
            }
            max_change = max_change
                .max((updated.beta0 - items[i].beta0).abs())
                .max((updated.beta1 - items[i].beta1).abs());
            items[i] = updated;
        }
        if max_change < tol {
            let (post, loglik) = e_step(&items);
            posterior = post;
            trace.push(loglik);
            break;
        }
    }

    // The latent scale carries a sign ambiguity; orient it so the total
    // discrimination is positive. The marginal likelihood is invariant over
    // the symmetric rule.
    if items.iter().map(|it| it.beta1).sum::<f64>() < 0.0 {
        for it in items.iter_mut() {
            it.beta1 = -it.beta1;
        }
        let (post, _) = e_step(&items);
        posterior = post;
    }

    let theta_eap: Vec<f64> = posterior
        .iter()
        .map(|w| w.iter().zip(&rule.nodes).map(|(&p, &x)| p * x).sum())
        .collect();

    Ok(TwoPlFit {
        items,
        theta_eap,
        loglik_trace: trace,
        warnings,
    })
}

/// Projected damped Newton ascent of the expected-count logistic
/// objective sum_k r_k log s(f_k) + (n_k - r_k) log s(-f_k) with
/// f_k = b0 + b1 x_k. Candidates are clamped into [-BETA_CLAMP,
/// BETA_CLAMP] before the acceptance check, so the returned coefficients
/// never lower the objective even when an item separates.
fn newton_logistic(start: &TwoPLItem, nodes: &[f64], r_k: &[f64], n_k: &[f64]) -> TwoPLItem {
    let objective = |b: &TwoPLItem| -> f64 {
        nodes
            .iter()
            .zip(r_k.iter().zip(n_k))
            .map(|(&x, (&r, &n))| {
                let f = b.beta0 + b.beta1 * x;
                r * crate::num::log_sigmoid(f) + (n - r) * crate::num::log_sigmoid(-f)
            })
            .sum()
    };

    let mut beta = *start;
    let mut obj = objective(&beta);
    for _ in 0..50 {
        let mut g0 = 0.0;
        let mut g1 = 0.0;
        let mut h00 = 0.0;
        let mut h01 = 0.0;
        let mut h11 = 0.0;
        for (&x, (&r, &n)) in nodes.iter().zip(r_k.iter().zip(n_k)) {
            let p = sigmoid(beta.beta0 + beta.beta1 * x);
            let resid = r - n * p;
            g0 += resid;
            g1 += resid * x;
            let w = n * p * (1.0 - p);
            h00 += w;
            h01 += w * x;
            h11 += w * x * x;
        }
        let det = h00 * h11 - h01 * h01;
        if det.abs() < 1e-12 {
            break;
        }
        let step0 = (h11 * g0 - h01 * g1) / det;
        let step1 = (h00 * g1 - h01 * g0) / det;

        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand = TwoPLItem {
                beta0: (beta.beta0 + scale * step0).clamp(-BETA_CLAMP, BETA_CLAMP),
                beta1: (beta.beta1 + scale * step1).clamp(-BETA_CLAMP, BETA_CLAMP),
            };
            let cand_obj = objective(&cand);
            if cand_obj > obj {
                beta = cand;
                obj = cand_obj;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if !improved || (step0.abs() + step1.abs()) < 1e-10 {
            break;
        }
    }
    beta
}

/// IRF table of a fitted linear-item set on a grid, with saturated tails
/// pulled just inside (0, 1).
pub fn two_pl_irf_table(
    items: &[TwoPLItem],
    item_ids: &[String],
    grid: &ThetaGrid,
) -> Result<IRFTable> {
    let probs: Vec<Vec<f64>> = items
        .iter()
        .map(|it| {
            grid.points()
                .iter()
                .map(|&t| predict_2pl(it, t).clamp(1e-12, 1.0 - 1e-12))
                .collect()
        })
        .collect();
    IRFTable::new(Arc::new(grid.clone()), item_ids.to_vec(), probs)
}

/// Kernel-smoothed fit: quantile-proxy abilities and Nadaraya-Watson IRFs.
#[derive(Debug, Clone, PartialEq)]
pub struct KsIrtFit {
    pub theta_hat: Vec<f64>,
    pub irfs: IRFTable,
    pub bandwidth: f64,
}

/// Default Silverman-style bandwidth.
pub fn default_ks_bandwidth(m: usize) -> f64 {
    1.06 * (m as f64).powf(-0.2)
}

/// Kernel-smoothed IRT: raw scores become mid-rank percentiles
/// (rank - 0.5) / m, abilities are the normal quantiles of those
/// percentiles, and each IRF is a Gaussian-kernel Nadaraya-Watson
/// smooth of the positive indicator over the ability proxies, clipped to
/// [1e-6, 1 - 1e-6].
pub fn fit_ks_irt(
    data: &ResponseMatrix,
    bandwidth: Option<f64>,
    grid: &ThetaGrid,
) -> Result<KsIrtFit> {
    let m = data.n_respondents();
    if m == 0 {
        return Err(GpirtError::InvalidArgument("empty response matrix".into()));
    }
    let h = bandwidth.unwrap_or_else(|| default_ks_bandwidth(m));
    if !(h > 0.0 && h.is_finite()) {
        return Err(GpirtError::InvalidArgument(format!(
            "bandwidth must be positive, got {h}"
        )));
    }

    // Fraction-positive raw scores over observed cells.
    let raw: Vec<f64> = (0..m)
        .map(|j| {
            let obs = data.respondent_observations(j);
            let pos = obs.iter().filter(|(_, y)| *y > 0).count();
            pos as f64 / obs.len() as f64
        })
        .collect();

    let theta_hat = quantile_abilities(&raw)?;

    let mut probs = Vec::with_capacity(data.n_items());
    for i in 0..data.n_items() {
        let obs = data.item_observations(i);
        let mut row = Vec::with_capacity(grid.len());
        for &t in grid.points() {
            let mut num = 0.0;
            let mut den = 0.0;
            for &(j, y) in &obs {
                let z = (t - theta_hat[j]) / h;
                let w = (-0.5 * z * z).exp();
                den += w;
                if y > 0 {
                    num += w;
                }
            }
            row.push((num / den).clamp(1e-6, 1.0 - 1e-6));
        }
        probs.push(row);
    }

    Ok(KsIrtFit {
        theta_hat,
        irfs: IRFTable::new(Arc::new(grid.clone()), data.item_ids().to_vec(), probs)?,
        bandwidth: h,
    })
}

/// Normal quantiles of mid-rank percentiles (rank - 0.5) / m; tied raw
/// scores share their average rank.
fn quantile_abilities(raw: &[f64]) -> Result<Vec<f64>> {
    let m = raw.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
    let mut ranks = vec![0.0; m];
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && raw[order[end]] == raw[order[start]] {
            end += 1;
        }
        let mid = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = mid;
        }
        start = end;
    }
    let normal = Normal::standard();
    Ok(ranks
        .iter()
        .map(|&rank| normal.inverse_cdf((rank - 0.5) / m as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_responses;
    use approx::assert_abs_diff_eq;

    fn matrix_from_rows(rows: Vec<Vec<Option<i8>>>) -> ResponseMatrix {
        let m = rows.len();
        let n = rows[0].len();
        validate_responses(
            ResponseMatrix::from_cells(
                (0..m).map(|r| format!("r{r}")).collect(),
                (0..n).map(|i| format!("i{i}")).collect(),
                rows.into_iter().flatten().collect(),
            )
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn predict_2pl_values() {
        let it = TwoPLItem {
            beta0: 0.0,
            beta1: 1.0,
        };
        assert_eq!(predict_2pl(&it, 0.0), 0.5);
        assert!(predict_2pl(&it, 10.0) > 0.9999);
        let it = TwoPLItem {
            beta0: 1.0,
            beta1: -2.0,
        };
        assert_abs_diff_eq!(predict_2pl(&it, 1.0), sigmoid(-1.0), epsilon = 1e-15);
    }

    #[test]
    fn quadrature_weights_normalized_and_symmetric() {
        let rule = QuadratureRule::default();
        assert_eq!(rule.nodes.len(), 61);
        assert_abs_diff_eq!(rule.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rule.nodes[30], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rule.weights[0], rule.weights[60], epsilon = 1e-15);
    }

    #[test]
    fn eap_orders_extreme_respondents() {
        // 8 respondents, 6 items; first row all positive, last all negative.
        let mut rows = Vec::new();
        rows.push(vec![Some(1); 6]);
        for r in 0..6 {
            let row: Vec<Option<i8>> = (0..6)
                .map(|i| Some(if (r + i) % 2 == 0 { 1 } else { -1 }))
                .collect();
            rows.push(row);
        }
        rows.push(vec![Some(-1); 6]);
        let data = matrix_from_rows(rows);
        let fit = fit_2pl_mml(&data, &QuadratureRule::default(), 100, 1e-4).unwrap();
        assert!(
            fit.theta_eap[0] > fit.theta_eap[7],
            "all-positive respondent must rank above all-negative: {:?}",
            fit.theta_eap
        );
    }


    #[test]
    fn em_loglik_non_decreasing() {
        let mut rows = Vec::new();
        for r in 0..12 {
            let row: Vec<Option<i8>> = (0..5)
                .map(|i| Some(if (r + i * i) % 3 == 0 { 1 } else { -1 }))
                .collect();
            rows.push(row);
        }
        let data = matrix_from_rows(rows);
        let fit = fit_2pl_mml(&data, &QuadratureRule::default(), 60, 1e-6).unwrap();
        for w in fit.loglik_trace.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-8,
                "marginal log likelihood decreased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn ks_median_respondent_at_zero() {
        // 5 respondents with distinct raw scores; median scorer maps to 0.
        let rows = vec![
            vec![Some(-1), Some(-1), Some(-1), Some(-1)],
            vec![Some(1), Some(-1), Some(-1), Some(-1)],
            vec![Some(1), Some(1), Some(-1), Some(-1)],
            vec![Some(1), Some(1), Some(1), Some(-1)],
            vec![Some(1), Some(1), Some(1), Some(1)],
        ];
        let data = matrix_from_rows(rows);
        let grid = ThetaGrid::new(-3.0, 3.0, 0.5).unwrap();
        let fit = fit_ks_irt(&data, Some(1.0), &grid).unwrap();
        assert_abs_diff_eq!(fit.theta_hat[2], 0.0, epsilon = 1e-12);
        // monotone in raw score
        for w in fit.theta_hat.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn ks_unanimous_item_clips_high() {
        let rows = vec![
            vec![Some(1), Some(1)],
            vec![Some(1), Some(-1)],
            vec![Some(1), Some(-1)],
            vec![Some(1), Some(1)],
        ];
        let data = matrix_from_rows(rows);
        let grid = ThetaGrid::new(-2.0, 2.0, 1.0).unwrap();
        let fit = fit_ks_irt(&data, None, &grid).unwrap();
        for &p in fit.irfs.row(0) {
            assert_eq!(p, 1.0 - 1e-6);
        }
    }

    #[test]
    fn ks_symmetric_pair_crosses_half() {
        // Two respondents with opposite answers on the probe item; their
        // ability proxies are symmetric, so the smoothed IRF at 0 is 1/2.
        let rows = vec![
            vec![Some(-1), Some(-1), Some(-1)],
            vec![Some(1), Some(1), Some(1)],
        ];
        let data = matrix_from_rows(rows);
        let grid = ThetaGrid::new(-2.0, 2.0, 1.0).unwrap();
        let fit = fit_ks_irt(&data, Some(1.0), &grid).unwrap();
        assert_abs_diff_eq!(fit.theta_hat[0], -fit.theta_hat[1], epsilon = 1e-12);
        let mid = grid.nearest_index(0.0);
        assert_abs_diff_eq!(fit.irfs.row(0)[mid], 0.5, epsilon = 1e-12);
    }
}
