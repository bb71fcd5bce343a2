//! Command-line surface: synth, fit, irf, predict, evaluate, baseline,
//! and cat subcommands. Exit codes: 0 success, 1 user error, 2 internal
//! error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{GpirtError, Result};
use crate::gp::ThetaGrid;
use crate::io::chain_store::{read_chain, write_chain};
use crate::io::config_file::FileConfig;
use crate::io::csv_data::{load_responses_csv, read_irf_csv, write_irf_csv, write_responses_csv};
use crate::io::manifest::RunManifest;
use crate::io::synth::{synth_generate, write_truth_theta_csv, ItemFamily, SynthSpec, ThetaSource};
use crate::model::{
    drop_degenerate_items, Coding, GpirtConfig, Hyperpriors, ResponseMatrix,
    DEFAULT_MIN_MINORITY_FRAC,
};
use crate::rng::{substream, StreamPhase};
use crate::sampler::{fix_reflection, run_chain, Anchor, Chain};
use crate::scoring::{
    auto_anchor, estimate_irfs, holdout_mask, paired_t_test, predict_prob, score_predictions,
    theta_estimates, IRFTable, MetricsReport,
};

/// Environment variable providing the default worker-thread count.
pub const THREADS_ENV: &str = "GPIRT_THREADS";

#[derive(Parser)]
#[command(name = "gpirt", version, about = "Latent-score inference with nonparametric item response functions", disable_help_subcommand = true)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalArgs {
    /// Master random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Flat key-value configuration file; command-line flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Grid lower bound.
    #[arg(long, global = true)]
    grid_lower: Option<f64>,

    /// Grid upper bound.
    #[arg(long, global = true)]
    grid_upper: Option<f64>,

    /// Grid spacing.
    #[arg(long, global = true)]
    grid_step: Option<f64>,

    /// Polynomial degree of the prior mean (0, 1, or 2).
    #[arg(long, global = true)]
    mean_degree: Option<usize>,

    /// Total Gibbs sweeps.
    #[arg(long, global = true)]
    iterations: Option<usize>,

    /// Sweeps discarded before storing states.
    #[arg(long, global = true)]
    burn_in: Option<usize>,

    /// Keep every n-th post-burn-in state.
    #[arg(long, global = true)]
    thin: Option<usize>,

    /// Worker threads for intra-sweep parallelism; results are identical
    /// for any value.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CodingArg {
    #[value(name = "pm")]
    Pm,
    #[value(name = "zero-one")]
    ZeroOne,
}

impl From<CodingArg> for Coding {
    fn from(c: CodingArg) -> Coding {
        match c {
            CodingArg::Pm => Coding::PlusMinus,
            CodingArg::ZeroOne => Coding::ZeroOne,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineModel {
    #[value(name = "2pl")]
    TwoPl,
    #[value(name = "ks-irt")]
    KsIrt,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with retained ground truth.
    Synth {
        /// Output CSV of responses.
        #[arg(long)]
        out: PathBuf,
        /// Respondent count.
        #[arg(long)]
        respondents: usize,
        /// Item mix, e.g. "linear:20,quadratic:10,gp:10".
        #[arg(long)]
        items: String,
        /// Write true latent scores here.
        #[arg(long)]
        truth_theta: Option<PathBuf>,
        /// Write the true response-probability table here.
        #[arg(long)]
        truth_irf: Option<PathBuf>,
    },
    /// Fit the model to a response CSV and store the chain.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "pm")]
        coding: CodingArg,
        #[arg(long)]
        out: PathBuf,
        /// Minimum minority-class share; items below are dropped.
        #[arg(long, default_value_t = DEFAULT_MIN_MINORITY_FRAC)]
        min_minority: f64,
        /// Respondent ids to exclude, comma-separated.
        #[arg(long, value_delimiter = ',')]
        exclude: Vec<String>,
    },
    /// Estimate posterior-mean response functions from a stored chain.
    Irf {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Orientation anchor "respondent:+" or "respondent:-"; defaults
        /// to the most decisive respondent.
        #[arg(long)]
        anchor: Option<String>,
        /// Skip the reflection fix entirely.
        #[arg(long, default_value_t = false)]
        no_reflect: bool,
    },
    /// Score the observed cells of a dataset against a stored chain.
    Predict {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "pm")]
        coding: CodingArg,
        #[arg(long)]
        out: PathBuf,
        /// Machine-readable key-value copy of the metrics.
        #[arg(long)]
        kv: Option<PathBuf>,
        #[arg(long)]
        anchor: Option<String>,
    },
    /// Held-out comparison of the model against the baselines.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "pm")]
        coding: CodingArg,
        /// Fraction of observed cells masked per repetition.
        #[arg(long, default_value_t = 0.2)]
        holdout: f64,
        #[arg(long, default_value_t = 20)]
        repeats: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        kv: Option<PathBuf>,
    },
    /// Fit a comparison model alone.
    Baseline {
        #[arg(long, value_enum)]
        model: BaselineModel,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "pm")]
        coding: CodingArg,
        /// Output CSV of ability estimates.
        #[arg(long)]
        out_theta: PathBuf,
        /// Output CSV of response functions.
        #[arg(long)]
        out_irf: PathBuf,
        /// Output CSV of item coefficients (2pl only).
        #[arg(long)]
        out_items: Option<PathBuf>,
        /// Smoothing bandwidth (ks-irt only; defaults to a Silverman rule).
        #[arg(long)]
        bandwidth: Option<f64>,
    },
    /// Replay recorded responses through adaptive, fixed, and random
    /// batteries against the full-battery reference.
    Cat {
        /// Response-function table (CSV, as written by `irf`).
        #[arg(long)]
        irf: PathBuf,
        /// Recorded responses for the replay respondents.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "pm")]
        coding: CodingArg,
        #[arg(long, default_value_t = 16)]
        battery_size: usize,
        /// File with one fixed-battery item id per line.
        #[arg(long)]
        fixed_battery: Option<PathBuf>,
        /// Number of replay seeds; results are averaged.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        kv: Option<PathBuf>,
    },
}

/// Parse and run, returning the process exit code.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own usage text; everything it rejects is a
            // user error
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };

    let threads = cli.global.threads.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.parse().ok())
    });
    let run = || match run_command(&cli.global, &cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    match threads {
        Some(t) if t > 0 => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build();
            match pool {
                Ok(pool) => pool.install(run),
                Err(e) => {
                    eprintln!("error: could not build thread pool: {e}");
                    2
                }
            }
        }
        _ => run(),
    }
}

fn build_config(global: &GlobalArgs) -> Result<GpirtConfig> {
    let mut cfg = GpirtConfig::default();
    if let Some(path) = &global.config {
        cfg = FileConfig::load(path)?.apply(&cfg)?;
    }
    if global.grid_lower.is_some() || global.grid_upper.is_some() || global.grid_step.is_some() {
        cfg.grid = ThetaGrid::new(
            global.grid_lower.unwrap_or(cfg.grid.lower),
            global.grid_upper.unwrap_or(cfg.grid.upper),
            global.grid_step.unwrap_or(cfg.grid.step),
        )?;
    }
    if let Some(d) = global.mean_degree {
        cfg.mean_degree = d;
        cfg.beta_prior = Hyperpriors::for_degree(d);
    }
    if let Some(v) = global.iterations {
        cfg.n_iterations = v;
    }
    if let Some(v) = global.burn_in {
        cfg.burn_in = v;
    }
    if let Some(v) = global.thin {
        cfg.thin = v;
    }
    cfg.seed = global.seed;
    cfg.validate()?;
    Ok(cfg)
}

fn run_command(global: &GlobalArgs, command: &Command) -> Result<()> {
    let config = build_config(global)?;
    match command {
        Command::Synth {
            out,
            respondents,
            items,
            truth_theta,
            truth_irf,
        } => cmd_synth(&config, out, *respondents, items, truth_theta.as_deref(), truth_irf.as_deref()),
        Command::Fit {
            data,
            coding,
            out,
            min_minority,
            exclude,
        } => cmd_fit(&config, data, (*coding).into(), out, *min_minority, exclude),
        Command::Irf {
            chain,
            out,
            anchor,
            no_reflect,
        } => cmd_irf(chain, out, anchor.as_deref(), *no_reflect),
        Command::Predict {
            chain,
            data,
            coding,
            out,
            kv,
            anchor,
        } => cmd_predict(chain, data, (*coding).into(), out, kv.as_deref(), anchor.as_deref()),
        Command::Evaluate {
            data,
            coding,
            holdout,
            repeats,
            out,
            kv,
        } => cmd_evaluate(&config, data, (*coding).into(), *holdout, *repeats, out, kv.as_deref()),
        Command::Baseline {
            model,
            data,
            coding,
            out_theta,
            out_irf,
            out_items,
            bandwidth,
        } => cmd_baseline(
            &config,
            *model,
            data,
            (*coding).into(),
            out_theta,
            out_irf,
            out_items.as_deref(),
            *bandwidth,
        ),
        Command::Cat {
            irf,
            data,
            coding,
            battery_size,
            fixed_battery,
            seeds,
            out,
            kv,
        } => cmd_cat(
            &config,
            irf,
            data,
            (*coding).into(),
            *battery_size,
            fixed_battery.as_deref(),
            *seeds,
            out,
            kv.as_deref(),
        ),
    }
}

fn parse_item_mix(mix: &str, config: &GpirtConfig) -> Result<Vec<ItemFamily>> {
    let mut rng = substream(config.seed, StreamPhase::Synth, 1, 0);
    let mut items = Vec::new();
    for part in mix.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (kind, count) = part.split_once(':').ok_or_else(|| {
            GpirtError::InvalidArgument(format!("item mix entry '{part}' is not kind:count"))
        })?;
        let count: usize = count.parse().map_err(|_| {
            GpirtError::InvalidArgument(format!("item count '{count}' is not an integer"))
        })?;
        for _ in 0..count {
            let family = match kind {
                "linear" => {
                    let b0 = rng.sample::<f64, _>(StandardNormal);
                    let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
                    let b1 = sign * (0.5 + 2.0 * rng.random::<f64>());
                    ItemFamily::Linear { b0, b1 }
                }
                "quadratic" => {
                    let b0 = -1.0 + 0.5 * rng.sample::<f64, _>(StandardNormal);
                    let b1 = 0.3 * rng.sample::<f64, _>(StandardNormal);
                    let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
                    let b2 = sign * (0.8 + 0.8 * rng.random::<f64>());
                    ItemFamily::Quadratic { b0, b1, b2 }
                }
                "gp" => ItemFamily::GpDraw,
                other => {
                    return Err(GpirtError::InvalidArgument(format!(
                        "unknown item family '{other}' (expected linear, quadratic, or gp)"
                    )))
                }
            };
            items.push(family);
        }
    }
    if items.is_empty() {
        return Err(GpirtError::InvalidArgument("item mix is empty".into()));
    }
    Ok(items)
}

fn cmd_synth(
    config: &GpirtConfig,
    out: &Path,
    respondents: usize,
    items: &str,
    truth_theta: Option<&Path>,
    truth_irf: Option<&Path>,
) -> Result<()> {
    let spec = SynthSpec {
        n_respondents: respondents,
        items: parse_item_mix(items, config)?,
        seed: config.seed,
        theta_source: ThetaSource::StandardNormal,
        grid: config.grid.clone(),
        kernel: config.kernel.clone(),
    };
    let (data, truth) = synth_generate(&spec)?;
    write_responses_csv(&data, out)?;
    let mut manifest = RunManifest::new("synth", config).with_output(out)?;
    if let Some(path) = truth_theta {
        write_truth_theta_csv(data.respondent_ids(), &truth.thetas, path)?;
        manifest = manifest.with_output(path)?;
    }
    if let Some(path) = truth_irf {
        write_irf_csv(&truth.irfs, path)?;
        manifest = manifest.with_output(path)?;
    }
    manifest.write_for(out)?;
    println!(
        "wrote {} responses for {} respondents x {} items to {}",
        data.n_observed(),
        data.n_respondents(),
        data.n_items(),
        out.display()
    );
    Ok(())
}

fn cmd_fit(
    config: &GpirtConfig,
    data_path: &Path,
    coding: Coding,
    out: &Path,
    min_minority: f64,
    exclude: &[String],
) -> Result<()> {
    let mut data = load_responses_csv(data_path, coding)?;
    if !exclude.is_empty() {
        data = data.exclude_respondents(exclude)?;
    }
    let (data, dropped) = drop_degenerate_items(&data, min_minority)?;
    if !dropped.is_empty() {
        eprintln!("dropped {} degenerate item(s): {}", dropped.len(), dropped.join(", "));
    }
    let chain = run_chain(&data, config)?;
    write_chain(&chain, out)?;
    RunManifest::new("fit", config)
        .with_input(data_path)?
        .with_output(out)?
        .write_for(out)?;
    println!(
        "stored {} states ({} sweeps, burn-in {}, thin {}) to {}",
        chain.n_states(),
        config.n_iterations,
        config.burn_in,
        config.thin,
        out.display()
    );
    Ok(())
}

fn parse_anchor(text: &str) -> Result<Anchor> {
    let (id, sign) = text.rsplit_once(':').ok_or_else(|| {
        GpirtError::InvalidArgument(format!("anchor '{text}' is not respondent:+ or respondent:-"))
    })?;
    let positive = match sign {
        "+" => true,
        "-" => false,
        other => {
            return Err(GpirtError::InvalidArgument(format!(
                "anchor sign '{other}' must be + or -"
            )))
        }
    };
    Ok(Anchor {
        respondent_id: id.to_string(),
        positive,
    })
}

fn oriented_chain(chain: Chain, anchor: Option<&str>, no_reflect: bool) -> Result<Chain> {
    if no_reflect {
        return Ok(chain);
    }
    let anchor = match anchor {
        Some(text) => parse_anchor(text)?,
        None => auto_anchor(&chain)?,
    };
    let (fixed, report) = fix_reflection(&chain, &anchor)?;
    if report.ambiguous_anchor {
        eprintln!(
            "warning: anchor '{}' sat at zero in {} of {} states; orientation may be arbitrary",
            anchor.respondent_id,
            report.ambiguous_states,
            fixed.n_states()
        );
    }
    Ok(fixed)
}

fn cmd_irf(chain_path: &Path, out: &Path, anchor: Option<&str>, no_reflect: bool) -> Result<()> {
    let chain = oriented_chain(read_chain(chain_path)?, anchor, no_reflect)?;
    let irfs = estimate_irfs(&chain)?;
    write_irf_csv(&irfs, out)?;
    RunManifest::new("irf", &chain.config)
        .with_input(chain_path)?
        .with_output(out)?
        .write_for(out)?;
    println!(
        "wrote {} response functions on a {}-point grid to {}",
        irfs.n_items(),
        irfs.grid().len(),
        out.display()
    );
    Ok(())
}

/// Plug-in predictions for every observed cell of `data`, from a fitted
/// chain's posterior-mean scores and response functions.
fn plugin_predictions(
    chain: &Chain,
    data: &ResponseMatrix,
) -> Result<(Vec<f64>, Vec<i8>)> {
    let irfs = estimate_irfs(chain)?;
    let (theta_mean, _) = theta_estimates(chain)?;
    let grid = irfs.grid();

    let mut probs = Vec::new();
    let mut labels = Vec::new();
    for (r, id) in data.respondent_ids().iter().enumerate() {
        let chain_row = chain
            .respondent_ids
            .iter()
            .position(|c| c == id)
            .ok_or_else(|| GpirtError::UnknownId { id: id.clone() })?;
        let theta = theta_mean[chain_row].clamp(grid.lower, grid.upper);
        for (i, item_id) in data.item_ids().iter().enumerate() {
            if let Some(y) = data.get(r, i) {
                let item = irfs
                    .index_of(item_id)
                    .ok_or_else(|| GpirtError::UnknownId { id: item_id.clone() })?;
                probs.push(predict_prob(&irfs, theta, item)?);
                labels.push(y);
            }
        }
    }
    Ok((probs, labels))
}

fn cmd_predict(
    chain_path: &Path,
    data_path: &Path,
    coding: Coding,
    out: &Path,
    kv: Option<&Path>,
    anchor: Option<&str>,
) -> Result<()> {
    let chain = oriented_chain(read_chain(chain_path)?, anchor, false)?;
    let data = load_responses_csv(data_path, coding)?;
    let (probs, labels) = plugin_predictions(&chain, &data)?;
    let report = score_predictions(&probs, &labels)?;

    let mut text = String::new();
    let _ = writeln!(text, "{:<28} {:>12}", "metric", "value");
    let _ = writeln!(text, "{:<28} {:>12.6}", "loglik_per_response", report.mean_loglik_per_response);
    let _ = writeln!(text, "{:<28} {:>12.6}", "accuracy", report.accuracy);
    let _ = writeln!(text, "{:<28} {:>12.6}", "auc", report.auc);
    let _ = writeln!(text, "{:<28} {:>12}", "n_responses", report.n_heldout);
    std::fs::write(out, &text)?;
    print!("{text}");

    if let Some(kv_path) = kv {
        let mut kv_text = String::new();
        let _ = writeln!(kv_text, "loglik_per_response = {}", report.mean_loglik_per_response);
        let _ = writeln!(kv_text, "accuracy = {}", report.accuracy);
        let _ = writeln!(kv_text, "auc = {}", report.auc);
        let _ = writeln!(kv_text, "n_responses = {}", report.n_heldout);
        std::fs::write(kv_path, kv_text)?;
    }
    RunManifest::new("predict", &chain.config)
        .with_input(chain_path)?
        .with_input(data_path)?
        .with_output(out)?
        .write_for(out)?;
    Ok(())
}

fn mix_seed(seed: u64, rep: u64) -> u64 {
    // splitmix-style hop so per-repetition fits use unrelated key spaces
    let mut z = seed ^ rep.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct RepMetrics {
    loglik_per_response: Vec<f64>,
    loglik_total: Vec<f64>,
    accuracy: Vec<f64>,
    auc: Vec<f64>,
}

impl RepMetrics {
    fn new() -> Self {
        RepMetrics {
            loglik_per_response: Vec::new(),
            loglik_total: Vec::new(),
            accuracy: Vec::new(),
            auc: Vec::new(),
        }
    }
    fn push(&mut self, report: &MetricsReport) {
        self.loglik_per_response.push(report.mean_loglik_per_response);
        self.loglik_total
            .push(report.mean_loglik_per_response * report.n_heldout as f64);
        self.accuracy.push(report.accuracy);
        self.auc.push(report.auc);
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn cmd_evaluate(
    config: &GpirtConfig,
    data_path: &Path,
    coding: Coding,
    holdout: f64,
    repeats: usize,
    out: &Path,
    kv: Option<&Path>,
) -> Result<()> {
    if repeats == 0 {
        return Err(GpirtError::InvalidArgument("repeats must be >= 1".into()));
    }
    let data = load_responses_csv(data_path, coding)?;
    let (data, dropped) = drop_degenerate_items(&data, DEFAULT_MIN_MINORITY_FRAC)?;
    if !dropped.is_empty() {
        eprintln!("dropped {} degenerate item(s)", dropped.len());
    }

    let mut gpirt = RepMetrics::new();
    let mut two_pl = RepMetrics::new();
    let mut ks = RepMetrics::new();
    for rep in 0..repeats {
        let mut rng = substream(config.seed, StreamPhase::Holdout, rep as u64, 0);
        let (train, masked) = holdout_mask(&data, holdout, &mut rng)?;
        let labels: Vec<i8> = masked
            .iter()
            .map(|&(r, i)| data.get(r, i).expect("masked cells were observed"))
            .collect();

        let mut rep_config = config.clone();
        rep_config.seed = mix_seed(config.seed, rep as u64);
        let chain = run_chain(&train, &rep_config)?;
        let chain = oriented_chain(chain, None, false)?;
        let irfs = estimate_irfs(&chain)?;
        let (theta_mean, _) = theta_estimates(&chain)?;
        let grid = irfs.grid();
        let probs: Vec<f64> = masked
            .iter()
            .map(|&(r, i)| {
                predict_prob(&irfs, theta_mean[r].clamp(grid.lower, grid.upper), i)
            })
            .collect::<Result<Vec<_>>>()?;
        gpirt.push(&score_predictions(&probs, &labels)?);

        let fit = crate::baselines::fit_2pl_mml(
            &train,
            &crate::baselines::QuadratureRule::default(),
            200,
            1e-4,
        )?;
        let probs: Vec<f64> = masked
            .iter()
            .map(|&(r, i)| crate::baselines::predict_2pl(&fit.items[i], fit.theta_eap[r]))
            .collect();
        two_pl.push(&score_predictions(&probs, &labels)?);

        let ks_fit = crate::baselines::fit_ks_irt(&train, None, &config.grid)?;
        let probs: Vec<f64> = masked
            .iter()
            .map(|&(r, i)| {
                let theta = ks_fit.theta_hat[r].clamp(config.grid.lower, config.grid.upper);
                predict_prob(&ks_fit.irfs, theta, i)
            })
            .collect::<Result<Vec<_>>>()?;
        ks.push(&score_predictions(&probs, &labels)?);

        eprintln!(
            "repetition {}/{}: L/N gpirt {:.4}, 2pl {:.4}, ks-irt {:.4}",
            rep + 1,
            repeats,
            gpirt.loglik_per_response[rep],
            two_pl.loglik_per_response[rep],
            ks.loglik_per_response[rep],
        );
    }

    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:<8} {:>10} {:>26} {:>8} {:>10}",
        "model", "L/N", "t-test vs gpirt (diff, p)", "AUC", "accuracy"
    );
    let _ = writeln!(
        text,
        "{:<8} {:>10.4} {:>26} {:>8.4} {:>10.4}",
        "gpirt",
        mean(&gpirt.loglik_per_response),
        "-",
        mean(&gpirt.auc),
        mean(&gpirt.accuracy)
    );
    let mut kv_text = String::new();
    let _ = writeln!(kv_text, "repeats = {repeats}");
    let _ = writeln!(kv_text, "holdout_fraction = {holdout}");
    for (name, metrics) in [("gpirt", &gpirt), ("2pl", &two_pl), ("ks-irt", &ks)] {
        let _ = writeln!(kv_text, "{name}.loglik_per_response = {}", mean(&metrics.loglik_per_response));
        let _ = writeln!(kv_text, "{name}.loglik_total = {}", mean(&metrics.loglik_total));
        let _ = writeln!(kv_text, "{name}.accuracy = {}", mean(&metrics.accuracy));
        let _ = writeln!(kv_text, "{name}.auc = {}", mean(&metrics.auc));
    }
    for (name, metrics) in [("2pl", &two_pl), ("ks-irt", &ks)] {
        let diff_per_response =
            mean(&gpirt.loglik_per_response) - mean(&metrics.loglik_per_response);
        let diff_total = mean(&gpirt.loglik_total) - mean(&metrics.loglik_total);
        let t_test = if repeats >= 2 {
            paired_t_test(&gpirt.loglik_per_response, &metrics.loglik_per_response).ok()
        } else {
            None
        };
        let t_col = match t_test {
            Some((_, p)) => format!("{diff_per_response:+.4} (p = {p:.2e})"),
            None => format!("{diff_per_response:+.4}"),
        };
        let _ = writeln!(
            text,
            "{:<8} {:>10.4} {:>26} {:>8.4} {:>10.4}",
            name,
            mean(&metrics.loglik_per_response),
            t_col,
            mean(&metrics.auc),
            mean(&metrics.accuracy)
        );
        let _ = writeln!(kv_text, "{name}.diff_loglik_per_response = {diff_per_response}");
        let _ = writeln!(kv_text, "{name}.diff_loglik_total = {diff_total}");
        if let Some((t, p)) = t_test {
            let _ = writeln!(kv_text, "{name}.ttest_vs_gpirt.t = {t}");
            let _ = writeln!(kv_text, "{name}.ttest_vs_gpirt.p = {p}");
        }
    }
    std::fs::write(out, &text)?;
    print!("{text}");
    if let Some(kv_path) = kv {
        std::fs::write(kv_path, kv_text)?;
    }
    RunManifest::new("evaluate", config)
        .with_input(data_path)?
        .with_output(out)?
        .write_for(out)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_baseline(
    config: &GpirtConfig,
    model: BaselineModel,
    data_path: &Path,
    coding: Coding,
    out_theta: &Path,
    out_irf: &Path,
    out_items: Option<&Path>,
    bandwidth: Option<f64>,
) -> Result<()> {
    let data = load_responses_csv(data_path, coding)?;
    let (data, dropped) = drop_degenerate_items(&data, DEFAULT_MIN_MINORITY_FRAC)?;
    if !dropped.is_empty() {
        eprintln!("dropped {} degenerate item(s)", dropped.len());
    }
    let (thetas, irfs): (Vec<f64>, IRFTable) = match model {
        BaselineModel::TwoPl => {
            let fit = crate::baselines::fit_2pl_mml(
                &data,
                &crate::baselines::QuadratureRule::default(),
                200,
                1e-4,
            )?;
            for w in &fit.warnings {
                eprintln!("warning: item '{}' separated; coefficients clamped", w.item_id);
            }
            if let Some(path) = out_items {
                let mut w = csv::Writer::from_path(path)
                    .map_err(|e| GpirtError::Format(e.to_string()))?;
                w.write_record(["item", "beta0", "beta1"])
                    .map_err(|e| GpirtError::Format(e.to_string()))?;
                for (id, item) in data.item_ids().iter().zip(&fit.items) {
                    w.write_record([id.as_str(), &format!("{}", item.beta0), &format!("{}", item.beta1)])
                        .map_err(|e| GpirtError::Format(e.to_string()))?;
                }
                w.flush()?;
            }
            let table = crate::baselines::two_pl_irf_table(&fit.items, data.item_ids(), &config.grid)?;
            (fit.theta_eap, table)
        }
        BaselineModel::KsIrt => {
            let fit = crate::baselines::fit_ks_irt(&data, bandwidth, &config.grid)?;
            (fit.theta_hat, fit.irfs)
        }
    };
    write_truth_theta_csv(data.respondent_ids(), &thetas, out_theta)?;
    write_irf_csv(&irfs, out_irf)?;
    RunManifest::new("baseline", config)
        .with_input(data_path)?
        .with_output(out_theta)?
        .with_output(out_irf)?
        .write_for(out_irf)?;
    println!("wrote ability estimates to {} and response functions to {}", out_theta.display(), out_irf.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_cat(
    config: &GpirtConfig,
    irf_path: &Path,
    data_path: &Path,
    coding: Coding,
    battery_size: usize,
    fixed_battery: Option<&Path>,
    seeds: u64,
    out: &Path,
    kv: Option<&Path>,
) -> Result<()> {
    if seeds == 0 {
        return Err(GpirtError::InvalidArgument("seeds must be >= 1".into()));
    }
    let irfs = read_irf_csv(irf_path)?;
    let data = load_responses_csv(data_path, coding)?;
    let fixed: Option<Vec<String>> = match fixed_battery {
        None => None,
        Some(path) => Some(
            std::fs::read_to_string(path)?
                .lines()
                .map(|l| l.trim().to_string())
                .filter(|l| !l.is_empty())
                .collect(),
        ),
    };

    let mut reports = Vec::new();
    for offset in 0..seeds {
        let report = crate::adaptive::replay_experiment(
            &irfs,
            &data,
            battery_size,
            fixed.as_deref(),
            config.seed + offset,
        )?;
        reports.push(report);
    }

    let mean_of = |f: &dyn Fn(&crate::adaptive::ReplayReport) -> f64| -> f64 {
        reports.iter().map(f).sum::<f64>() / reports.len() as f64
    };
    let rmse_cat = mean_of(&|r| r.rmse_cat);
    let rmse_random = mean_of(&|r| r.rmse_random);
    let improvement_cat = mean_of(&|r| r.improvement_cat_pct);
    let has_fixed = reports.iter().all(|r| r.rmse_fixed.is_some());
    let rmse_fixed = has_fixed.then(|| mean_of(&|r| r.rmse_fixed.unwrap()));
    let improvement_fixed = has_fixed.then(|| mean_of(&|r| r.improvement_fixed_pct.unwrap()));

    let fmt_opt = |v: Option<f64>| match v {
        Some(x) => format!("{x:.4}"),
        None => "-".to_string(),
    };
    let mut text = String::new();
    let _ = writeln!(
        text,
        "replay of {} respondents, battery size {}, {} seed(s)",
        reports[0].n_respondents, battery_size, seeds
    );
    let _ = writeln!(text, "{:<24} {:>10} {:>10} {:>10}", "", "adaptive", "fixed", "random");
    let _ = writeln!(
        text,
        "{:<24} {:>10.4} {:>10} {:>10.4}",
        "RMSE", rmse_cat, fmt_opt(rmse_fixed), rmse_random
    );
    let _ = writeln!(
        text,
        "{:<24} {:>9.1}% {:>10} {:>10}",
        "improvement vs random",
        improvement_cat,
        improvement_fixed.map(|v| format!("{v:.1}%")).unwrap_or_else(|| "-".into()),
        "-"
    );
    let skipped: usize = reports.iter().map(|r| r.skipped_missing).sum();
    if skipped > 0 {
        let _ = writeln!(text, "skipped {skipped} unanswered item request(s)");
    }
    std::fs::write(out, &text)?;
    print!("{text}");

    if let Some(kv_path) = kv {
        let mut kv_text = String::new();
        let _ = writeln!(kv_text, "seeds = {seeds}");
        let _ = writeln!(kv_text, "battery_size = {battery_size}");
        let _ = writeln!(kv_text, "rmse_cat = {rmse_cat}");
        let _ = writeln!(kv_text, "rmse_random = {rmse_random}");
        if let Some(v) = rmse_fixed {
            let _ = writeln!(kv_text, "rmse_fixed = {v}");
        }
        let _ = writeln!(kv_text, "improvement_cat_pct = {improvement_cat}");
        if let Some(v) = improvement_fixed {
            let _ = writeln!(kv_text, "improvement_fixed_pct = {v}");
        }
        for (i, r) in reports.iter().enumerate() {
            let _ = writeln!(kv_text, "seed{i}.rmse_cat = {}", r.rmse_cat);
            let _ = writeln!(kv_text, "seed{i}.rmse_random = {}", r.rmse_random);
            let _ = writeln!(kv_text, "seed{i}.improvement_cat_pct = {}", r.improvement_cat_pct);
        }
        std::fs::write(kv_path, kv_text)?;
    }
    RunManifest::new("cat", config)
        .with_input(irf_path)?
        .with_input(data_path)?
        .with_output(out)?
        .write_for(out)?;
    Ok(())
}
