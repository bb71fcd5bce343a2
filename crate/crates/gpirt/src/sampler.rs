//! Gibbs sampler over latent scores, per-item latent functions, and mean
//! coefficients.
//!
//! Each sweep updates, in order: (1) latent-function values at the
//! observations via elliptical slice sampling, (2) dense latent functions
//! on the shared grid, (3) latent scores from their exact grid posterior
//! via inverse transform sampling, (4) mean coefficients via a
//! Metropolis-Hastings random walk. Latent scores are grid-valued by
//! construction: after a score moves, the latent-function values at the
//! observations are read from the dense grid rather than re-conditioned.
//!
//! All randomness is drawn from per-(sweep, phase, index) streams, so a
//! chain is bitwise reproducible for any thread count.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{GpirtError, Result};
use crate::gp::{
    chol_psd, mvn_sample, poly_mean, CholeskyFactor, GridFunction, MeanParams, ThetaGrid,
};
use crate::model::{ChainState, GpirtConfig, Hyperpriors, ResponseMatrix};
use crate::num::{log_sigmoid, normal_logpdf, std_normal_logpdf, LN_2PI};
use crate::rng::{substream, StreamPhase};

const MAX_SLICE_SHRINK: usize = 10_000;

/// Log likelihood of one coded response given the latent-function value:
/// -log(1 + exp(-y * f)), overflow-safe.
#[inline]
pub fn response_loglik(f: f64, y: i8) -> f64 {
    log_sigmoid(f64::from(y) * f)
}

/// One elliptical-slice transition targeting prior x likelihood. The prior
/// is N(prior_mean, L L^T) with `prior_chol_l` the lower factor. Returns a
/// state with strictly larger likelihood than the slice threshold.
pub fn ess_update<R, F>(
    f_current: &[f64],
    prior_mean: &[f64],
    prior_chol_l: &DMatrix<f64>,
    loglik: F,
    rng: &mut R,
) -> Result<Vec<f64>>
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    let dim = f_current.len();
    assert_eq!(prior_mean.len(), dim);
    let ll_current = loglik(f_current);
    if !ll_current.is_finite() {
        return Err(GpirtError::InvalidState(format!(
            "log likelihood at current state is {ll_current}"
        )));
    }
    let zeros = vec![0.0; dim];
    let nu = mvn_sample(&zeros, prior_chol_l, rng);

    let threshold = ll_current + rng.random::<f64>().ln();
    let mut angle = rng.random::<f64>() * TAU;
    let (mut lo, mut hi) = (angle - TAU, angle);

    let mut proposal = vec![0.0; dim];
    for _ in 0..MAX_SLICE_SHRINK {
        let (sin, cos) = angle.sin_cos();
        for j in 0..dim {
            let centered = f_current[j] - prior_mean[j];
            proposal[j] = prior_mean[j] + centered * cos + nu[j] * sin;
        }
        if loglik(&proposal) > threshold {
            return Ok(proposal);
        }
        if angle < 0.0 {
            lo = angle;
        } else {
            hi = angle;
        }
        angle = lo + rng.random::<f64>() * (hi - lo);
    }
    Err(GpirtError::InvalidState(
        "elliptical slice shrinkage did not terminate".into(),
    ))
}

/// Grid-dependent quantities shared by every sweep: the kernel evaluated
/// at grid-index distances, the Cholesky factor of the grid kernel matrix,
/// and the latent-score log prior on the grid.
pub struct SamplerContext {
    grid: Arc<ThetaGrid>,
    kernel_row: Vec<f64>,
    grid_factor: CholeskyFactor,
    log_prior_grid: Vec<f64>,
    max_jitter: f64,
}

impl SamplerContext {
    pub fn new(config: &GpirtConfig) -> Result<Self> {
        config.validate()?;
        let grid = Arc::new(config.grid.clone());
        let n = grid.len();
        let kernel_row: Vec<f64> = (0..n)
            .map(|d| config.kernel.at_distance(d as f64 * grid.step))
            .collect();
        let mut k_grid = DMatrix::zeros(n, n);
        for p in 0..n {
            for q in 0..n {
                k_grid[(p, q)] = kernel_row[p.abs_diff(q)];
            }
        }
        let grid_factor = chol_psd(&k_grid, config.max_jitter, "grid kernel matrix")?;
        let log_prior_grid = grid.points().iter().map(|&t| std_normal_logpdf(t)).collect();
        Ok(SamplerContext {
            grid,
            kernel_row,
            grid_factor,
            log_prior_grid,
            max_jitter: config.max_jitter,
        })
    }

    pub fn grid(&self) -> &Arc<ThetaGrid> {
        &self.grid
    }

    /// Kernel matrix between grid-valued scores, by grid index.
    fn kernel_at_indices(&self, idx: &[usize]) -> DMatrix<f64> {
        let m = idx.len();
        let mut k = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                k[(a, b)] = self.kernel_row[idx[a].abs_diff(idx[b])];
            }
        }
        k
    }

    fn obs_factor(&self, idx: &[usize], context: &str) -> Result<CholeskyFactor> {
        chol_psd(&self.kernel_at_indices(idx), self.max_jitter, context)
    }

    /// Factor the kernel matrix of each index list, computing each
    /// distinct list only once. With fully observed data every item
    /// shares one factor.
    fn grouped_factors(
        &self,
        idx_lists: &[Vec<usize>],
        context: &str,
    ) -> Result<Vec<Arc<CholeskyFactor>>> {
        let mut unique: Vec<&Vec<usize>> = Vec::new();
        let mut assignment = Vec::with_capacity(idx_lists.len());
        let mut seen: std::collections::HashMap<&[usize], usize> = std::collections::HashMap::new();
        for idx in idx_lists {
            let slot = *seen.entry(idx.as_slice()).or_insert_with(|| {
                unique.push(idx);
                unique.len() - 1
            });
            assignment.push(slot);
        }
        let factors: Vec<Arc<CholeskyFactor>> = unique
            .par_iter()
            .map(|idx| self.obs_factor(idx, context).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        Ok(assignment.into_iter().map(|s| Arc::clone(&factors[s])).collect())
    }
}

/// Draw a dense latent function on the grid from its posterior given
/// observations at grid indices `obs_idx`, by pathwise conditioning: an
/// unconditional grid draw is corrected through the observation-kernel
/// solve, which realizes exactly the conditional law N(m*, C*) without
/// factorizing the dense conditional covariance.
fn extend_with_context<R: Rng + ?Sized>(
    obs_idx: &[usize],
    f_obs: &[f64],
    mean: &MeanParams,
    ctx: &SamplerContext,
    obs_factor: Option<&CholeskyFactor>,
    rng: &mut R,
) -> Result<GridFunction> {
    let n = ctx.grid.len();
    let points = ctx.grid.points();
    let zeros = vec![0.0; n];
    let raw = mvn_sample(&zeros, ctx.grid_factor.l(), rng);

    let mut values: Vec<f64> = (0..n).map(|k| mean.eval(points[k]) + raw[k]).collect();
    if obs_idx.is_empty() {
        return GridFunction::new(Arc::clone(&ctx.grid), values);
    }

    let built;
    let factor = match obs_factor {
        Some(f) => f,
        None => {
            built = ctx.obs_factor(obs_idx, "grid extension observations")?;
            &built
        }
    };
    let residual = DVector::from_iterator(
        obs_idx.len(),
        obs_idx
            .iter()
            .zip(f_obs)
            .map(|(&g, &f)| f - mean.eval(points[g]) - raw[g]),
    );
    let alpha = factor.solve_vec(&residual);
    for (k, value) in values.iter_mut().enumerate() {
        let mut corr = 0.0;
        for (j, &g) in obs_idx.iter().enumerate() {
            corr += ctx.kernel_row[k.abs_diff(g)] * alpha[j];
        }
        *value += corr;
    }
    GridFunction::new(Arc::clone(&ctx.grid), values)
}

/// Draw a dense latent function on the configured grid conditioned on
/// observed values. Observation scores snap to their nearest grid point;
/// the sampler keeps scores grid-valued so this is exact in context.
pub fn extend_to_grid<R: Rng + ?Sized>(
    theta_obs: &[f64],
    f_obs: &[f64],
    betas: &MeanParams,
    config: &GpirtConfig,
    rng: &mut R,
) -> Result<GridFunction> {
    if theta_obs.len() != f_obs.len() {
        return Err(GpirtError::InvalidArgument(
            "observation lengths differ".into(),
        ));
    }
    let ctx = SamplerContext::new(config)?;
    let idx: Vec<usize> = theta_obs.iter().map(|&t| ctx.grid.nearest_index(t)).collect();
    extend_with_context(&idx, f_obs, betas, &ctx, None, rng)
}

/// Unnormalized log posterior of one respondent's latent score on the
/// grid: log prior plus the log likelihood of their observed responses
/// under each item's dense latent function.
pub fn theta_log_posterior(
    responses: &[(usize, i8)],
    f_stars: &[GridFunction],
) -> Result<Vec<f64>> {
    if responses.is_empty() {
        return Err(GpirtError::InvalidArgument(
            "respondent has no observed responses".into(),
        ));
    }
    let first = &f_stars[responses[0].0];
    let n = first.grid().len();
    let mut out: Vec<f64> = first.grid().points().iter().map(|&t| std_normal_logpdf(t)).collect();
    for &(item, y) in responses {
        let f = &f_stars[item];
        if f.values().len() != n {
            return Err(GpirtError::GridMismatch {
                expected: n,
                got: f.values().len(),
            });
        }
        for (k, acc) in out.iter_mut().enumerate() {
            *acc += response_loglik(f.values()[k], y);
        }
    }
    Ok(out)
}

pub(crate) fn inverse_transform_index<R: Rng + ?Sized>(
    n: usize,
    log_weights: &[f64],
    rng: &mut R,
) -> Result<usize> {
    assert_eq!(log_weights.len(), n);
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(GpirtError::DegeneratePosterior);
    }
    let weights: Vec<f64> = log_weights.iter().map(|&lw| (lw - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>();
    let mut cum = 0.0;
    for (k, w) in weights.iter().enumerate() {
        cum += w / total;
        if cum >= u {
            return Ok(k);
        }
    }
    Ok(n - 1)
}

/// Draw a latent score from a discrete grid posterior by inverse transform
/// sampling: max-shifted exponentiation, normalization, and the first grid
/// point whose cumulative mass reaches a uniform draw.
pub fn inverse_transform_sample<R: Rng + ?Sized>(
    grid: &ThetaGrid,
    log_weights: &[f64],
    rng: &mut R,
) -> Result<f64> {
    if log_weights.len() != grid.len() {
        return Err(GpirtError::GridMismatch {
            expected: grid.len(),
            got: log_weights.len(),
        });
    }
    let k = inverse_transform_index(grid.len(), log_weights, rng)?;
    Ok(grid.points()[k])
}

/// Metropolis-Hastings random-walk update of one item's mean coefficients.
/// The target couples the coefficient prior with the marginal Gaussian
/// density of the observed latent-function values under mean mu(.; beta);
/// `factor` is the Cholesky factor of the kernel matrix at the
/// observations. A zero proposal scale always accepts unchanged.
pub fn mh_beta_update<R: Rng + ?Sized>(
    betas: &MeanParams,
    theta_obs: &[f64],
    f_obs: &[f64],
    prior: &Hyperpriors,
    factor: &CholeskyFactor,
    proposal_sd: f64,
    rng: &mut R,
) -> (MeanParams, bool) {
    let m = f_obs.len();
    let log_target = |b: &MeanParams| -> f64 {
        let mut lp = 0.0;
        for (d, &c) in b.coefficients().iter().enumerate() {
            lp += normal_logpdf(c, prior.beta_mean[d], prior.beta_var[d]);
        }
        let residual = DVector::from_iterator(
            m,
            theta_obs.iter().zip(f_obs).map(|(&t, &f)| f - b.eval(t)),
        );
        lp - 0.5 * (factor.inv_quad(&residual) + factor.log_det() + m as f64 * LN_2PI)
    };

    let proposed: Vec<f64> = betas
        .coefficients()
        .iter()
        .map(|&c| c + proposal_sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let proposed = MeanParams::new(proposed).expect("perturbed coefficients stay valid");

    let delta = log_target(&proposed) - log_target(betas);
    if rng.random::<f64>().ln() < delta {
        (proposed, true)
    } else {
        (betas.clone(), false)
    }
}

/// Per-item and per-respondent observation layouts.
struct DataLayout {
    /// For each item: (respondent index, response) pairs in respondent order.
    item_obs: Vec<Vec<(usize, i8)>>,
    /// For each respondent: (item index, response) pairs in item order.
    resp_obs: Vec<Vec<(usize, i8)>>,
}

impl DataLayout {
    fn new(data: &ResponseMatrix) -> Result<Self> {
        let item_obs: Vec<_> = (0..data.n_items()).map(|i| data.item_observations(i)).collect();
        for (i, obs) in item_obs.iter().enumerate() {
            if obs.is_empty() {
                return Err(GpirtError::InvalidArgument(format!(
                    "item '{}' has no observed responses; filter degenerate items first",
                    data.item_ids()[i]
                )));
            }
        }
        let resp_obs = (0..data.n_respondents())
            .map(|r| data.respondent_observations(r))
            .collect();
        Ok(DataLayout { item_obs, resp_obs })
    }
}

/// Per-sweep acceptance record.
struct SweepOutcome {
    state: ChainState,
    beta_accepted: Vec<bool>,
    log_joint: f64,
}

fn theta_indices(grid: &ThetaGrid, thetas: &[f64]) -> Vec<usize> {
    thetas.iter().map(|&t| grid.nearest_index(t)).collect()
}

fn sweep_once(
    state: &ChainState,
    layout: &DataLayout,
    config: &GpirtConfig,
    ctx: &SamplerContext,
    sweep: u64,
) -> Result<SweepOutcome> {
    let n_items = layout.item_obs.len();
    let idx_old = theta_indices(&ctx.grid, &state.thetas);
    let points = ctx.grid.points();

    // Step 1-2 per item: slice-sample f at the observations, then extend
    // to the dense grid. Log-likelihood rows per response sign are
    // precomputed for the score update.
    struct ItemPass {
        f_star: GridFunction,
        ll_pos: Vec<f64>,
        ll_neg: Vec<f64>,
    }
    let obs_idx_old: Vec<Vec<usize>> = layout
        .item_obs
        .iter()
        .map(|obs| obs.iter().map(|&(r, _)| idx_old[r]).collect())
        .collect();
    let factors_old = ctx.grouped_factors(&obs_idx_old, "item kernel")?;
    let passes: Vec<ItemPass> = (0..n_items)
        .into_par_iter()
        .map(|i| -> Result<ItemPass> {
            let obs = &layout.item_obs[i];
            let obs_idx = &obs_idx_old[i];
            let theta_obs: Vec<f64> = obs_idx.iter().map(|&g| points[g]).collect();
            let ys: Vec<i8> = obs.iter().map(|&(_, y)| y).collect();
            let factor = &factors_old[i];
            let prior_mean = poly_mean(&theta_obs, &state.betas[i]);

            let mut rng = substream(config.seed, StreamPhase::EllipticalSlice, sweep, i as u64);
            let loglik = |f: &[f64]| -> f64 {
                f.iter()
                    .zip(&ys)
                    .map(|(&fv, &y)| response_loglik(fv, y))
                    .sum()
            };
            let f_obs = ess_update(&state.f_obs[i], &prior_mean, factor.l(), loglik, &mut rng)?;

            let mut rng = substream(config.seed, StreamPhase::GridExtend, sweep, i as u64);
            let f_star = extend_with_context(
                obs_idx,
                &f_obs,
                &state.betas[i],
                ctx,
                Some(factor),
                &mut rng,
            )?;

            let ll_pos: Vec<f64> = f_star.values().iter().map(|&f| log_sigmoid(f)).collect();
            let ll_neg: Vec<f64> = f_star.values().iter().map(|&f| log_sigmoid(-f)).collect();
            Ok(ItemPass {
                f_star,
                ll_pos,
                ll_neg,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // Step 3 per respondent: exact grid posterior and inverse transform.
    let new_idx: Vec<usize> = (0..layout.resp_obs.len())
        .into_par_iter()
        .map(|r| -> Result<usize> {
            let mut acc = ctx.log_prior_grid.clone();
            for &(item, y) in &layout.resp_obs[r] {
                let row = if y > 0 {
                    &passes[item].ll_pos
                } else {
                    &passes[item].ll_neg
                };
                for (a, &b) in acc.iter_mut().zip(row) {
                    *a += b;
                }
            }
            let mut rng = substream(config.seed, StreamPhase::ThetaDraw, sweep, r as u64);
            inverse_transform_index(ctx.grid.len(), &acc, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let new_thetas: Vec<f64> = new_idx.iter().map(|&k| points[k]).collect();

    // Step 4 per item: re-read f at the moved scores from the grid, then
    // update the mean coefficients. The same kernel factor feeds the
    // stored log-joint term.
    struct ItemClose {
        f_obs: Vec<f64>,
        betas: MeanParams,
        accepted: bool,
        log_joint_term: f64,
    }
    let obs_idx_new: Vec<Vec<usize>> = layout
        .item_obs
        .iter()
        .map(|obs| obs.iter().map(|&(r, _)| new_idx[r]).collect())
        .collect();
    let factors_new = ctx.grouped_factors(&obs_idx_new, "item kernel after score move")?;
    let closes: Vec<ItemClose> = (0..n_items)
        .into_par_iter()
        .map(|i| -> Result<ItemClose> {
            let obs = &layout.item_obs[i];
            let obs_idx = &obs_idx_new[i];
            let theta_obs: Vec<f64> = obs_idx.iter().map(|&g| points[g]).collect();
            let f_obs: Vec<f64> = obs_idx
                .iter()
                .map(|&g| passes[i].f_star.values()[g])
                .collect();
            let factor = &factors_new[i];

            let mut rng = substream(config.seed, StreamPhase::BetaWalk, sweep, i as u64);
            let (betas, accepted) = mh_beta_update(
                &state.betas[i],
                &theta_obs,
                &f_obs,
                &config.beta_prior,
                factor,
                config.mh_proposal_sd,
                &mut rng,
            );

            let log_joint_term = item_log_joint_term(
                &betas,
                &theta_obs,
                &f_obs,
                obs,
                factor,
                &config.beta_prior,
            );
            Ok(ItemClose {
                f_obs,
                betas,
                accepted,
                log_joint_term,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let theta_prior_sum: f64 = new_idx.iter().map(|&k| ctx.log_prior_grid[k]).sum();
    let log_joint = theta_prior_sum + closes.iter().map(|c| c.log_joint_term).sum::<f64>();

    let mut f_obs = Vec::with_capacity(n_items);
    let mut betas = Vec::with_capacity(n_items);
    let mut f_star = Vec::with_capacity(n_items);
    let mut beta_accepted = Vec::with_capacity(n_items);
    for (pass, close) in passes.into_iter().zip(closes) {
        f_star.push(pass.f_star);
        f_obs.push(close.f_obs);
        betas.push(close.betas);
        beta_accepted.push(close.accepted);
    }
    Ok(SweepOutcome {
        state: ChainState {
            thetas: new_thetas,
            betas,
            f_obs,
            f_star,
        },
        beta_accepted,
        log_joint,
    })
}

fn item_log_joint_term(
    betas: &MeanParams,
    theta_obs: &[f64],
    f_obs: &[f64],
    obs: &[(usize, i8)],
    factor: &CholeskyFactor,
    prior: &Hyperpriors,
) -> f64 {
    let m = f_obs.len();
    let mut term = 0.0;
    for (d, &c) in betas.coefficients().iter().enumerate() {
        term += normal_logpdf(c, prior.beta_mean[d], prior.beta_var[d]);
    }
    let residual = DVector::from_iterator(
        m,
        theta_obs.iter().zip(f_obs).map(|(&t, &f)| f - betas.eval(t)),
    );
    term += -0.5 * (factor.inv_quad(&residual) + factor.log_det() + m as f64 * LN_2PI);
    for (&(_, y), &f) in obs.iter().zip(f_obs) {
        term += response_loglik(f, y);
    }
    term
}

/// One full Gibbs sweep. The sweep index selects the randomness streams,
/// so a (state, data, config, sweep) tuple maps to exactly one output.
pub fn gibbs_sweep(
    state: &ChainState,
    data: &ResponseMatrix,
    config: &GpirtConfig,
    ctx: &SamplerContext,
    sweep: u64,
) -> Result<ChainState> {
    let layout = DataLayout::new(data)?;
    Ok(sweep_once(state, &layout, config, ctx, sweep)?.state)
}

/// The joint log density of a state: latent-score prior, coefficient
/// priors, the marginal Gaussian density of each item's observed
/// latent-function values, and the response likelihood.
pub fn compute_log_joint(
    state: &ChainState,
    data: &ResponseMatrix,
    config: &GpirtConfig,
    ctx: &SamplerContext,
) -> Result<f64> {
    let layout = DataLayout::new(data)?;
    let idx = theta_indices(&ctx.grid, &state.thetas);
    let points = ctx.grid.points();

    let theta_prior_sum: f64 = idx.iter().map(|&k| ctx.log_prior_grid[k]).sum();
    let mut total = theta_prior_sum;
    for (i, obs) in layout.item_obs.iter().enumerate() {
        let obs_idx: Vec<usize> = obs.iter().map(|&(r, _)| idx[r]).collect();
        let theta_obs: Vec<f64> = obs_idx.iter().map(|&g| points[g]).collect();
        let factor = ctx.obs_factor(&obs_idx, &format!("item {i} kernel"))?;
        total += item_log_joint_term(
            &state.betas[i],
            &theta_obs,
            &state.f_obs[i],
            obs,
            &factor,
            &config.beta_prior,
        );
    }
    Ok(total)
}

/// Sampler diagnostics: per-item acceptance rate of the coefficient walk
/// and the joint log density at every stored state.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub beta_acceptance: Vec<f64>,
    pub log_joint: Vec<f64>,
}

/// Stored post-burn-in, thinned states plus the configuration and ids
/// needed to interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub states: Vec<ChainState>,
    pub config: GpirtConfig,
    pub respondent_ids: Vec<String>,
    pub item_ids: Vec<String>,
    pub diagnostics: Diagnostics,
}

impl Chain {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }
}

/// Run the full sampler: initialize latent scores and coefficients from
/// their priors and latent functions from the resulting process prior,
/// then sweep `n_iterations` times, storing every `thin`-th state after
/// burn-in.
pub fn run_chain(data: &ResponseMatrix, config: &GpirtConfig) -> Result<Chain> {
    config.validate()?;
    let ctx = SamplerContext::new(config)?;
    let layout = DataLayout::new(data)?;
    let m = data.n_respondents();
    let n_items = data.n_items();
    let points = ctx.grid.points();

    // Initialization is phase 0 of the stream space.
    let init_idx: Vec<usize> = (0..m)
        .map(|j| {
            let mut rng = substream(config.seed, StreamPhase::InitTheta, 0, j as u64);
            let draw: f64 = rng.sample(StandardNormal);
            ctx.grid.nearest_index(draw)
        })
        .collect();
    let thetas: Vec<f64> = init_idx.iter().map(|&k| points[k]).collect();

    let betas: Vec<MeanParams> = (0..n_items)
        .map(|i| {
            let mut rng = substream(config.seed, StreamPhase::InitBeta, 0, i as u64);
            let coeffs: Vec<f64> = (0..=config.mean_degree)
                .map(|d| {
                    config.beta_prior.beta_mean[d]
                        + config.beta_prior.beta_var[d].sqrt()
                            * rng.sample::<f64, _>(StandardNormal)
                })
                .collect();
            MeanParams::new(coeffs).expect("prior draw is a valid mean")
        })
        .collect();

    let init_obs_idx: Vec<Vec<usize>> = layout
        .item_obs
        .iter()
        .map(|obs| obs.iter().map(|&(r, _)| init_idx[r]).collect())
        .collect();
    let init_factors = ctx.grouped_factors(&init_obs_idx, "item kernel at init")?;
    let mut init_items: Vec<(Vec<f64>, GridFunction)> = (0..n_items)
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, GridFunction)> {
            let obs_idx = &init_obs_idx[i];
            let theta_obs: Vec<f64> = obs_idx.iter().map(|&g| points[g]).collect();
            let factor = &init_factors[i];
            let prior_mean = poly_mean(&theta_obs, &betas[i]);
            let mut rng = substream(config.seed, StreamPhase::InitLatent, 0, i as u64);
            let f_obs = mvn_sample(&prior_mean, factor.l(), &mut rng);
            let mut rng = substream(config.seed, StreamPhase::GridExtend, 0, i as u64);
            let f_star =
                extend_with_context(obs_idx, &f_obs, &betas[i], &ctx, Some(factor), &mut rng)?;
            Ok((f_obs, f_star))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut f_obs = Vec::with_capacity(n_items);
    let mut f_star = Vec::with_capacity(n_items);
    for (fo, fs) in init_items.drain(..) {
        f_obs.push(fo);
        f_star.push(fs);
    }
    let mut state = ChainState {
        thetas,
        betas,
        f_obs,
        f_star,
    };

    let mut states = Vec::with_capacity(config.n_stored_states());
    let mut log_joint = Vec::with_capacity(config.n_stored_states());
    let mut accept_counts = vec![0usize; n_items];

    for sweep in 1..=config.n_iterations {
        let outcome = sweep_once(&state, &layout, config, &ctx, sweep as u64)?;
        state = outcome.state;
        for (count, &accepted) in accept_counts.iter_mut().zip(&outcome.beta_accepted) {
            *count += accepted as usize;
        }
        if sweep > config.burn_in && (sweep - config.burn_in).is_multiple_of(config.thin) {
            if !outcome.log_joint.is_finite() {
                return Err(GpirtError::InvalidState(format!(
                    "non-finite joint log density at sweep {sweep}"
                )));
            }
            log_joint.push(outcome.log_joint);
            states.push(state.clone());
        }
    }

    Ok(Chain {
        states,
        config: config.clone(),
        respondent_ids: data.respondent_ids().to_vec(),
        item_ids: data.item_ids().to_vec(),
        diagnostics: Diagnostics {
            beta_acceptance: accept_counts
                .iter()
                .map(|&c| c as f64 / config.n_iterations as f64)
                .collect(),
            log_joint,
        },
    })
}

/// Orientation anchor: a respondent whose latent score is required to
/// carry the given sign.
#[derive(Debug, Clone)]
pub struct Anchor {
    pub respondent_id: String,
    pub positive: bool,
}

/// Outcome of a reflection pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionReport {
    pub flipped_states: usize,
    pub ambiguous_states: usize,
    /// Set when the anchor score sat at zero in more than half the states.
    pub ambiguous_anchor: bool,
}

const ANCHOR_ZERO_TOL: f64 = 1e-6;

/// Resolve the reflective ambiguity of the posterior: in every stored
/// state where the anchor's score carries the wrong sign, negate all
/// scores (by mirroring their grid indices), reverse every dense latent
/// function along the grid, and negate odd-degree mean coefficients. The
/// joint density is invariant under this map on a symmetric grid with a
/// symmetric coefficient prior.
pub fn fix_reflection(chain: &Chain, anchor: &Anchor) -> Result<(Chain, ReflectionReport)> {
    let grid = &chain.config.grid;
    if !grid.is_symmetric() {
        return Err(GpirtError::InvalidArgument(
            "reflection requires a grid symmetric about zero".into(),
        ));
    }
    let anchor_idx = chain
        .respondent_ids
        .iter()
        .position(|id| *id == anchor.respondent_id)
        .ok_or_else(|| GpirtError::UnknownId {
            id: anchor.respondent_id.clone(),
        })?;

    let mut out = chain.clone();
    let mut flipped = 0;
    let mut ambiguous = 0;
    for state in &mut out.states {
        let a = state.thetas[anchor_idx];
        if a.abs() <= ANCHOR_ZERO_TOL {
            ambiguous += 1;
            continue;
        }
        let wrong = (a > 0.0) != anchor.positive;
        if wrong {
            reflect_state(state, grid);
            flipped += 1;
        }
    }
    let report = ReflectionReport {
        flipped_states: flipped,
        ambiguous_states: ambiguous,
        ambiguous_anchor: 2 * ambiguous > chain.states.len(),
    };
    Ok((out, report))
}

pub(crate) fn reflect_state(state: &mut ChainState, grid: &ThetaGrid) {
    let points = grid.points();
    for t in state.thetas.iter_mut() {
        *t = points[grid.mirror_index(grid.nearest_index(*t))];
    }
    for f in state.f_star.iter_mut() {
        *f = f.mirrored();
    }
    for b in state.betas.iter_mut() {
        *b = b.mirrored();
    }
    // f_obs is untouched: grid indices mirror along with the reversed
    // dense functions, so the observed values are preserved.
}
