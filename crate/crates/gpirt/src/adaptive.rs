//! Adaptive testing: mutual-information item selection over a discrete
//! grid belief, multiplicative belief updates, stopping rules, and the
//! battery replay experiment.

use std::sync::Arc;

use rand::seq::index::sample as index_sample;
use rayon::prelude::*;

use crate::error::{GpirtError, Result};
use crate::gp::ThetaGrid;
use crate::model::ResponseMatrix;
use crate::num::std_normal_logpdf;
use crate::rng::{substream, StreamPhase};
use crate::scoring::IRFTable;

/// IRF probabilities are pulled inside [1e-6, 1 - 1e-6] before any log or
/// entropy operation.
pub const IRF_CLIP: f64 = 1e-6;

#[inline]
fn clip_prob(p: f64) -> f64 {
    p.clamp(IRF_CLIP, 1.0 - IRF_CLIP)
}

/// Discrete unnormalized posterior over the latent-score grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefGrid {
    grid: Arc<ThetaGrid>,
    log_mass: Vec<f64>,
}

impl BeliefGrid {
    pub fn new(grid: Arc<ThetaGrid>, log_mass: Vec<f64>) -> Result<Self> {
        if log_mass.len() != grid.len() {
            return Err(GpirtError::GridMismatch {
                expected: grid.len(),
                got: log_mass.len(),
            });
        }
        let belief = BeliefGrid { grid, log_mass };
        if belief.max_log_mass().is_finite() {
            Ok(belief)
        } else {
            Err(GpirtError::DegeneratePosterior)
        }
    }

    /// Standard-normal prior discretized on the grid.
    pub fn standard_normal_prior(grid: Arc<ThetaGrid>) -> Self {
        let log_mass = grid.points().iter().map(|&t| std_normal_logpdf(t)).collect();
        BeliefGrid { grid, log_mass }
    }

    pub fn grid(&self) -> &Arc<ThetaGrid> {
        &self.grid
    }

    pub fn log_mass(&self) -> &[f64] {
        &self.log_mass
    }

    fn max_log_mass(&self) -> f64 {
        self.log_mass.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Normalized probability mass; sums to one within floating-point
    /// accumulation error.
    pub fn normalized(&self) -> Vec<f64> {
        let max = self.max_log_mass();
        let raw: Vec<f64> = self.log_mass.iter().map(|&lm| (lm - max).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    pub fn posterior_mean(&self) -> f64 {
        self.normalized()
            .iter()
            .zip(self.grid.points())
            .map(|(&w, &t)| w * t)
            .sum()
    }

    pub fn posterior_sd(&self) -> f64 {
        let w = self.normalized();
        let mean: f64 = w.iter().zip(self.grid.points()).map(|(&w, &t)| w * t).sum();
        let var: f64 = w
            .iter()
            .zip(self.grid.points())
            .map(|(&w, &t)| w * (t - mean) * (t - mean))
            .sum();
        var.max(0.0).sqrt()
    }

    /// Discrete entropy of the normalized mass, in nats.
    pub fn entropy(&self) -> f64 {
        self.normalized()
            .iter()
            .filter(|&&w| w > 0.0)
            .map(|&w| -w * w.ln())
            .sum()
    }
}

/// Binary entropy in nats, with 0 ln 0 = 0.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GpirtError::InvalidArgument(format!(
            "probability {p} outside [0, 1]"
        )));
    }
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.ln();
    }
    if p < 1.0 {
        h -= (1.0 - p) * (1.0 - p).ln();
    }
    Ok(h)
}

fn check_aligned(irfs: &IRFTable, belief: &BeliefGrid) -> Result<()> {
    if irfs.grid().len() != belief.grid().len() {
        return Err(GpirtError::GridMismatch {
            expected: belief.grid().len(),
            got: irfs.grid().len(),
        });
    }
    Ok(())
}

/// Marginal probability of a positive response to one item under the
/// current belief: the grid sum of the IRF against the normalized mass.
pub fn marginal_prob(irfs: &IRFTable, item: usize, belief: &BeliefGrid) -> Result<f64> {
    check_aligned(irfs, belief)?;
    let w = belief.normalized();
    Ok(irfs.row(item).iter().zip(&w).map(|(&p, &wk)| p * wk).sum())
}

/// Mutual information between the unknown response to one item and the
/// latent score: h(p*) - E[h(pi(theta*))], clamped below at zero.
pub fn mutual_information(irfs: &IRFTable, item: usize, belief: &BeliefGrid) -> Result<f64> {
    check_aligned(irfs, belief)?;
    let w = belief.normalized();
    let row = irfs.row(item);
    let p_star: f64 = row.iter().zip(&w).map(|(&p, &wk)| clip_prob(p) * wk).sum();
    let marginal_entropy = binary_entropy(clip_prob(p_star))?;
    let mut expected_entropy = 0.0;
    for (&p, &wk) in row.iter().zip(&w) {
        expected_entropy += wk * binary_entropy(clip_prob(p))?;
    }
    Ok((marginal_entropy - expected_entropy).max(0.0))
}

/// The available item maximizing mutual information; ties break to the
/// smallest item index.
pub fn select_item(available: &[usize], irfs: &IRFTable, belief: &BeliefGrid) -> Result<usize> {
    if available.is_empty() {
        return Err(GpirtError::EmptyItemSet);
    }
    let mut best = available[0];
    let mut best_mi = f64::NEG_INFINITY;
    for &item in available {
        let mi = mutual_information(irfs, item, belief)?;
        if mi > best_mi || (mi == best_mi && item < best) {
            best = item;
            best_mi = mi;
        }
    }
    Ok(best)
}

/// Multiply the belief by the item's IRF (positive response) or its
/// complement (negative response).
pub fn update_belief(belief: &BeliefGrid, irfs: &IRFTable, item: usize, response: i8) -> Result<BeliefGrid> {
    check_aligned(irfs, belief)?;
    if response != 1 && response != -1 {
        return Err(GpirtError::InvalidArgument(format!(
            "response must be -1 or +1, got {response}"
        )));
    }
    let row = irfs.row(item);
    let log_mass: Vec<f64> = belief
        .log_mass()
        .iter()
        .zip(row)
        .map(|(&lm, &p)| {
            let p = clip_prob(p);
            lm + if response > 0 { p.ln() } else { (1.0 - p).ln() }
        })
        .collect();
    BeliefGrid::new(Arc::clone(belief.grid()), log_mass).map_err(|e| match e {
        GpirtError::DegeneratePosterior => GpirtError::DegeneratePosterior,
        other => other,
    })
}

/// When to stop administering items.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    MaxItems(usize),
    PosteriorSd(f64),
}

/// Record of one adaptive session: items in administration order, their
/// responses, the belief after each update, and the selection-time mutual
/// information of each administered item.
#[derive(Debug, Clone, PartialEq)]
pub struct CatTrace {
    pub administered: Vec<String>,
    pub responses: Vec<i8>,
    pub belief_snapshots: Vec<BeliefGrid>,
    pub mi_values: Vec<f64>,
    pub final_belief: BeliefGrid,
}

/// An adaptive run that failed mid-session; the partial trace is attached.
#[derive(Debug)]
pub struct CatError {
    pub cause: GpirtError,
    pub partial: CatTrace,
}

impl From<CatError> for GpirtError {
    fn from(e: CatError) -> Self {
        e.cause
    }
}

/// Run one adaptive session from the discretized standard-normal prior:
/// repeatedly select the highest-information item among those not yet
/// administered, query the responder, and update the belief, until the
/// stopping rule fires or items run out.
pub fn run_cat<F>(
    irfs: &IRFTable,
    available: &[usize],
    responder: F,
    stop: StopRule,
) -> std::result::Result<CatTrace, Box<CatError>>
where
    F: FnMut(&str) -> Result<i8>,
{
    let prior = BeliefGrid::standard_normal_prior(Arc::clone(irfs.grid()));
    run_cat_from(irfs, prior, available, responder, stop)
}

/// [`run_cat`] with an explicit starting belief.
pub fn run_cat_from<F>(
    irfs: &IRFTable,
    prior: BeliefGrid,
    available: &[usize],
    mut responder: F,
    stop: StopRule,
) -> std::result::Result<CatTrace, Box<CatError>>
where
    F: FnMut(&str) -> Result<i8>,
{
    let mut belief = prior;
    let mut remaining: Vec<usize> = available.to_vec();
    let mut trace = CatTrace {
        administered: Vec::new(),
        responses: Vec::new(),
        belief_snapshots: Vec::new(),
        mi_values: Vec::new(),
        final_belief: belief.clone(),
    };

    let fail = |cause: GpirtError, trace: &CatTrace| {
        Box::new(CatError {
            cause,
            partial: trace.clone(),
        })
    };

    loop {
        let done = match stop {
            StopRule::MaxItems(k) => trace.administered.len() >= k,
            StopRule::PosteriorSd(tau) => belief.posterior_sd() <= tau,
        };
        if done || remaining.is_empty() {
            break;
        }
        let item = select_item(&remaining, irfs, &belief).map_err(|e| fail(e, &trace))?;
        let mi = mutual_information(irfs, item, &belief).map_err(|e| fail(e, &trace))?;
        let item_id = irfs.items()[item].clone();
        let response = responder(&item_id).map_err(|e| fail(e, &trace))?;
        belief = update_belief(&belief, irfs, item, response).map_err(|e| fail(e, &trace))?;
        remaining.retain(|&i| i != item);
        trace.administered.push(item_id);
        trace.responses.push(response);
        trace.mi_values.push(mi);
        trace.belief_snapshots.push(belief.clone());
        trace.final_belief = belief.clone();
    }
    Ok(trace)
}

/// Belief posterior from a fixed batch of responses, all applied at once.
pub fn belief_from_responses(
    irfs: &IRFTable,
    responses: &[(usize, i8)],
) -> Result<BeliefGrid> {
    let mut belief = BeliefGrid::standard_normal_prior(Arc::clone(irfs.grid()));
    for &(item, y) in responses {
        belief = update_belief(&belief, irfs, item, y)?;
    }
    Ok(belief)
}

/// Battery comparison for one replay experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub n_respondents: usize,
    pub battery_size: usize,
    pub rmse_cat: f64,
    pub rmse_fixed: Option<f64>,
    pub rmse_random: f64,
    pub improvement_cat_pct: f64,
    pub improvement_fixed_pct: Option<f64>,
    /// Item requests skipped because the respondent had no recorded
    /// response.
    pub skipped_missing: usize,
}

/// Replay recorded responses through three batteries of size `k` --
/// adaptive, fixed, and per-respondent random -- and compare each
/// battery's posterior-mean score against the full-battery reference.
/// Items without a recorded response are excluded from a respondent's
/// available set and counted in the report.
pub fn replay_experiment(
    irfs: &IRFTable,
    test_data: &ResponseMatrix,
    k: usize,
    fixed_battery: Option<&[String]>,
    seed: u64,
) -> Result<ReplayReport> {
    if k == 0 {
        return Err(GpirtError::InvalidArgument("battery size must be >= 1".into()));
    }
    let item_map: Vec<usize> = test_data
        .item_ids()
        .iter()
        .map(|id| {
            irfs.index_of(id).ok_or_else(|| GpirtError::UnknownId { id: id.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    let fixed_idx: Option<Vec<usize>> = match fixed_battery {
        None => None,
        Some(ids) => Some(
            ids.iter()
                .map(|id| irfs.index_of(id).ok_or_else(|| GpirtError::UnknownId { id: id.clone() }))
                .collect::<Result<Vec<_>>>()?,
        ),
    };

    struct PerRespondent {
        err_cat: f64,
        err_fixed: Option<f64>,
        err_random: f64,
        skipped: usize,
    }

    let per: Vec<PerRespondent> = (0..test_data.n_respondents())
        .into_par_iter()
        .map(|j| -> Result<PerRespondent> {
            // recorded responses keyed by IRF item index
            let recorded: Vec<(usize, i8)> = test_data
                .respondent_observations(j)
                .into_iter()
                .map(|(col, y)| (item_map[col], y))
                .collect();
            let lookup = |item: usize| recorded.iter().find(|(i, _)| *i == item).map(|&(_, y)| y);
            let available: Vec<usize> = recorded.iter().map(|&(i, _)| i).collect();

            let reference = belief_from_responses(irfs, &recorded)?.posterior_mean();

            let responder = |item_id: &str| -> Result<i8> {
                let idx = irfs.index_of(item_id).ok_or_else(|| GpirtError::UnknownId {
                    id: item_id.to_string(),
                })?;
                lookup(idx).ok_or_else(|| GpirtError::OracleFailure {
                    item: item_id.to_string(),
                    message: "no recorded response".into(),
                })
            };
            let trace = run_cat(irfs, &available, responder, StopRule::MaxItems(k))
                .map_err(|e| e.cause)?;
            let est_cat = trace.final_belief.posterior_mean();

            let mut skipped = 0;
            let est_fixed = match &fixed_idx {
                None => None,
                Some(battery) => {
                    let answered: Vec<(usize, i8)> = battery
                        .iter()
                        .filter_map(|&i| match lookup(i) {
                            Some(y) => Some((i, y)),
                            None => {
                                skipped += 1;
                                None
                            }
                        })
                        .collect();
                    Some(belief_from_responses(irfs, &answered)?.posterior_mean())
                }
            };

            // fresh uniform battery per respondent
            let mut rng = substream(seed, StreamPhase::Replay, 0, j as u64);
            let take = k.min(available.len());
            let chosen = index_sample(&mut rng, available.len(), take);
            let random_responses: Vec<(usize, i8)> =
                chosen.iter().map(|pos| recorded[pos]).collect();
            let est_random = belief_from_responses(irfs, &random_responses)?.posterior_mean();

            Ok(PerRespondent {
                err_cat: est_cat - reference,
                err_fixed: est_fixed.map(|e| e - reference),
                err_random: est_random - reference,
                skipped,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let rmse = |errs: &[f64]| -> f64 {
        (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt()
    };
    let cat_errs: Vec<f64> = per.iter().map(|p| p.err_cat).collect();
    let random_errs: Vec<f64> = per.iter().map(|p| p.err_random).collect();
    let rmse_cat = rmse(&cat_errs);
    let rmse_random = rmse(&random_errs);
    let rmse_fixed = if per.iter().all(|p| p.err_fixed.is_some()) {
        let errs: Vec<f64> = per.iter().map(|p| p.err_fixed.unwrap()).collect();
        Some(rmse(&errs))
    } else {
        None
    };
    let improvement = |r: f64| {
        if rmse_random > 0.0 {
            100.0 * (rmse_random - r) / rmse_random
        } else {
            0.0
        }
    };

    Ok(ReplayReport {
        n_respondents: test_data.n_respondents(),
        battery_size: k,
        rmse_cat,
        rmse_fixed,
        rmse_random,
        improvement_cat_pct: improvement(rmse_cat),
        improvement_fixed_pct: rmse_fixed.map(improvement),
        skipped_missing: per.iter().map(|p| p.skipped).sum(),
    })
}
