//! Posterior IRF estimation, held-out prediction, and evaluation metrics.

use std::sync::Arc;

use rand::seq::index::sample as index_sample;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{GpirtError, Result};
use crate::gp::{interpolate_on_grid, ThetaGrid};
use crate::model::ResponseMatrix;
use crate::num::sigmoid;
use crate::sampler::Chain;

/// Probability floor applied when a prediction saturates numerically.
const PROB_CLIP: f64 = 1e-12;

/// Posterior-mean item response functions on the shared grid: one row of
/// positive-response probabilities per item, each strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct IRFTable {
    grid: Arc<ThetaGrid>,
    items: Vec<String>,
    probs: Vec<Vec<f64>>,
}

impl IRFTable {
    pub fn new(grid: Arc<ThetaGrid>, items: Vec<String>, probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.len() != items.len() {
            return Err(GpirtError::InvalidArgument(format!(
                "{} probability rows for {} items",
                probs.len(),
                items.len()
            )));
        }
        for row in &probs {
            if row.len() != grid.len() {
                return Err(GpirtError::GridMismatch {
                    expected: grid.len(),
                    got: row.len(),
                });
            }
            if row.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
                return Err(GpirtError::InvalidArgument(
                    "response probabilities must lie strictly inside (0, 1)".into(),
                ));
            }
        }
        Ok(IRFTable { grid, items, probs })
    }

    pub fn grid(&self) -> &Arc<ThetaGrid> {
        &self.grid
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn row(&self, item: usize) -> &[f64] {
        &self.probs[item]
    }

    pub fn index_of(&self, item_id: &str) -> Option<usize> {
        self.items.iter().position(|i| i == item_id)
    }
}

/// Held-out prediction metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub mean_loglik_per_response: f64,
    pub accuracy: f64,
    pub auc: f64,
    pub n_heldout: usize,
}

/// Average each item's dense latent-function samples through the logistic
/// link: pi_i(theta*) = mean over stored states of sigmoid(f*_i(theta*)).
/// Averages that saturate in double precision (|f*| beyond ~36 at a grid
/// point in every state) are pulled just inside (0, 1).
pub fn estimate_irfs(chain: &Chain) -> Result<IRFTable> {
    if chain.states.is_empty() {
        return Err(GpirtError::EmptyChain);
    }
    let n_items = chain.item_ids.len();
    let grid = Arc::clone(chain.states[0].f_star[0].grid());
    let n = grid.len();
    let mut probs = vec![vec![0.0; n]; n_items];
    for state in &chain.states {
        for (i, f) in state.f_star.iter().enumerate() {
            for (k, &v) in f.values().iter().enumerate() {
                probs[i][k] += sigmoid(v);
            }
        }
    }
    let count = chain.states.len() as f64;
    for row in &mut probs {
        for p in row.iter_mut() {
            *p = (*p / count).clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        }
    }
    IRFTable::new(grid, chain.item_ids.clone(), probs)
}

/// Per-respondent posterior mean and sample standard deviation of the
/// latent score over stored states.
pub fn theta_estimates(chain: &Chain) -> Result<(Vec<f64>, Vec<f64>)> {
    if chain.states.is_empty() {
        return Err(GpirtError::EmptyChain);
    }
    let m = chain.respondent_ids.len();
    let count = chain.states.len() as f64;
    let mut means = vec![0.0; m];
    for state in &chain.states {
        for (j, &t) in state.thetas.iter().enumerate() {
            means[j] += t;
        }
    }
    for mean in means.iter_mut() {
        *mean /= count;
    }
    let mut sds = vec![0.0; m];
    if chain.states.len() > 1 {
        for state in &chain.states {
            for (j, &t) in state.thetas.iter().enumerate() {
                let d = t - means[j];
                sds[j] += d * d;
            }
        }
        for sd in sds.iter_mut() {
            *sd = (*sd / (count - 1.0)).sqrt();
        }
    }
    Ok((means, sds))
}

/// Linear interpolation of an item's response probability between adjacent
/// grid points. Scores outside the grid range are rejected.
pub fn predict_prob(irfs: &IRFTable, theta: f64, item: usize) -> Result<f64> {
    interpolate_on_grid(&irfs.grid, &irfs.probs[item], theta)
}

/// Default orientation anchor when the user names none: the respondent
/// with the largest absolute posterior-mean score, required to keep the
/// sign it already carries (the chain's majority mode).
pub fn auto_anchor(chain: &Chain) -> Result<crate::sampler::Anchor> {
    let (means, _) = theta_estimates(chain)?;
    let best = means
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(j, _)| j)
        .ok_or(GpirtError::EmptyChain)?;
    Ok(crate::sampler::Anchor {
        respondent_id: chain.respondent_ids[best].clone(),
        positive: means[best] >= 0.0,
    })
}

/// Area under the ROC curve in Mann-Whitney form: the probability that a
/// uniformly random positive outranks a random negative, ties counted 1/2.
pub fn auc(scores: &[f64], labels: &[i8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(GpirtError::InvalidArgument(
            "scores and labels must align".into(),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(GpirtError::InvalidArgument("scores must not be NaN".into()));
    }
    if labels.iter().any(|&y| y != 1 && y != -1) {
        return Err(GpirtError::InvalidArgument(
            "labels must be -1 or +1".into(),
        ));
    }
    let n_pos = labels.iter().filter(|&&y| y > 0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(GpirtError::UndefinedAuc);
    }

    // Mid-rank assignment over ties, then the rank-sum identity.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks are 1-based; ties share the average rank of their block
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            if labels[idx] > 0 {
                rank_sum_pos += mid_rank;
            }
        }
        start = end;
    }
    let numerator = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(numerator / (n_pos as f64 * n_neg as f64))
}

/// Score predicted probabilities against held-out labels: mean log
/// likelihood per response, accuracy at threshold 0.5 (ties predicted
/// positive), and Mann-Whitney AUC. Saturated probabilities are clipped
/// to [1e-12, 1 - 1e-12] before the log.
pub fn score_predictions(probs: &[f64], labels: &[i8]) -> Result<MetricsReport> {
    if probs.len() != labels.len() {
        return Err(GpirtError::InvalidArgument(
            "probabilities and labels must align".into(),
        ));
    }
    if probs.is_empty() {
        return Err(GpirtError::InvalidArgument("no held-out responses".into()));
    }
    let mut loglik = 0.0;
    let mut correct = 0usize;
    for (&p, &y) in probs.iter().zip(labels) {
        let p_clipped = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        loglik += if y > 0 {
            p_clipped.ln()
        } else {
            (1.0 - p_clipped).ln()
        };
        let predicted: i8 = if p >= 0.5 { 1 } else { -1 };
        correct += (predicted == y) as usize;
    }
    Ok(MetricsReport {
        mean_loglik_per_response: loglik / probs.len() as f64,
        accuracy: correct as f64 / probs.len() as f64,
        auc: auc(probs, labels)?,
        n_heldout: probs.len(),
    })
}

/// Mask a uniform sample of observed cells as missing. The draw is
/// retried (up to 100 times) whenever a respondent or item would lose all
/// of its observed responses.
pub fn holdout_mask<R: Rng + ?Sized>(
    data: &ResponseMatrix,
    fraction: f64,
    rng: &mut R,
) -> Result<(ResponseMatrix, Vec<(usize, usize)>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(GpirtError::InvalidArgument(format!(
            "holdout fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let observed = data.observed_cells();
    let n_mask = ((observed.len() as f64) * fraction).round() as usize;
    if n_mask == 0 || n_mask >= observed.len() {
        return Err(GpirtError::InvalidArgument(format!(
            "holdout of {n_mask} cells out of {} is not usable",
            observed.len()
        )));
    }

    const MAX_ATTEMPTS: usize = 100;
    for _ in 0..MAX_ATTEMPTS {
        let picked = index_sample(rng, observed.len(), n_mask);
        let mut resp_left: Vec<usize> = vec![0; data.n_respondents()];
        let mut item_left: Vec<usize> = vec![0; data.n_items()];
        for &(r, i, _) in &observed {
            resp_left[r] += 1;
            item_left[i] += 1;
        }
        let mut cells: Vec<(usize, usize)> = Vec::with_capacity(n_mask);
        for idx in picked.iter() {
            let (r, i, _) = observed[idx];
            resp_left[r] -= 1;
            item_left[i] -= 1;
            cells.push((r, i));
        }
        let feasible = resp_left.iter().all(|&c| c > 0) && item_left.iter().all(|&c| c > 0);
        if feasible {
            cells.sort_unstable();
            let mut train = data.clone();
            for &(r, i) in &cells {
                train.set(r, i, None);
            }
            return Ok((train, cells));
        }
    }
    Err(GpirtError::InfeasibleMask {
        attempts: MAX_ATTEMPTS,
    })
}

/// Paired two-sided t-test; the p-value comes from the t CDF with
/// |a| - 1 degrees of freedom. Identical difference vectors are rejected.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(GpirtError::InvalidArgument(
            "paired test needs two aligned samples of length >= 2".into(),
        ));
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 {
        return Err(GpirtError::DegenerateTest);
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0)
        .map_err(|e| GpirtError::InvalidArgument(e.to_string()))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok((t, p))
}

/// Row-wise split into training and test respondents.
pub fn respondent_holdout<R: Rng + ?Sized>(
    data: &ResponseMatrix,
    fraction: f64,
    rng: &mut R,
) -> Result<(ResponseMatrix, ResponseMatrix)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(GpirtError::InvalidArgument(format!(
            "holdout fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let m = data.n_respondents();
    let n_test = ((m as f64) * fraction).round() as usize;
    if n_test == 0 || n_test >= m {
        return Err(GpirtError::InvalidArgument(format!(
            "test split of {n_test} rows out of {m} is not usable"
        )));
    }
    let mut test_rows: Vec<usize> = index_sample(rng, m, n_test).into_iter().collect();
    test_rows.sort_unstable();
    let train_rows: Vec<usize> = (0..m).filter(|r| !test_rows.contains(r)).collect();
    Ok((
        data.select_respondents(&train_rows),
        data.select_respondents(&test_rows),
    ))
}
