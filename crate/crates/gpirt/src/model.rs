//! Response-data model, validation, and coding conventions, plus the fixed
//! hyperparameters of all priors.
//!
//! Responses are coded -1/+1 with missing cells first-class: every
//! downstream likelihood iterates only observed cells. Respondents with no
//! observed responses are rejected outright rather than carried with a
//! prior-only latent score.

use serde::{Deserialize, Serialize};

use crate::error::{GpirtError, Result};
use crate::gp::{GridFunction, KernelParams, MeanParams, ThetaGrid, DEFAULT_MAX_JITTER};

/// Fixed prior on latent scores: standard normal.
pub const THETA_PRIOR_MEAN: f64 = 0.0;
pub const THETA_PRIOR_VAR: f64 = 1.0;

/// Default prior variance per mean coefficient, weakly informative on the
/// latent-function scale.
pub const DEFAULT_BETA_PRIOR_VAR: f64 = 4.0;

/// Default minority-share threshold for dropping near-unanimous items.
pub const DEFAULT_MIN_MINORITY_FRAC: f64 = 0.01;

/// Input coding of response cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coding {
    /// 0 = negative, 1 = positive.
    ZeroOne,
    /// -1 = negative, +1 = positive.
    PlusMinus,
}

/// An m x n matrix of coded responses in {-1, +1, missing} with string ids
/// for respondents (rows) and items (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    respondent_ids: Vec<String>,
    item_ids: Vec<String>,
    /// Row-major cells; 0 encodes missing.
    cells: Vec<i8>,
}

impl ResponseMatrix {
    /// Build from per-cell options without validating invariants; run
    /// [`validate_responses`] before handing the matrix to a model.
    pub fn from_cells(
        respondent_ids: Vec<String>,
        item_ids: Vec<String>,
        cells: Vec<Option<i8>>,
    ) -> Result<Self> {
        if cells.len() != respondent_ids.len() * item_ids.len() {
            return Err(GpirtError::InvalidArgument(format!(
                "cell count {} does not match {} x {}",
                cells.len(),
                respondent_ids.len(),
                item_ids.len()
            )));
        }
        Ok(ResponseMatrix {
            respondent_ids,
            item_ids,
            cells: cells.into_iter().map(|c| c.unwrap_or(0)).collect(),
        })
    }

    pub fn n_respondents(&self) -> usize {
        self.respondent_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn respondent_ids(&self) -> &[String] {
        &self.respondent_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    #[inline]
    pub fn get(&self, respondent: usize, item: usize) -> Option<i8> {
        match self.cells[respondent * self.item_ids.len() + item] {
            0 => None,
            v => Some(v),
        }
    }

    pub fn set(&mut self, respondent: usize, item: usize, value: Option<i8>) {
        self.cells[respondent * self.item_ids.len() + item] = value.unwrap_or(0);
    }

    /// All observed cells as (respondent, item, response) triples in
    /// row-major order.
    pub fn observed_cells(&self) -> Vec<(usize, usize, i8)> {
        let n = self.item_ids.len();
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(idx, &v)| (idx / n, idx % n, v))
            .collect()
    }

    pub fn n_observed(&self) -> usize {
        self.cells.iter().filter(|&&v| v != 0).count()
    }

    /// Observed (respondent index, response) pairs for one item.
    pub fn item_observations(&self, item: usize) -> Vec<(usize, i8)> {
        (0..self.n_respondents())
            .filter_map(|r| self.get(r, item).map(|y| (r, y)))
            .collect()
    }

    /// Observed (item index, response) pairs for one respondent.
    pub fn respondent_observations(&self, respondent: usize) -> Vec<(usize, i8)> {
        (0..self.n_items())
            .filter_map(|i| self.get(respondent, i).map(|y| (i, y)))
            .collect()
    }

    pub fn index_of_respondent(&self, id: &str) -> Option<usize> {
        self.respondent_ids.iter().position(|r| r == id)
    }

    pub fn index_of_item(&self, id: &str) -> Option<usize> {
        self.item_ids.iter().position(|r| r == id)
    }

    /// Copy with a subset of rows, in the given order.
    pub fn select_respondents(&self, rows: &[usize]) -> ResponseMatrix {
        let n = self.n_items();
        let mut cells = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            cells.extend_from_slice(&self.cells[r * n..(r + 1) * n]);
        }
        ResponseMatrix {
            respondent_ids: rows.iter().map(|&r| self.respondent_ids[r].clone()).collect(),
            item_ids: self.item_ids.clone(),
            cells,
        }
    }

    /// Copy with a subset of columns, in the given order.
    pub fn select_items(&self, cols: &[usize]) -> ResponseMatrix {
        let mut cells = Vec::with_capacity(self.n_respondents() * cols.len());
        for r in 0..self.n_respondents() {
            for &c in cols {
                cells.push(self.cells[r * self.n_items() + c]);
            }
        }
        ResponseMatrix {
            respondent_ids: self.respondent_ids.clone(),
            item_ids: cols.iter().map(|&c| self.item_ids[c].clone()).collect(),
            cells,
        }
    }

    /// Copy without the named respondents.
    pub fn exclude_respondents(&self, ids: &[String]) -> Result<ResponseMatrix> {
        for id in ids {
            if self.index_of_respondent(id).is_none() {
                return Err(GpirtError::UnknownId { id: id.clone() });
            }
        }
        let keep: Vec<usize> = (0..self.n_respondents())
            .filter(|&r| !ids.contains(&self.respondent_ids[r]))
            .collect();
        Ok(self.select_respondents(&keep))
    }
}

/// Recode raw cells into -1/+1 under the declared input coding.
pub fn recode(cells: &[Option<i8>], coding: Coding) -> Result<Vec<Option<i8>>> {
    cells
        .iter()
        .enumerate()
        .map(|(idx, cell)| match (coding, cell) {
            (_, None) => Ok(None),
            (Coding::ZeroOne, Some(0)) => Ok(Some(-1)),
            (Coding::ZeroOne, Some(1)) => Ok(Some(1)),
            (Coding::PlusMinus, Some(-1)) => Ok(Some(-1)),
            (Coding::PlusMinus, Some(1)) => Ok(Some(1)),
            (_, Some(v)) => Err(GpirtError::BadCode {
                row: 0,
                col: idx,
                value: v.to_string(),
            }),
        })
        .collect()
}

/// Canonicalize a response matrix: ids must be unique, every cell must be
/// -1, +1, or missing, and every respondent must have at least one
/// observed response. Idempotent.
pub fn validate_responses(raw: ResponseMatrix) -> Result<ResponseMatrix> {
    check_unique(&raw.respondent_ids)?;
    check_unique(&raw.item_ids)?;
    let n = raw.n_items();
    for (idx, &v) in raw.cells.iter().enumerate() {
        if v != -1 && v != 0 && v != 1 {
            return Err(GpirtError::BadCode {
                row: idx / n,
                col: idx % n,
                value: v.to_string(),
            });
        }
    }
    for r in 0..raw.n_respondents() {
        if (0..n).all(|i| raw.get(r, i).is_none()) {
            return Err(GpirtError::EmptyRespondent {
                id: raw.respondent_ids[r].clone(),
            });
        }
    }
    Ok(raw)
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(GpirtError::DuplicateId { id: id.clone() });
        }
    }
    Ok(())
}

/// Remove items whose minority response class falls below
/// `min_minority_frac` of that item's observed responses. Returns the
/// filtered matrix and the ids of dropped items.
pub fn drop_degenerate_items(
    data: &ResponseMatrix,
    min_minority_frac: f64,
) -> Result<(ResponseMatrix, Vec<String>)> {
    if !(0.0..0.5).contains(&min_minority_frac) {
        return Err(GpirtError::InvalidArgument(format!(
            "minority fraction must lie in [0, 0.5), got {min_minority_frac}"
        )));
    }
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for i in 0..data.n_items() {
        let obs = data.item_observations(i);
        let pos = obs.iter().filter(|(_, y)| *y > 0).count();
        let neg = obs.len() - pos;
        let minority = pos.min(neg) as f64;
        let degenerate = obs.is_empty() || minority / (obs.len() as f64) < min_minority_frac;
        if degenerate {
            dropped.push(data.item_ids()[i].clone());
        } else {
            keep.push(i);
        }
    }
    if keep.is_empty() {
        return Err(GpirtError::DegenerateDataset(
            "all items dropped as degenerate".into(),
        ));
    }
    Ok((data.select_items(&keep), dropped))
}

/// Normal prior over mean-function coefficients; the latent-score prior is
/// fixed to a standard normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperpriors {
    pub beta_mean: Vec<f64>,
    pub beta_var: Vec<f64>,
}

impl Hyperpriors {
    pub fn for_degree(degree: usize) -> Self {
        Hyperpriors {
            beta_mean: vec![0.0; degree + 1],
            beta_var: vec![DEFAULT_BETA_PRIOR_VAR; degree + 1],
        }
    }

    pub fn validate(&self, degree: usize) -> Result<()> {
        if self.beta_mean.len() != degree + 1 || self.beta_var.len() != degree + 1 {
            return Err(GpirtError::Config(format!(
                "beta prior must have {} entries for mean degree {}",
                degree + 1,
                degree
            )));
        }
        if self.beta_var.iter().any(|v| *v <= 0.0 || !v.is_finite()) {
            return Err(GpirtError::Config("beta prior variances must be positive".into()));
        }
        Ok(())
    }
}

/// Sigmoidal link for the observation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Link {
    #[default]
    Logistic,
}

/// Full sampler configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpirtConfig {
    pub grid: ThetaGrid,
    pub mean_degree: usize,
    pub kernel: KernelParams,
    pub beta_prior: Hyperpriors,
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub mh_proposal_sd: f64,
    pub link: Link,
    pub max_jitter: f64,
}

impl Default for GpirtConfig {
    fn default() -> Self {
        GpirtConfig {
            grid: ThetaGrid::default(),
            mean_degree: 0,
            kernel: KernelParams::default(),
            beta_prior: Hyperpriors::for_degree(0),
            n_iterations: 5000,
            burn_in: 2500,
            thin: 1,
            seed: 0,
            mh_proposal_sd: 0.1,
            link: Link::Logistic,
            max_jitter: DEFAULT_MAX_JITTER,
        }
    }
}

impl GpirtConfig {
    pub fn with_mean_degree(mut self, degree: usize) -> Self {
        self.mean_degree = degree;
        self.beta_prior = Hyperpriors::for_degree(degree);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iterations {
            return Err(GpirtError::Config(format!(
                "burn-in {} must be smaller than iteration count {}",
                self.burn_in, self.n_iterations
            )));
        }
        if self.thin == 0 {
            return Err(GpirtError::Config("thinning interval must be >= 1".into()));
        }
        if self.mean_degree > crate::gp::MAX_MEAN_DEGREE {
            return Err(GpirtError::Config(format!(
                "mean degree {} exceeds maximum {}",
                self.mean_degree,
                crate::gp::MAX_MEAN_DEGREE
            )));
        }
        if !(self.mh_proposal_sd >= 0.0 && self.mh_proposal_sd.is_finite()) {
            return Err(GpirtError::Config("proposal sd must be non-negative".into()));
        }
        if self.max_jitter <= 0.0 {
            return Err(GpirtError::Config("max jitter must be positive".into()));
        }
        self.beta_prior.validate(self.mean_degree)?;
        Ok(())
    }

    pub fn n_stored_states(&self) -> usize {
        (self.n_iterations - self.burn_in) / self.thin
    }
}

/// One Gibbs state: per-respondent latent scores (grid-valued), per-item
/// mean coefficients, latent-function values at the observations, and
/// dense latent functions on the shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub thetas: Vec<f64>,
    pub betas: Vec<MeanParams>,
    pub f_obs: Vec<Vec<f64>>,
    pub f_star: Vec<GridFunction>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_matrix() -> ResponseMatrix {
        ResponseMatrix::from_cells(
            vec!["r1".into(), "r2".into()],
            vec!["i1".into(), "i2".into()],
            vec![Some(1), Some(-1), Some(-1), Some(1)],
        )
        .unwrap()
    }

    #[test]
    fn validate_accepts_well_formed() {
        let m = sample_matrix();
        let v = validate_responses(m.clone()).unwrap();
        assert_eq!(v, m);
        // idempotent
        let v2 = validate_responses(v.clone()).unwrap();
        assert_eq!(v2, v);
    }

    #[test]
    fn validate_rejects_empty_respondent() {
        let m = ResponseMatrix::from_cells(
            vec!["r1".into(), "r2".into()],
            vec!["i1".into()],
            vec![Some(1), None],
        )
        .unwrap();
        match validate_responses(m) {
            Err(GpirtError::EmptyRespondent { id }) => assert_eq!(id, "r2"),
            other => panic!("expected empty-respondent error, got {other:?}"),
        }
    }

    #[test]
    fn validate_rejects_bad_code() {
        let m = ResponseMatrix::from_cells(
            vec!["r1".into()],
            vec!["i1".into(), "i2".into()],
            vec![Some(1), Some(2)],
        )
        .unwrap();
        match validate_responses(m) {
            Err(GpirtError::BadCode { row, col, .. }) => {
                assert_eq!((row, col), (0, 1));
            }
            other => panic!("expected bad-code error, got {other:?}"),
        }
    }

    #[test]
    fn validate_rejects_duplicate_ids() {
        let m = ResponseMatrix::from_cells(
            vec!["r1".into(), "r1".into()],
            vec!["i1".into()],
            vec![Some(1), Some(-1)],
        )
        .unwrap();
        assert!(matches!(
            validate_responses(m),
            Err(GpirtError::DuplicateId { .. })
        ));
    }

    #[test]
    fn recode_zero_one() {
        let out = recode(&[Some(0), Some(1), None], Coding::ZeroOne).unwrap();
        assert_eq!(out, vec![Some(-1), Some(1), None]);
    }

    #[test]
    fn recode_plus_minus_identity() {
        let out = recode(&[Some(-1), Some(1)], Coding::PlusMinus).unwrap();
        assert_eq!(out, vec![Some(-1), Some(1)]);
    }

    #[test]
    fn recode_mixed_coding_rejected() {
        let err = recode(&[Some(0), Some(-1)], Coding::ZeroOne).unwrap_err();
        assert!(matches!(err, GpirtError::BadCode { col: 1, .. }));
    }

    fn matrix_with_counts(pos: usize, neg: usize) -> ResponseMatrix {
        let m = pos + neg;
        let mut cells = Vec::new();
        for r in 0..m {
            cells.push(Some(if r < pos { 1 } else { -1 }));
            // second column alternates so it is never degenerate
            cells.push(Some(if r % 2 == 0 { 1 } else { -1 }));
        }
        ResponseMatrix::from_cells(
            (0..m).map(|r| format!("r{r}")).collect(),
            vec!["test".into(), "anchor".into()],
            cells,
        )
        .unwrap()
    }

    #[test]
    fn minority_at_threshold_retained() {
        let data = matrix_with_counts(99, 1);
        let (kept, dropped) = drop_degenerate_items(&data, 0.01).unwrap();
        assert!(dropped.is_empty());
        assert_eq!(kept.n_items(), 2);
    }

    #[test]
    fn unanimous_item_dropped() {
        let data = matrix_with_counts(100, 0);
        let (kept, dropped) = drop_degenerate_items(&data, 0.01).unwrap();
        assert_eq!(dropped, vec!["test".to_string()]);
        assert_eq!(kept.n_items(), 1);
    }

    #[test]
    fn minority_below_threshold_dropped() {
        let data = matrix_with_counts(99, 1);
        let (_, dropped) = drop_degenerate_items(&data, 0.02).unwrap();
        assert_eq!(dropped, vec!["test".to_string()]);
    }

    #[test]
    fn all_items_dropped_is_degenerate() {
        let m = ResponseMatrix::from_cells(
            vec!["r1".into(), "r2".into()],
            vec!["i1".into()],
            vec![Some(1), Some(1)],
        )
        .unwrap();
        assert!(matches!(
            drop_degenerate_items(&m, 0.01),
            Err(GpirtError::DegenerateDataset(_))
        ));
    }

    #[test]
    fn exclude_respondents_by_id() {
        let m = sample_matrix();
        let kept = m.exclude_respondents(&["r1".into()]).unwrap();
        assert_eq!(kept.respondent_ids(), &["r2".to_string()]);
        assert_eq!(kept.get(0, 0), Some(-1));
        assert!(matches!(
            m.exclude_respondents(&["ghost".into()]),
            Err(GpirtError::UnknownId { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = GpirtConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.burn_in = cfg.n_iterations;
        assert!(cfg.validate().is_err());
        cfg.burn_in = 10;
        cfg.thin = 0;
        assert!(cfg.validate().is_err());
    }
}
