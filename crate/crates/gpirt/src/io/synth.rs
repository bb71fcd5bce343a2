//! Synthetic response generation with retained ground truth.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{GpirtError, Result};
use crate::gp::{chol_psd, mvn_sample, sq_exp_cov, GridFunction, KernelParams, ThetaGrid};
use crate::model::{validate_responses, ResponseMatrix};
use crate::num::sigmoid;
use crate::rng::{substream, StreamPhase};
use crate::scoring::IRFTable;

/// Latent-function family of one synthetic item.
#[derive(Debug, Clone, PartialEq)]
pub enum ItemFamily {
    Linear { b0: f64, b1: f64 },
    Quadratic { b0: f64, b1: f64, b2: f64 },
    GpDraw,
}

/// Latent-score population for synthetic respondents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThetaSource {
    #[default]
    StandardNormal,
}

/// Specification of one synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_respondents: usize,
    pub items: Vec<ItemFamily>,
    pub seed: u64,
    pub theta_source: ThetaSource,
    pub grid: ThetaGrid,
    pub kernel: KernelParams,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_respondents == 0 || self.items.is_empty() {
            return Err(GpirtError::InvalidArgument(
                "synthetic data needs at least one respondent and one item".into(),
            ));
        }
        for item in &self.items {
            let finite = match item {
                ItemFamily::Linear { b0, b1 } => b0.is_finite() && b1.is_finite(),
                ItemFamily::Quadratic { b0, b1, b2 } => {
                    b0.is_finite() && b1.is_finite() && b2.is_finite()
                }
                ItemFamily::GpDraw => true,
            };
            if !finite {
                return Err(GpirtError::InvalidArgument(
                    "item coefficients must be finite".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Ground truth kept alongside a synthetic dataset: the real latent
/// scores, the dense latent functions, and the response-probability table.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTruth {
    pub thetas: Vec<f64>,
    pub latent_functions: Vec<GridFunction>,
    pub irfs: IRFTable,
}

/// Generate responses: scores from a standard normal, latent functions per
/// family (process draws are sampled on the grid and interpolated), and
/// each response positive with probability sigmoid(f_i(theta_j)).
pub fn synth_generate(spec: &SynthSpec) -> Result<(ResponseMatrix, SynthTruth)> {
    spec.validate()?;
    let m = spec.n_respondents;
    let n_items = spec.items.len();
    let grid = Arc::new(spec.grid.clone());

    let mut rng = substream(spec.seed, StreamPhase::Synth, 0, 0);

    let thetas: Vec<f64> = match spec.theta_source {
        ThetaSource::StandardNormal => (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
    };

    // one shared grid factor for all process-drawn items
    let needs_gp = spec.items.iter().any(|f| matches!(f, ItemFamily::GpDraw));
    let grid_factor = if needs_gp {
        let k = sq_exp_cov(grid.points(), grid.points(), &spec.kernel)?;
        Some(chol_psd(&k, crate::gp::DEFAULT_MAX_JITTER, "synthetic grid kernel")?)
    } else {
        None
    };

    let zeros = vec![0.0; grid.len()];
    let mut latent_functions = Vec::with_capacity(n_items);
    for family in &spec.items {
        let values: Vec<f64> = match family {
            ItemFamily::Linear { b0, b1 } => {
                grid.points().iter().map(|&t| b0 + b1 * t).collect()
            }
            ItemFamily::Quadratic { b0, b1, b2 } => grid
                .points()
                .iter()
                .map(|&t| b0 + b1 * t + b2 * t * t)
                .collect(),
            ItemFamily::GpDraw => {
                mvn_sample(&zeros, grid_factor.as_ref().unwrap().l(), &mut rng)
            }
        };
        latent_functions.push(GridFunction::new(Arc::clone(&grid), values)?);
    }

    let mut cells: Vec<Option<i8>> = Vec::with_capacity(m * n_items);
    for &theta in &thetas {
        let clamped = theta.clamp(grid.lower, grid.upper);
        for f in &latent_functions {
            let p = sigmoid(f.interpolate(clamped)?);
            let y = if rng.random::<f64>() < p { 1 } else { -1 };
            cells.push(Some(y));
        }
    }

    let item_ids: Vec<String> = (0..n_items).map(|i| format!("item{i:03}")).collect();
    let respondent_ids: Vec<String> = (0..m).map(|j| format!("resp{j:04}")).collect();
    let data = validate_responses(ResponseMatrix::from_cells(
        respondent_ids,
        item_ids.clone(),
        cells,
    )?)?;

    let probs: Vec<Vec<f64>> = latent_functions
        .iter()
        .map(|f| {
            f.values()
                .iter()
                .map(|&v| sigmoid(v).clamp(1e-12, 1.0 - 1e-12))
                .collect()
        })
        .collect();
    let truth = SynthTruth {
        thetas,
        latent_functions,
        irfs: IRFTable::new(Arc::clone(&grid), item_ids, probs)?,
    };
    Ok((data, truth))
}

/// Write true latent scores as a two-column CSV.
pub fn write_truth_theta_csv(
    respondent_ids: &[String],
    thetas: &[f64],
    path: &std::path::Path,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| GpirtError::Format(e.to_string()))?;
    w.write_record(["respondent", "theta"])
        .map_err(|e| GpirtError::Format(e.to_string()))?;
    for (id, t) in respondent_ids.iter().zip(thetas) {
        w.write_record([id.as_str(), &format!("{t}")])
            .map_err(|e| GpirtError::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a truth-theta CSV back as (ids, values).
pub fn read_truth_theta_csv(path: &std::path::Path) -> Result<(Vec<String>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| GpirtError::Format(e.to_string()))?;
    let mut ids = Vec::new();
    let mut thetas = Vec::new();
    for (row, record) in r.records().enumerate() {
        let record = record.map_err(|e| GpirtError::Parse {
            line: row + 2,
            message: e.to_string(),
        })?;
        ids.push(record[0].to_string());
        thetas.push(record[1].parse().map_err(|_| GpirtError::Parse {
            line: row + 2,
            message: format!("'{}' is not a number", &record[1]),
        })?);
    }
    Ok((ids, thetas))
}
