//! Flat key-value configuration files mirroring the sampler configuration.

use std::path::Path;

use serde::Deserialize;

use crate::error::{GpirtError, Result};
use crate::gp::{KernelParams, ThetaGrid};
use crate::model::{GpirtConfig, Hyperpriors};

/// Optional overrides read from a TOML file of flat keys.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub grid_lower: Option<f64>,
    pub grid_upper: Option<f64>,
    pub grid_step: Option<f64>,
    pub mean_degree: Option<usize>,
    pub kernel_scale: Option<f64>,
    pub kernel_length_scale: Option<f64>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub mh_proposal_sd: Option<f64>,
    pub beta_prior_mean: Option<Vec<f64>>,
    pub beta_prior_var: Option<Vec<f64>>,
    pub max_jitter: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| GpirtError::Config(format!("{}: {e}", path.display())))
    }

    /// Apply the file's overrides on top of a base configuration.
    pub fn apply(&self, base: &GpirtConfig) -> Result<GpirtConfig> {
        let mut cfg = base.clone();
        if self.grid_lower.is_some() || self.grid_upper.is_some() || self.grid_step.is_some() {
            cfg.grid = ThetaGrid::new(
                self.grid_lower.unwrap_or(base.grid.lower),
                self.grid_upper.unwrap_or(base.grid.upper),
                self.grid_step.unwrap_or(base.grid.step),
            )?;
        }
        if let Some(d) = self.mean_degree {
            cfg.mean_degree = d;
            cfg.beta_prior = Hyperpriors::for_degree(d);
        }
        if self.kernel_scale.is_some() || self.kernel_length_scale.is_some() {
            cfg.kernel = KernelParams::new(
                self.kernel_scale.unwrap_or(base.kernel.scale_factor),
                self.kernel_length_scale.unwrap_or(base.kernel.length_scale),
            )?;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.iterations {
            cfg.n_iterations = v;
        }
        if let Some(v) = self.burn_in {
            cfg.burn_in = v;
        }
        if let Some(v) = self.thin {
            cfg.thin = v;
        }
        if let Some(v) = self.mh_proposal_sd {
            cfg.mh_proposal_sd = v;
        }
        if let Some(v) = &self.beta_prior_mean {
            cfg.beta_prior.beta_mean = v.clone();
        }
        if let Some(v) = &self.beta_prior_var {
            cfg.beta_prior.beta_var = v.clone();
        }
        if let Some(v) = self.max_jitter {
            cfg.max_jitter = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use tempfile::NamedTempFile;

    #[test]
    fn parse_and_apply() {
        let mut f = NamedTempFile::new().unwrap();
        writeln!(
            f,
            "seed = 99\niterations = 40\nburn_in = 10\nmean_degree = 2\ngrid_step = 0.5"
        )
        .unwrap();
        let fc = FileConfig::load(f.path()).unwrap();
        let cfg = fc.apply(&GpirtConfig::default()).unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.n_iterations, 40);
        assert_eq!(cfg.mean_degree, 2);
        assert_eq!(cfg.beta_prior.beta_mean.len(), 3);
        assert_eq!(cfg.grid.len(), 21);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut f = NamedTempFile::new().unwrap();
        writeln!(f, "sneed = 1").unwrap();
        assert!(matches!(
            FileConfig::load(f.path()),
            Err(GpirtError::Config(_))
        ));
    }

    #[test]
    fn invalid_combination_rejected() {
        let mut f = NamedTempFile::new().unwrap();
        writeln!(f, "iterations = 5\nburn_in = 9").unwrap();
        let fc = FileConfig::load(f.path()).unwrap();
        assert!(fc.apply(&GpirtConfig::default()).is_err());
    }
}
