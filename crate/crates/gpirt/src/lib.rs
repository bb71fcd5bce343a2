//! Gaussian-process item response theory.
//!
//! Joint Bayesian inference over respondents' latent scores and
//! nonparametric item response functions via Gibbs sampling, with
//! mutual-information adaptive testing and parametric / kernel-smoothed
//! baselines for comparison.

pub mod adaptive;
pub mod baselines;
pub mod cli;
pub mod error;
pub mod gp;
pub mod io;
pub mod model;
mod num;
pub mod rng;
pub mod sampler;
pub mod scoring;

pub use error::{GpirtError, Result};
