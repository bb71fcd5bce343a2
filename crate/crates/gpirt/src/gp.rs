//! Kernel, mean-function, and Gaussian conditioning primitives shared by
//! the sampler and the synthetic generator.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GpirtError, Result};

/// Default cap for the Cholesky jitter ladder.
pub const DEFAULT_MAX_JITTER: f64 = 1e-4;

/// Squared-exponential kernel parameters: scale factor and length scale,
/// both strictly positive. Defaults are 1 and 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub scale_factor: f64,
    pub length_scale: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            scale_factor: 1.0,
            length_scale: 1.0,
        }
    }
}

impl KernelParams {
    pub fn new(scale_factor: f64, length_scale: f64) -> Result<Self> {
        if !(scale_factor > 0.0 && scale_factor.is_finite()) {
            return Err(GpirtError::InvalidArgument(format!(
                "kernel scale factor must be positive and finite, got {scale_factor}"
            )));
        }
        if !(length_scale > 0.0 && length_scale.is_finite()) {
            return Err(GpirtError::InvalidArgument(format!(
                "kernel length scale must be positive and finite, got {length_scale}"
            )));
        }
        Ok(KernelParams {
            scale_factor,
            length_scale,
        })
    }

    /// Kernel value at a given input distance.
    #[inline]
    pub fn at_distance(&self, d: f64) -> f64 {
        let s = d / self.length_scale;
        self.scale_factor * self.scale_factor * (-0.5 * s * s).exp()
    }
}

/// Polynomial mean-function coefficients, lowest degree first.
/// Degree is capped at 2: constant, linear, and quadratic means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanParams {
    coefficients: Vec<f64>,
}

pub const MAX_MEAN_DEGREE: usize = 2;

impl MeanParams {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() || coefficients.len() > MAX_MEAN_DEGREE + 1 {
            return Err(GpirtError::InvalidArgument(format!(
                "mean function must have 1 to {} coefficients, got {}",
                MAX_MEAN_DEGREE + 1,
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(GpirtError::InvalidArgument(
                "mean coefficients must be finite".into(),
            ));
        }
        Ok(MeanParams { coefficients })
    }

    /// Zero mean of the given degree.
    pub fn zero(degree: usize) -> Result<Self> {
        MeanParams::new(vec![0.0; degree + 1])
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    #[inline]
    pub fn eval(&self, theta: f64) -> f64 {
        // Horner evaluation, highest degree first.
        let mut acc = 0.0;
        for &c in self.coefficients.iter().rev() {
            acc = acc * theta + c;
        }
        acc
    }

    /// Negate odd-degree coefficients; the mean of the mirrored function
    /// theta -> eval(-theta).
    pub fn mirrored(&self) -> MeanParams {
        let coefficients = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(d, &c)| if d % 2 == 1 { -c } else { c })
            .collect();
        MeanParams { coefficients }
    }
}

/// Dense evaluation grid over the latent scale: evenly spaced points from
/// `lower` to `upper` in steps of `step`. Default spans -5 to 5 in
/// increments of 0.01.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaGrid {
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
    points: Vec<f64>,
}

impl Default for ThetaGrid {
    fn default() -> Self {
        ThetaGrid::new(-5.0, 5.0, 0.01).expect("default grid is valid")
    }
}

impl ThetaGrid {
    pub fn new(lower: f64, upper: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(GpirtError::InvalidArgument(format!(
                "grid step must be positive, got {step}"
            )));
        }
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(GpirtError::InvalidArgument(format!(
                "grid bounds must be finite with lower < upper, got [{lower}, {upper}]"
            )));
        }
        let span = (upper - lower) / step;
        let n_steps = span.round();
        if (span - n_steps).abs() > 1e-8 * span.max(1.0) {
            return Err(GpirtError::InvalidArgument(format!(
                "grid span {span} is not an integer number of steps"
            )));
        }
        let n = n_steps as usize + 1;
        let points = (0..n).map(|i| lower + i as f64 * step).collect();
        Ok(ThetaGrid {
            lower,
            upper,
            step,
            points,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the grid point nearest to `theta`, clamped to the range.
    pub fn nearest_index(&self, theta: f64) -> usize {
        let raw = ((theta - self.lower) / self.step).round();
        if raw <= 0.0 {
            0
        } else {
            (raw as usize).min(self.points.len() - 1)
        }
    }

    /// Index of `point[index]` mirrored across the grid midpoint.
    pub fn mirror_index(&self, index: usize) -> usize {
        self.points.len() - 1 - index
    }

    /// True when the grid is symmetric about zero, so that mirroring
    /// indices realizes theta -> -theta.
    pub fn is_symmetric(&self) -> bool {
        (self.lower + self.upper).abs() <= 1e-9 * self.upper.abs().max(1.0)
    }
}

/// Latent-function values on a shared grid, one per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<ThetaGrid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<ThetaGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(GpirtError::GridMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn grid(&self) -> &Arc<ThetaGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value reversed along the grid: the function theta -> f(-theta) on a
    /// symmetric grid.
    pub fn mirrored(&self) -> GridFunction {
        let mut values = self.values.clone();
        values.reverse();
        GridFunction {
            grid: Arc::clone(&self.grid),
            values,
        }
    }

    /// Linear interpolation between adjacent grid points.
    pub fn interpolate(&self, theta: f64) -> Result<f64> {
        interpolate_on_grid(&self.grid, &self.values, theta)
    }
}

pub(crate) fn interpolate_on_grid(grid: &ThetaGrid, values: &[f64], theta: f64) -> Result<f64> {
    if theta < grid.lower || theta > grid.upper {
        return Err(GpirtError::ThetaOutOfRange {
            theta,
            lower: grid.lower,
            upper: grid.upper,
        });
    }
    let pts = grid.points();
    let cell = (((theta - grid.lower) / grid.step).floor() as usize).min(pts.len() - 2);
    let t = (theta - pts[cell]) / grid.step;
    Ok(values[cell] * (1.0 - t) + values[cell + 1] * t)
}

/// Squared-exponential covariance between two sets of latent scores:
/// entry (p, q) = scale^2 * exp(-(a_p - b_q)^2 / (2 * length^2)).
pub fn sq_exp_cov(a: &[f64], b: &[f64], params: &KernelParams) -> Result<DMatrix<f64>> {
    if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
        return Err(GpirtError::InvalidArgument(
            "kernel inputs must be finite".into(),
        ));
    }
    let mut out = DMatrix::zeros(a.len(), b.len());
    for (p, &ap) in a.iter().enumerate() {
        for (q, &bq) in b.iter().enumerate() {
            out[(p, q)] = params.at_distance(ap - bq);
        }
    }
    Ok(out)
}

/// Elementwise polynomial mean over a set of latent scores.
pub fn poly_mean(thetas: &[f64], params: &MeanParams) -> Vec<f64> {
    thetas.iter().map(|&t| params.eval(t)).collect()
}

/// Lower Cholesky factor with diagonal jitter escalation.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l: DMatrix<f64>,
    jitter: f64,
}

impl CholeskyFactor {
    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solve (L L^T) x = b.
    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.l.solve_lower_triangular_mut(&mut x);
        self.l.tr_solve_lower_triangular_mut(&mut x);
        x
    }

    /// Solve (L L^T) X = B column by column.
    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        self.l.solve_lower_triangular_mut(&mut x);
        self.l.tr_solve_lower_triangular_mut(&mut x);
        x
    }

    /// log det(L L^T) = 2 * sum(log diag(L)).
    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Quadratic form b^T (L L^T)^{-1} b via one triangular solve.
    pub fn inv_quad(&self, b: &DVector<f64>) -> f64 {
        let mut y = b.clone();
        self.l.solve_lower_triangular_mut(&mut y);
        y.norm_squared()
    }
}

/// Cholesky factorization of a symmetric PSD matrix, retrying along a
/// geometric jitter ladder {0, 1e-10, 1e-9, ..., max_jitter}.
pub fn chol_psd(cov: &DMatrix<f64>, max_jitter: f64, context: &str) -> Result<CholeskyFactor> {
    assert!(max_jitter > 0.0, "max_jitter must be positive");
    let n = cov.nrows();
    assert_eq!(n, cov.ncols(), "covariance must be square");

    let mut rungs = vec![0.0];
    let mut j = 1e-10;
    while j < max_jitter * (1.0 + 1e-12) {
        rungs.push(j);
        j *= 10.0;
    }
    if *rungs.last().unwrap() < max_jitter {
        rungs.push(max_jitter);
    }

    for jitter in rungs {
        let mut work = cov.clone();
        for d in 0..n {
            work[(d, d)] += jitter;
        }
        if let Some(ch) = Cholesky::new(work) {
            return Ok(CholeskyFactor {
                l: ch.unpack(),
                jitter,
            });
        }
    }
    Err(GpirtError::NotPositiveDefinite {
        context: context.to_string(),
        max_jitter,
    })
}

/// Draw mean + L z with z standard normal. Any lower factor is accepted;
/// a zero factor returns the mean exactly. Consumes exactly `dim` draws.
pub fn mvn_sample<R: Rng + ?Sized>(mean: &[f64], chol_l: &DMatrix<f64>, rng: &mut R) -> Vec<f64> {
    let n = mean.len();
    assert_eq!(chol_l.nrows(), n, "factor dimension mismatch");
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut out = mean.to_vec();
    for row in 0..n {
        let mut acc = 0.0;
        for col in 0..=row {
            acc += chol_l[(row, col)] * z[col];
        }
        out[row] += acc;
    }
    out
}

/// Gaussian-process conditioning of function values at `theta_star` on
/// observations (theta_obs, f_obs):
///
///   m* = mu(theta_star) + K(star, obs) K(obs, obs)^{-1} (f_obs - mu(theta_obs))
///   C* = K(star, star) - K(star, obs) K(obs, obs)^{-1} K(obs, star)
///
/// The inverse is realized through jittered Cholesky solves, and C* is
/// symmetrized before being returned. Empty observations recover the prior.
pub fn gp_condition(
    theta_obs: &[f64],
    f_obs: &[f64],
    theta_star: &[f64],
    mean: &MeanParams,
    kernel: &KernelParams,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if theta_obs.len() != f_obs.len() {
        return Err(GpirtError::InvalidArgument(format!(
            "observation lengths differ: {} thetas vs {} values",
            theta_obs.len(),
            f_obs.len()
        )));
    }
    let mu_star = DVector::from_vec(poly_mean(theta_star, mean));
    let k_ss = sq_exp_cov(theta_star, theta_star, kernel)?;

    if theta_obs.is_empty() {
        let c = symmetrized(k_ss);
        return Ok((mu_star, c));
    }

    let k_oo = sq_exp_cov(theta_obs, theta_obs, kernel)?;
    let factor = chol_psd(&k_oo, DEFAULT_MAX_JITTER, "gp_condition observations")?;
    let k_so = sq_exp_cov(theta_star, theta_obs, kernel)?;

    let residual = DVector::from_iterator(
        theta_obs.len(),
        theta_obs
            .iter()
            .zip(f_obs)
            .map(|(&t, &f)| f - mean.eval(t)),
    );
    let alpha = factor.solve_vec(&residual);
    let m_star = mu_star + &k_so * alpha;

    let v = factor.solve_mat(&k_so.transpose());
    let c_star = symmetrized(k_ss - &k_so * v);
    Ok((m_star, c_star))
}

fn symmetrized(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sq_exp_zero_distance_is_unit() {
        let k = sq_exp_cov(&[0.0], &[0.0], &KernelParams::default()).unwrap();
        assert_eq!(k[(0, 0)], 1.0);
    }

    #[test]
    fn sq_exp_direct_evaluation() {
        let k = sq_exp_cov(&[0.0], &[1.0], &KernelParams::default()).unwrap();
        assert_abs_diff_eq!(k[(0, 0)], (-0.5f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn sq_exp_symmetric() {
        let k = sq_exp_cov(&[0.0, 2.0], &[0.0, 2.0], &KernelParams::default()).unwrap();
        assert_eq!(k[(0, 0)], 1.0);
        assert_eq!(k[(1, 1)], 1.0);
        assert_abs_diff_eq!(k[(0, 1)], (-2.0f64).exp(), epsilon = 1e-15);
        assert_eq!(k[(0, 1)], k[(1, 0)]);
    }

    #[test]
    fn sq_exp_rejects_non_finite() {
        let err = sq_exp_cov(&[f64::NAN], &[0.0], &KernelParams::default()).unwrap_err();
        assert!(matches!(err, GpirtError::InvalidArgument(_)));
    }

    #[test]
    fn poly_mean_zero() {
        let m = MeanParams::new(vec![0.0]).unwrap();
        assert_eq!(poly_mean(&[-1.0, 0.0, 1.0], &m), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn poly_mean_linear_and_quadratic() {
        let linear = MeanParams::new(vec![1.0, 3.0]).unwrap();
        assert_eq!(poly_mean(&[2.0], &linear), vec![7.0]);
        let quad = MeanParams::new(vec![0.0, 0.0, 2.0]).unwrap();
        assert_eq!(poly_mean(&[-1.0], &quad), vec![2.0]);
    }

    #[test]
    fn chol_identity_no_jitter() {
        let eye = DMatrix::identity(3, 3);
        let f = chol_psd(&eye, DEFAULT_MAX_JITTER, "identity").unwrap();
        assert_eq!(f.jitter(), 0.0);
        assert_abs_diff_eq!((f.l() * f.l().transpose() - eye).abs().max(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn chol_rank_one_succeeds_with_small_jitter() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = chol_psd(&cov, DEFAULT_MAX_JITTER, "rank one").unwrap();
        assert!(f.jitter() <= 1e-8, "jitter was {}", f.jitter());
        let recon = f.l() * f.l().transpose();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(recon[(i, j)], cov[(i, j)], epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn chol_indefinite_fails() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = chol_psd(&cov, 1e-6, "indefinite").unwrap_err();
        assert!(matches!(err, GpirtError::NotPositiveDefinite { .. }));
    }

    #[test]
    fn mvn_zero_factor_returns_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let l = DMatrix::zeros(3, 3);
        let out = mvn_sample(&[1.0, -2.0, 0.5], &l, &mut rng);
        assert_eq!(out, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn mvn_moments_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let l = DMatrix::identity(1, 1);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| mvn_sample(&[0.0], &l, &mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "sample mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "sample variance {var}");
    }

    #[test]
    fn mvn_fixed_seed_reproducible() {
        let l = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.8]);
        let a = mvn_sample(&[0.0, 0.0], &l, &mut ChaCha8Rng::seed_from_u64(9));
        let b = mvn_sample(&[0.0, 0.0], &l, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn gp_condition_empty_recovers_prior() {
        let zero = MeanParams::new(vec![0.0]).unwrap();
        let (m, c) = gp_condition(&[], &[], &[0.0], &zero, &KernelParams::default()).unwrap();
        assert_eq!(m[0], 0.0);
        assert_eq!(c[(0, 0)], 1.0);
    }

    #[test]
    fn gp_condition_interpolates_observation() {
        let zero = MeanParams::new(vec![0.0]).unwrap();
        let (m, c) =
            gp_condition(&[0.0], &[1.0], &[0.0], &zero, &KernelParams::default()).unwrap();
        assert_abs_diff_eq!(m[0], 1.0, epsilon = 1e-6);
        assert!(c[(0, 0)].abs() < 1e-6);
    }

    #[test]
    fn gp_condition_scalar_hand_case() {
        let zero = MeanParams::new(vec![0.0]).unwrap();
        let (m, c) =
            gp_condition(&[0.0], &[1.0], &[1.0], &zero, &KernelParams::default()).unwrap();
        assert_abs_diff_eq!(m[0], (-0.5f64).exp(), epsilon = 1e-8);
        assert_abs_diff_eq!(c[(0, 0)], 1.0 - (-1.0f64).exp(), epsilon = 1e-8);
    }

    #[test]
    fn grid_default_shape() {
        let g = ThetaGrid::default();
        assert_eq!(g.len(), 1001);
        assert_eq!(g.points()[0], -5.0);
        assert_abs_diff_eq!(g.points()[1000], 5.0, epsilon = 1e-12);
        assert!(g.is_symmetric());
    }

    #[test]
    fn grid_nearest_index_clamps() {
        let g = ThetaGrid::default();
        assert_eq!(g.nearest_index(-7.0), 0);
        assert_eq!(g.nearest_index(7.0), 1000);
        assert_eq!(g.nearest_index(0.004), 500);
        assert_eq!(g.nearest_index(0.006), 501);
    }

    #[test]
    fn interpolation_midpoint() {
        let grid = Arc::new(ThetaGrid::new(0.0, 1.0, 0.5).unwrap());
        let f = GridFunction::new(grid, vec![0.4, 0.6, 1.0]).unwrap();
        assert_abs_diff_eq!(f.interpolate(0.25).unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(f.interpolate(0.5).unwrap(), 0.6);
        assert!(f.interpolate(1.01).is_err());
    }
}
