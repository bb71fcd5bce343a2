#![allow(dead_code)] // each test binary uses a different subset

//! Shared oracles for the test suites. Everything here is deliberately
//! independent of the implementation paths it checks: conditioning goes
//! through a plain matrix inverse, AUC through the all-pairs definition,
//! and distribution checks through explicit empirical CDFs.

use nalgebra::{DMatrix, DVector};

/// Brute-force Gaussian conditioning through the partitioned joint
/// covariance and a plain (LU) matrix inverse.
pub fn brute_force_condition(
    theta_obs: &[f64],
    f_obs: &[f64],
    theta_star: &[f64],
    mean_coeffs: &[f64],
    scale: f64,
    length: f64,
) -> (DVector<f64>, DMatrix<f64>) {
    let kernel = |a: f64, b: f64| -> f64 {
        let d = (a - b) / length;
        scale * scale * (-0.5 * d * d).exp()
    };
    let mu = |t: f64| -> f64 {
        mean_coeffs
            .iter()
            .enumerate()
            .map(|(d, &c)| c * t.powi(d as i32))
            .sum()
    };
    let n_obs = theta_obs.len();
    let n_star = theta_star.len();

    let mut k_oo = DMatrix::zeros(n_obs, n_obs);
    for i in 0..n_obs {
        for j in 0..n_obs {
            k_oo[(i, j)] = kernel(theta_obs[i], theta_obs[j]);
        }
    }
    let mut k_so = DMatrix::zeros(n_star, n_obs);
    for i in 0..n_star {
        for j in 0..n_obs {
            k_so[(i, j)] = kernel(theta_star[i], theta_obs[j]);
        }
    }
    let mut k_ss = DMatrix::zeros(n_star, n_star);
    for i in 0..n_star {
        for j in 0..n_star {
            k_ss[(i, j)] = kernel(theta_star[i], theta_star[j]);
        }
    }
    let mu_star = DVector::from_iterator(n_star, theta_star.iter().map(|&t| mu(t)));
    if n_obs == 0 {
        return (mu_star, k_ss);
    }
    let inv = k_oo.try_inverse().expect("oracle inverse");
    let residual = DVector::from_iterator(
        n_obs,
        theta_obs.iter().zip(f_obs).map(|(&t, &f)| f - mu(t)),
    );
    let m = mu_star + &k_so * &inv * residual;
    let c = k_ss - &k_so * inv * k_so.transpose();
    (m, c)
}

/// All-pairs AUC: fraction of positive-negative pairs ranked correctly,
/// ties counted one-half.
pub fn pairwise_auc(scores: &[f64], labels: &[i8]) -> f64 {
    let mut wins = 0.0f64;
    let mut pairs = 0.0f64;
    for (i, (&sp, &lp)) in scores.iter().zip(labels).enumerate() {
        if lp <= 0 {
            continue;
        }
        for (j, (&sn, &ln)) in scores.iter().zip(labels).enumerate() {
            if i == j || ln > 0 {
                continue;
            }
            pairs += 1.0;
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Two-sided Kolmogorov-Smirnov statistic of samples against a target CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let target = cdf(x);
        let upper = (i + 1) as f64 / n - target;
        let lower = target - i as f64 / n;
        d = d.max(upper).max(lower);
    }
    d
}

/// Asymptotic two-sided KS critical value at significance `alpha`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Standard normal CDF (statrs; independent of the sampler code paths
/// under test here).
pub fn std_normal_cdf(x: f64) -> f64 {
    use statrs::distribution::ContinuousCDF;
    statrs::distribution::Normal::standard().cdf(x)
}

#[cfg(test)]
mod sanity {
    use super::*;

    #[test]
    fn normal_cdf_reference_values() {
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((std_normal_cdf(1.0) - 0.8413447460685429).abs() < 1e-9);
        assert!((std_normal_cdf(-1.96) - 0.024997895148220435).abs() < 1e-9);
        assert!((std_normal_cdf(3.0) - 0.9986501019683699).abs() < 1e-9);
    }
}
