//! Small numeric helpers shared across modules.

pub(crate) const LN_2PI: f64 = 1.8378770664093453;

/// Logistic sigmoid, stable for large |x|.
#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(sigmoid(x)) = -log(1 + exp(-x)), stable for large |x|.
#[inline]
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Standard normal log density.
#[inline]
pub(crate) fn std_normal_logpdf(x: f64) -> f64 {
    -0.5 * LN_2PI - 0.5 * x * x
}

/// Normal log density with mean and variance.
#[inline]
pub(crate) fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let z = x - mean;
    -0.5 * (LN_2PI + var.ln() + z * z / var)
}

/// Numerically stable log(sum(exp(xs))).
#[inline]
pub(crate) fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sigmoid_basics() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_abs_diff_eq!(sigmoid(10.0) + sigmoid(-10.0), 1.0, epsilon = 1e-15);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn log_sigmoid_matches_direct() {
        for &x in &[-3.0, -0.5, 0.0, 0.5, 3.0] {
            assert_abs_diff_eq!(log_sigmoid(x), sigmoid(x).ln(), epsilon = 1e-12);
        }
        // no overflow in the tails
        assert!(log_sigmoid(-750.0).is_finite());
        assert_abs_diff_eq!(log_sigmoid(750.0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn logsumexp_shifts() {
        assert_abs_diff_eq!(
            logsumexp(&[1000.0, 1000.0]),
            1000.0 + 2.0f64.ln(),
            epsilon = 1e-12
        );
        assert_eq!(logsumexp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }
}
