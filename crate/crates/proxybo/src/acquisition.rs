//! Expected improvement for minimization.
//!
//! Given a Gaussian predictive distribution `N(mean, variance)` and the best
//! (lowest) objective seen so far, expected improvement is
//! `E[max(y_best − Y, 0)]`. It has the usual closed form
//! `σ · (z·Φ(z) + φ(z))` with `z = (y_best − mean) / σ`, and degrades
//! gracefully to `max(y_best − mean, 0)` when the predictive variance is
//! exactly zero.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Closed-form expected improvement of a Gaussian belief over a minimized
/// objective.
///
/// Inputs must be finite and the variance non-negative. The result is always
/// non-negative and finite.
pub fn expected_improvement(mean: f64, variance: f64, y_best: f64) -> Result<f64> {
    if !mean.is_finite() || !y_best.is_finite() {
        return Err(Error::InvalidValue(format!(
            "expected improvement needs finite inputs (mean {mean}, best {y_best})"
        )));
    }
    if !variance.is_finite() || variance < 0.0 {
        return Err(Error::InvalidValue(format!(
            "expected improvement needs a finite non-negative variance, got {variance}"
        )));
    }
    let sigma = variance.sqrt();
    if sigma == 0.0 {
        return Ok((y_best - mean).max(0.0));
    }
    let z = (y_best - mean) / sigma;
    let normal = Normal::new(0.0, 1.0).expect("unit normal is valid");
    let ei = sigma * (z * normal.cdf(z) + normal.pdf(z));
    // The closed form is mathematically non-negative; clamp away any
    // floating-point residue below zero.
    Ok(ei.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Standard normal density written out longhand, so the oracle below
    /// shares nothing with the implementation under test.
    fn gauss_pdf(y: f64, mean: f64, sigma: f64) -> f64 {
        let z = (y - mean) / sigma;
        (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    }

    fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let m = 0.5 * (a + b);
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }

    fn adaptive_simpson(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        adaptive_simpson(f, a, m, left, 0.5 * tol, depth - 1)
            + adaptive_simpson(f, m, b, right, 0.5 * tol, depth - 1)
    }

    /// Numerical `E[max(y_best − Y, 0)]` for `Y ~ N(mean, sigma²)`.
    ///
    /// The interval is cut into σ-wide panels centred on the mean before the
    /// adaptive pass, so a narrow Gaussian bump deep inside a long interval
    /// cannot slip between the splitter's sample points.
    fn ei_by_quadrature(mean: f64, sigma: f64, y_best: f64) -> f64 {
        let integrand = |y: f64| (y_best - y) * gauss_pdf(y, mean, sigma);
        // The integrand vanishes above y_best and decays like the Gaussian
        // tail away from the mean; 40σ of headroom makes the truncation
        // error negligible.
        let hi = y_best.min(mean + 40.0 * sigma);
        let lo = (mean - 40.0 * sigma).min(hi - sigma);
        if hi <= lo {
            return 0.0;
        }
        let mut cuts = vec![lo];
        let first = ((lo - mean) / sigma).ceil() as i64;
        let last = ((hi - mean) / sigma).floor() as i64;
        for k in first..=last {
            let c = mean + k as f64 * sigma;
            if c > lo && c < hi {
                cuts.push(c);
            }
        }
        cuts.push(hi);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let whole = simpson(&integrand, w[0], w[1]);
            total += adaptive_simpson(&integrand, w[0], w[1], whole, 1e-14, 40);
        }
        total
    }

    #[test]
    fn value_at_the_incumbent_with_unit_variance() {
        // mean == y_best, σ = 1 ⇒ EI = φ(0) = 1/√(2π).
        let ei = expected_improvement(0.0, 1.0, 0.0).unwrap();
        let expected = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((ei - expected).abs() < 1e-15, "{ei} vs {expected}");
        assert!((ei - 0.3989422804014327).abs() < 1e-12);
    }

    #[test]
    fn matches_quadrature_across_a_grid() {
        let means = [-3.0, -0.7, 0.0, 0.4, 1.0, 2.5];
        let sigmas = [0.05, 0.3, 1.0, 2.0];
        let bests = [-1.5, 0.0, 0.8, 3.0];
        for &mean in &means {
            for &sigma in &sigmas {
                for &best in &bests {
                    let closed = expected_improvement(mean, sigma * sigma, best).unwrap();
                    let numeric = ei_by_quadrature(mean, sigma, best);
                    assert!(
                        (closed - numeric).abs() < 1e-9,
                        "mean {mean}, sigma {sigma}, best {best}: {closed} vs {numeric}"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_variance_reduces_to_plain_improvement() {
        assert_eq!(expected_improvement(0.3, 0.0, 1.0).unwrap(), 0.7);
        assert_eq!(expected_improvement(1.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(expected_improvement(2.0, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn monotone_in_mean_and_variance() {
        // Worse (higher) predicted mean can only lower EI.
        let mut last = f64::INFINITY;
        for i in 0..40 {
            let mean = -2.0 + i as f64 * 0.1;
            let ei = expected_improvement(mean, 0.5, 0.0).unwrap();
            assert!(ei <= last + 1e-15, "EI must fall as the mean rises");
            last = ei;
        }
        // Above the incumbent, more uncertainty can only help.
        let mut last = 0.0;
        for i in 1..40 {
            let var = i as f64 * 0.1;
            let ei = expected_improvement(1.0, var, 0.0).unwrap();
            assert!(ei >= last, "EI must grow with variance above the incumbent");
            last = ei;
        }
    }

    #[test]
    fn far_hopeless_points_score_nearly_zero_but_never_negative() {
        let ei = expected_improvement(50.0, 1.0, 0.0).unwrap();
        assert!(ei >= 0.0);
        assert!(ei < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(expected_improvement(f64::NAN, 1.0, 0.0).is_err());
        assert!(expected_improvement(0.0, f64::NAN, 0.0).is_err());
        assert!(expected_improvement(0.0, -1.0, 0.0).is_err());
        assert!(expected_improvement(0.0, 1.0, f64::INFINITY).is_err());
    }
}
