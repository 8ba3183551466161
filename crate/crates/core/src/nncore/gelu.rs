use crate::error::{FadError, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard Gaussian CDF evaluated through `erfc` (accurate in both tails).
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `x * Phi(x)` using the error function, not the tanh approximation.
pub fn gelu(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(FadError::Domain(format!("gelu of non-finite value {x}")));
    }
    Ok(gelu_unchecked(x))
}

#[inline]
pub(crate) fn gelu_unchecked(x: f64) -> f64 {
    x * standard_normal_cdf(x)
}

/// d/dx of `x * Phi(x)` = `Phi(x) + x * phi(x)`.
#[inline]
pub fn gelu_derivative(x: f64) -> f64 {
    standard_normal_cdf(x) + x * FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Maclaurin series for erf, summed until terms vanish. Independent of libm.
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -x2 / n;
            let contrib = term / (2.0 * n + 1.0);
            sum += contrib;
            if contrib.abs() < 1e-20 {
                break;
            }
        }
        sum * 2.0 / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn gelu_at_zero() {
        assert_eq!(gelu(0.0).unwrap(), 0.0);
    }

    #[test]
    fn gelu_saturates_at_ten() {
        assert!((gelu(10.0).unwrap() - 10.0).abs() <= 1e-9);
    }

    #[test]
    fn gelu_at_one_matches_series_erf() {
        let expected = 0.5 * (1.0 + erf_series(1.0 / std::f64::consts::SQRT_2));
        assert!((gelu(1.0).unwrap() - expected).abs() <= 1e-10);
        // 0.841344746068543 is Phi(1) to 15 digits.
        assert!((expected - 0.841_344_746_068_543).abs() < 1e-14);
    }

    #[test]
    fn gelu_rejects_non_finite() {
        assert!(matches!(gelu(f64::NAN), Err(FadError::Domain(_))));
        assert!(matches!(gelu(f64::INFINITY), Err(FadError::Domain(_))));
    }

    #[test]
    fn derivative_matches_central_difference() {
        for i in -60..=60 {
            let x = f64::from(i) * 0.1;
            let h = 1e-5;
            let fd = (gelu_unchecked(x + h) - gelu_unchecked(x - h)) / (2.0 * h);
            assert!((fd - gelu_derivative(x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn odd_part_identity_and_monotone_tail() {
        // x*Phi(x) - (-x)*Phi(-x) = x*(Phi(x) + Phi(-x)) = x.
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=1200 {
            let x = -6.0 + f64::from(i) * 0.01;
            let g = gelu(x).unwrap();
            assert!((g - gelu(-x).unwrap() - x).abs() <= 1e-9, "x={x}");
            // GELU dips to its minimum near x = -0.7518 and is increasing above it.
            if x > -0.745 {
                assert!(g >= prev, "not monotone at {x}");
            }
            prev = g;
        }
    }
}
