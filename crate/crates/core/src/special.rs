//! Gaussian tails and the upper incomplete gamma function.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal CDF `Φ(x)`.
pub fn gaussian_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal survival `1 − Φ(x)`, accurate in the far right tail.
pub fn gaussian_survival(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `ln(1 − Φ(x))` without underflow for large `x`.
pub fn gaussian_ln_survival(x: f64) -> f64 {
    if x < 30.0 {
        return gaussian_survival(x).ln();
    }
    // Mills-ratio asymptotic series.
    let z = 1.0 / (x * x);
    let series = 1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z)));
    -0.5 * x * x - (x * (2.0 * PI).sqrt()).ln() + series.ln()
}

/// `ln Φ(x)`.
pub fn gaussian_ln_cdf(x: f64) -> f64 {
    gaussian_ln_survival(-x)
}

/// Standard normal density.
pub fn gaussian_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `Γ(a)`.
pub fn gamma(a: f64) -> f64 {
    libm::tgamma(a)
}

/// `ln Γ(a)` for `a > 0`.
pub fn ln_gamma(a: f64) -> f64 {
    libm::lgamma(a)
}

const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

// Lower series: γ(a,z) = z^a e^{-z} Σ z^n / (a(a+1)…(a+n)); returns the sum.
fn lower_series(a: f64, z: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..10_000 {
        ap += 1.0;
        term *= z / ap;
        sum += term;
        if term.abs() < sum.abs() * CF_EPS {
            break;
        }
    }
    sum
}

// Modified Lentz evaluation of the continued fraction for Γ(a,z) e^z z^{-a}.
fn upper_fraction(a: f64, z: f64) -> f64 {
    let mut b = z + 1.0 - a;
    let mut c = 1.0 / CF_TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = b + an / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Upper incomplete gamma `Γ(a, z) = ∫_z^∞ t^{a−1} e^{−t} dt` for `a > 0`,
/// `z ≥ 0`. Series below `z = a + 1`, continued fraction above.
pub fn incomplete_gamma_upper(a: f64, z: f64) -> f64 {
    debug_assert!(a > 0.0 && z >= 0.0);
    if z == 0.0 {
        return gamma(a);
    }
    if z < a + 1.0 {
        let lower = (a * z.ln() - z).exp() * lower_series(a, z);
        gamma(a) - lower
    } else {
        (a * z.ln() - z).exp() * upper_fraction(a, z)
    }
}

/// `ln Γ(a, z)`, finite far beyond the underflow point of
/// [`incomplete_gamma_upper`].
pub fn ln_incomplete_gamma_upper(a: f64, z: f64) -> f64 {
    debug_assert!(a > 0.0 && z >= 0.0);
    if z == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if z < a + 1.0 {
        incomplete_gamma_upper(a, z).ln()
    } else {
        a * z.ln() - z + upper_fraction(a, z).ln()
    }
}

/// Regularized upper incomplete gamma `Q(a, z) = Γ(a, z)/Γ(a)`.
pub fn gamma_q(a: f64, z: f64) -> f64 {
    if z < a + 1.0 {
        let lower = (a * z.ln() - z - ln_gamma(a)).exp() * lower_series(a, z);
        1.0 - lower
    } else {
        (a * z.ln() - z - ln_gamma(a)).exp() * upper_fraction(a, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate_to_infinity;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn gaussian_reference_values() {
        assert_eq!(gaussian_cdf(0.0), 0.5);
        // erfc(3/sqrt 2)/2
        assert!(rel(gaussian_survival(3.0), 1.349_898_031_630_094_6e-3) < 1e-14);
        assert!(rel(gaussian_survival(8.0), 6.220_960_574_271_785e-16) < 1e-13);
        for i in -80..=80 {
            let x = i as f64 / 10.0;
            assert!((gaussian_cdf(x) + gaussian_survival(x) - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn gaussian_log_tail_is_continuous_at_switch() {
        let below = gaussian_survival(29.999_999).ln();
        let above = gaussian_ln_survival(30.0);
        assert!((below - above).abs() < 1e-4);
        assert!(rel(gaussian_ln_survival(30.0), gaussian_survival(30.0).ln()) < 1e-12);
        assert!(gaussian_ln_survival(100.0).is_finite());
    }

    #[test]
    fn incomplete_gamma_closed_forms() {
        for &a in &[0.25, 0.5, 1.5, 2.0] {
            assert!(rel(incomplete_gamma_upper(a, 0.0), gamma(a)) < 1e-14);
        }
        for &z in &[0.1, 0.9, 1.9, 2.1, 5.0, 30.0] {
            assert!(rel(incomplete_gamma_upper(1.0, z), (-z).exp()) < 1e-13);
        }
        // Γ(1/2, z) = √π erfc(√z)
        for &z in &[0.3f64, 1.2, 4.0, 20.0] {
            let exact = PI.sqrt() * libm::erfc(z.sqrt());
            assert!(rel(incomplete_gamma_upper(0.5, z), exact) < 1e-13);
        }
    }

    #[test]
    fn incomplete_gamma_matches_quadrature() {
        let q = integrate_to_infinity(|t| t.powf(-0.75) * (-t).exp(), 2.0, 1e-16, 1e-14);
        assert!((incomplete_gamma_upper(0.25, 2.0) - q).abs() < 1e-11);
        let q = integrate_to_infinity(|t| t.sqrt() * (-t).exp(), 0.7, 1e-16, 1e-14);
        assert!(rel(incomplete_gamma_upper(1.5, 0.7), q) < 1e-12);
    }

    #[test]
    fn log_incomplete_gamma_extends_range() {
        let v = ln_incomplete_gamma_upper(0.25, 900.0);
        assert!(v.is_finite() && v < -899.0);
        assert!(rel(ln_incomplete_gamma_upper(0.25, 10.0), incomplete_gamma_upper(0.25, 10.0).ln()) < 1e-13);
        assert!(rel(gamma_q(0.25, 3.0) * gamma(0.25), incomplete_gamma_upper(0.25, 3.0)) < 1e-13);
    }
}
