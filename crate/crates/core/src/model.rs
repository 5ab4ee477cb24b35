//! Model parameters, the binary entropy `I` and the free-energy surrogate
//! `H(x) = βx^p + hx − I(x)` with derivatives up to fifth order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{ipow, CompensatedSum};

/// Highest derivative order supported by [`h_eval`].
pub const MAX_ORDER: usize = 5;

/// Parameters `(β, h, p, N)` of the p-spin Curie-Weiss model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    beta: f64,
    h: f64,
    p: u32,
    n: Option<usize>,
}

impl ModelParams {
    /// Landscape-only parameters (no system size).
    pub fn new(beta: f64, h: f64, p: u32) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParams(format!("beta must be positive and finite, got {beta}")));
        }
        if !h.is_finite() {
            return Err(Error::InvalidParams(format!("h must be finite, got {h}")));
        }
        if p < 2 {
            return Err(Error::InvalidParams(format!("p must be at least 2, got {p}")));
        }
        Ok(Self { beta, h, p, n: None })
    }

    /// Full parameters including the system size `N ≥ 1`.
    pub fn with_size(beta: f64, h: f64, p: u32, n: usize) -> Result<Self> {
        Self::new(beta, h, p)?.sized(n)
    }

    /// Copy with system size `n`.
    pub fn sized(self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("N must be at least 1".into()));
        }
        Ok(Self { n: Some(n), ..self })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn n(&self) -> Option<usize> {
        self.n
    }

    /// System size, or an error when the parameters are landscape-only.
    pub fn require_n(&self) -> Result<usize> {
        self.n
            .ok_or_else(|| Error::InvalidParams("system size N is required".into()))
    }

    /// `H(x)`, unchecked; `|x| ≤ 1` is assumed.
    #[inline]
    pub fn free_energy(&self, x: f64) -> f64 {
        let mut acc = CompensatedSum::new();
        acc.add(self.beta * ipow(x, self.p));
        acc.add(self.h * x);
        acc.add(-entropy_unchecked(x));
        acc.value()
    }

    /// `H^{(s)}(x)` for `1 ≤ s ≤ 5`, unchecked; `|x| < 1` is assumed.
    #[inline]
    pub fn free_energy_deriv(&self, x: f64, s: u32) -> f64 {
        let mut v = -entropy_deriv_unchecked(x, s);
        if s <= self.p {
            v += self.beta * falling_factorial(self.p, s) * ipow(x, self.p - s);
        }
        if s == 1 {
            v += self.h;
        }
        v
    }

    /// `βp(p−1)x^{p−2}`: the interaction part of `H″`.
    #[inline]
    pub fn interaction_curvature(&self, x: f64) -> f64 {
        self.beta * falling_factorial(self.p, 2) * ipow(x, self.p - 2)
    }
}

#[inline]
fn falling_factorial(p: u32, s: u32) -> f64 {
    ((p - s + 1)..=p).fold(1.0, |acc, k| acc * k as f64)
}

fn entropy_unchecked(x: f64) -> f64 {
    let a = x.abs();
    if a == 1.0 {
        return std::f64::consts::LN_2;
    }
    if a < 0.125 {
        // I(x) = Σ_{k≥1} x^{2k} / (2k(2k−1))
        let a2 = a * a;
        let mut pow = a2;
        let mut sum = 0.0;
        let mut k = 1.0;
        loop {
            let term = pow / (2.0 * k * (2.0 * k - 1.0));
            sum += term;
            if term <= sum * 1e-18 {
                break;
            }
            pow *= a2;
            k += 1.0;
        }
        return sum;
    }
    0.5 * ((1.0 + a) * a.ln_1p() + (1.0 - a) * (-a).ln_1p())
}

fn entropy_deriv_unchecked(x: f64, s: u32) -> f64 {
    if s == 1 {
        return x.atanh();
    }
    let k = s - 1;
    let scale = falling_factorial(s - 2, s - 2) / 2.0;
    let left = 1.0 / ipow(1.0 - x, k);
    let right = 1.0 / ipow(1.0 + x, k);
    if s.is_multiple_of(2) {
        scale * (left + right)
    } else {
        scale * (left - right)
    }
}

/// Binary entropy `I(x) = ½[(1+x)ln(1+x) + (1−x)ln(1−x)]` on `[−1, 1]`.
pub fn entropy(x: f64) -> Result<f64> {
    if !(x.abs() <= 1.0) {
        return Err(Error::Domain { what: "entropy", value: x });
    }
    Ok(entropy_unchecked(x))
}

/// `I^{(s)}(x)` for `|x| < 1`, `1 ≤ s ≤ 5`.
pub fn entropy_deriv(x: f64, s: u32) -> Result<f64> {
    if !(x.abs() < 1.0) {
        return Err(Error::Domain { what: "entropy_deriv", value: x });
    }
    if !(1..=MAX_ORDER as u32).contains(&s) {
        return Err(Error::InvalidParams(format!("derivative order {s} outside 1..=5")));
    }
    Ok(entropy_deriv_unchecked(x, s))
}

/// `H` and its derivatives at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeBundle {
    pub point: f64,
    /// `values[s] = H^{(s)}(point)` for `s = 0..=max_order`.
    pub values: Vec<f64>,
}

impl DerivativeBundle {
    pub fn get(&self, s: usize) -> Option<f64> {
        self.values.get(s).copied()
    }
}

/// Evaluates `H, H′, …, H^{(max_order)}` at `x ∈ (−1, 1)`.
pub fn h_eval(params: &ModelParams, x: f64, max_order: usize) -> Result<DerivativeBundle> {
    if !(x.abs() < 1.0) {
        return Err(Error::Domain { what: "H", value: x });
    }
    if max_order > MAX_ORDER {
        return Err(Error::InvalidParams(format!("max_order {max_order} exceeds {MAX_ORDER}")));
    }
    let mut values = Vec::with_capacity(max_order + 1);
    values.push(params.free_energy(x));
    for s in 1..=max_order as u32 {
        values.push(params.free_energy_deriv(x, s));
    }
    Ok(DerivativeBundle { point: x, values })
}

/// `x ↦ tanh(βp x^{p−1} + h)`; its fixed points are the stationary points of `H`.
pub fn fixed_point_map(params: &ModelParams, x: f64) -> f64 {
    (params.beta * params.p as f64 * ipow(x, params.p - 1) + params.h).tanh()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::bisect;
    use proptest::prelude::*;

    fn params(beta: f64, h: f64, p: u32) -> ModelParams {
        ModelParams::new(beta, h, p).unwrap()
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(ModelParams::new(0.0, 0.1, 3).is_err());
        assert!(ModelParams::new(-1.0, 0.1, 3).is_err());
        assert!(ModelParams::new(1.0, f64::NAN, 3).is_err());
        assert!(ModelParams::new(1.0, 0.1, 1).is_err());
        assert!(ModelParams::with_size(1.0, 0.1, 3, 0).is_err());
        assert!(ModelParams::new(1.0, 0.1, 3).unwrap().require_n().is_err());
    }

    #[test]
    fn entropy_values() {
        assert_eq!(entropy(0.0).unwrap(), 0.0);
        assert_eq!(entropy(1.0).unwrap(), std::f64::consts::LN_2);
        assert_eq!(entropy(-1.0).unwrap(), std::f64::consts::LN_2);
        // ½(1.5 ln 1.5 + 0.5 ln 0.5), 30-digit reference
        assert!((entropy(0.5).unwrap() - 0.130_812_035_941_136_96).abs() < 1e-14);
        assert!((entropy(0.1).unwrap() - 5.008_366_846_356_837e-3).abs() < 1e-17);
        assert!(entropy(1.0 + 1e-12).is_err());
    }

    #[test]
    fn entropy_branch_switch_is_continuous() {
        let x = 0.125;
        let series = entropy_unchecked(x - 1e-15);
        let closed = 0.5 * ((1.0 + x) * x.ln_1p() + (1.0 - x) * (-x).ln_1p());
        assert!((series - closed).abs() < 1e-15);
    }

    #[test]
    fn entropy_derivative_closed_forms() {
        assert_eq!(entropy_deriv(0.0, 2).unwrap(), 1.0);
        assert_eq!(entropy_deriv(0.0, 3).unwrap(), 0.0);
        for &x in &[-0.7, -0.2, 0.3, 0.9] {
            let d = 1.0 - x * x;
            assert!((entropy_deriv(x, 2).unwrap() - 1.0 / d).abs() < 1e-13 / d);
            assert!((entropy_deriv(x, 3).unwrap() - 2.0 * x / (d * d)).abs() < 1e-12 / (d * d));
            let e4 = (2.0 + 6.0 * x * x) / (d * d * d);
            assert!((entropy_deriv(x, 4).unwrap() - e4).abs() < 1e-12 * e4);
        }
        let step = 1e-4;
        let fd = (entropy_deriv(0.3 + step, 3).unwrap() - entropy_deriv(0.3 - step, 3).unwrap()) / (2.0 * step);
        let exact = entropy_deriv(0.3, 4).unwrap();
        assert!(((fd - exact) / exact).abs() < 1e-6);
        assert!(entropy_deriv(1.0, 2).is_err());
        assert!(entropy_deriv(0.5, 6).is_err());
    }

    #[test]
    fn h_at_origin_and_fixed_point() {
        let p = params(1.0, 0.2, 3);
        assert_eq!(h_eval(&p, 0.0, 0).unwrap().values[0], 0.0);
        let m = bisect(|x| fixed_point_map(&p, x) - x, 0.5, 0.999_999);
        let b = h_eval(&p, m, 1).unwrap();
        assert!(b.values[1].abs() < 1e-10);
        let step = 1e-5;
        let fd = (h_eval(&p, 0.4 + step, 1).unwrap().values[1] - h_eval(&p, 0.4 - step, 1).unwrap().values[1])
            / (2.0 * step);
        let h2 = h_eval(&p, 0.4, 2).unwrap().values[2];
        assert!(((fd - h2) / h2).abs() < 1e-6);
        assert!(h_eval(&p, 1.0, 2).is_err());
        assert!(h_eval(&p, 0.3, 6).is_err());
    }

    #[test]
    fn fixed_point_map_reference() {
        let p = params(1.0, 0.2, 3);
        assert_eq!(fixed_point_map(&params(0.7, 0.0, 3), 0.0), 0.0);
        let v = fixed_point_map(&p, 0.9);
        // tanh(2.63)
        assert!((v - 0.989_663_093_939_422_9).abs() < 1e-15);
    }

    #[test]
    fn h_matches_direct_formula() {
        let p = params(0.8, -0.3, 4);
        for &x in &[-0.95f64, -0.4, 0.0, 0.2, 0.77] {
            let direct = 0.8 * x.powi(4) - 0.3 * x - entropy(x).unwrap();
            let v = p.free_energy(x);
            assert!((v - direct).abs() <= 4.0 * f64::EPSILON * direct.abs().max(1e-300) + 1e-16);
        }
    }

    fn five_point(f: &dyn Fn(f64) -> f64, x: f64, step: f64) -> f64 {
        (-f(x + 2.0 * step) + 8.0 * f(x + step) - 8.0 * f(x - step) + f(x - 2.0 * step)) / (12.0 * step)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn derivatives_match_finite_differences(
            beta in 0.05f64..3.0,
            h in -1.0f64..1.0,
            p in 2u32..7,
            x in -0.9f64..0.9,
            s in 1u32..=5,
        ) {
            let m = params(beta, h, p);
            let lower = |y: f64| if s == 1 { m.free_energy(y) } else { m.free_energy_deriv(y, s - 1) };
            let step = 1e-3 * (1.0 - x.abs());
            let fd = five_point(&lower, x, step);
            let exact = m.free_energy_deriv(x, s);
            let scale = exact.abs().max(lower(x).abs()).max(1.0);
            prop_assert!((fd - exact).abs() <= 1e-5 * scale, "s={} fd={} exact={}", s, fd, exact);
        }

        #[test]
        fn entropy_is_even(x in -1.0f64..=1.0) {
            prop_assert_eq!(entropy(x).unwrap(), entropy(-x).unwrap());
        }

        #[test]
        fn entropy_is_strictly_convex(x in -0.999_999f64..0.999_999) {
            prop_assert!(entropy_deriv(x, 2).unwrap() > 0.0);
        }

        #[test]
        fn even_p_zero_field_is_symmetric(beta in 0.05f64..3.0, p in 1u32..4, x in -0.99f64..0.99) {
            let m = params(beta, 0.0, 2 * p);
            let (a, b) = (m.free_energy(x), m.free_energy(-x));
            prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * a.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn stationarity_equivalence(beta in 0.1f64..2.0, h in -0.5f64..0.5) {
            let m = params(beta, h, 3);
            let r = bisect(|x| fixed_point_map(&m, x) - x, -0.999_999, 0.999_999);
            prop_assert!((fixed_point_map(&m, r) - r).abs() < 1e-12);
            prop_assert!(m.free_energy_deriv(r, 1).abs() < 1e-9);
        }
    }
}
