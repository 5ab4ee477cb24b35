//! Exchangeable-pair quantities for single-site resampling: the constants
//! `λ, σ`, the factors `A(T), B(T)`, the drift identity and fitted
//! hypothesis constants.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::landscape::Interval;
use crate::law::MagnetizationLaw;
use crate::model::ModelParams;
use crate::numeric::{ipow, pairwise_sum};

/// Fraction `K/√(−H″(m))` giving the default half-width of the truncation
/// window in magnetization units.
pub const DEFAULT_HALF_WIDTH: f64 = 0.1;

/// Default truncation constant `K` for curvature `H″(m)`.
pub fn default_k(second_deriv: f64) -> f64 {
    DEFAULT_HALF_WIDTH * (-second_deriv).sqrt()
}

fn curvature_at(params: &ModelParams, m: f64) -> Result<f64> {
    if !(m.abs() < 1.0) {
        return Err(Error::Domain { what: "maximizer", value: m });
    }
    let d2 = params.free_energy_deriv(m, 2);
    if !(d2 < 0.0) {
        return Err(Error::InvalidMaximizer { m, second_deriv: d2 });
    }
    Ok(d2)
}

/// Both closed forms of `λ`:
/// `(1 − βp(p−1)m^{p−2}(1−m²))/N` and `H″/(N(H″ − βp(p−1)m^{p−2}))`.
pub fn lambda_forms(params: &ModelParams, m: f64) -> Result<(f64, f64)> {
    let n = params.require_n()? as f64;
    let d2 = curvature_at(params, m)?;
    let c = params.interaction_curvature(m);
    Ok(((1.0 - c * (1.0 - m * m)) / n, d2 / (n * (d2 - c))))
}

/// `λ` at a nondegenerate maximizer, cross-checked between its two forms.
pub fn lambda_const(params: &ModelParams, m: f64) -> Result<f64> {
    let (a, b) = lambda_forms(params, m)?;
    let rel = ((a - b) / a).abs();
    if rel > 1e-12 {
        return Err(Error::SolverFailure { what: "lambda identity", best_residual: rel });
    }
    Ok(a)
}

/// `σ = √(−N/H″(m))`.
pub fn sigma(params: &ModelParams, m: f64) -> Result<f64> {
    let n = params.require_n()? as f64;
    Ok((-n / curvature_at(params, m)?).sqrt())
}

/// `(A, B)` at magnetization `x̄`: `A = e^{−u}/(2cosh u)`, `B = e^{u}/(2cosh u)`
/// with `u = βp x̄^{p−1} + h`.
pub fn ab_at(params: &ModelParams, x_bar: f64) -> Result<(f64, f64)> {
    if !(x_bar.abs() < 1.0) {
        return Err(Error::Domain { what: "A/B factors", value: x_bar });
    }
    let u = params.beta() * params.p() as f64 * ipow(x_bar, params.p() - 1) + params.h();
    let a = 1.0 / (1.0 + (2.0 * u).exp());
    Ok((a, 1.0 - a))
}

/// `(A(T), B(T))` with `x̄ = σT/N + m`.
pub fn ab_factors(params: &ModelParams, m: f64, t: f64) -> Result<(f64, f64)> {
    let n = params.require_n()? as f64;
    let s = sigma(params, m)?;
    ab_at(params, s * t / n + m)
}

/// Exact Gibbs probability that spin `i` is `+1` given the others.
pub fn exact_conditional(params: &ModelParams, config: &[i8], i: usize) -> Result<f64> {
    let n = params.require_n()?;
    if config.len() != n || i >= n || config.iter().any(|&x| x != 1 && x != -1) {
        return Err(Error::InvalidParams("configuration must be a ±1 vector of length N with i < N".into()));
    }
    let s: i64 = config.iter().map(|&x| x as i64).sum();
    Ok(conditional_plus(params, n, s - config[i] as i64))
}

/// `P(X_i = +1 | S_{−i} = s_rest)` for the Hamiltonian `N(βX̄^p + hX̄)`.
#[inline]
pub fn conditional_plus(params: &ModelParams, n: usize, s_rest: i64) -> f64 {
    let nf = n as f64;
    let p = params.p();
    let s = s_rest as f64;
    let scale = params.beta() * nf.powi(1 - p as i32);
    let delta = scale * (ipow(s + 1.0, p) - ipow(s - 1.0, p)) + 2.0 * params.h();
    1.0 / (1.0 + (-delta).exp())
}

/// Surrogate `B(x̄) = e^{u}/(2cosh u)` for the probability of `+1`.
pub fn tanh_form_plus(params: &ModelParams, x_bar: f64) -> Result<f64> {
    ab_at(params, x_bar).map(|(_, b)| b)
}

/// Max gap between the exact Gibbs conditional and the tanh-form surrogate
/// over every configuration, taken through `S` and the value of the site.
pub fn surrogate_gap(params: &ModelParams) -> Result<f64> {
    let n = params.require_n()?;
    let mut gap = 0.0f64;
    for k in 1..n {
        let s = 2 * k as i64 - n as i64;
        let b = tanh_form_plus(params, s as f64 / n as f64)?;
        for s_rest in [s - 1, s + 1] {
            gap = gap.max((conditional_plus(params, n, s_rest) - b).abs());
        }
    }
    Ok(gap)
}

/// Per-atom quantities of the exchangeable pair conditioned on `A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtomDrift {
    pub k: usize,
    pub t: f64,
    pub prob: f64,
    /// Site-sum representation `U − V`.
    pub site_sum: f64,
    /// `(T/N + m/σ) − tanh(u)/σ`.
    pub closed_form: f64,
    /// `R` from `E(T−T′|X) = λ(T − R)`, built from the Taylor remainder.
    pub r: f64,
    /// Both `E_a` and `E_b` hold.
    pub interior: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub n: usize,
    pub m: f64,
    pub lambda: f64,
    pub sigma: f64,
    /// Max `|site_sum − closed_form|` over interior atoms.
    pub max_discrepancy: f64,
    /// `max |R|·√N/T²` over interior atoms with `T ≠ 0`.
    pub fitted_b: f64,
    /// `|E[T − T′] − λ E[T − R]|` over the conditioned law.
    pub mean_identity_gap: f64,
    pub atoms: Vec<AtomDrift>,
}

struct PairSetup {
    n: usize,
    m: f64,
    lambda: f64,
    sigma: f64,
    a: f64,
    b: f64,
    f0: f64,
    f1: f64,
}

impl PairSetup {
    fn new(params: &ModelParams, m: f64, a: &Interval) -> Result<Self> {
        if !a.contains(m) {
            return Err(Error::InvalidParams(format!("m={m} outside conditioning interval")));
        }
        let n = params.require_n()?;
        let lambda = lambda_const(params, m)?;
        let sigma = sigma(params, m)?;
        let (beta, p, h) = (params.beta(), params.p() as f64, params.h());
        let f0 = (beta * p * ipow(m, params.p() - 1) + h).tanh();
        let f1 = (1.0 - f0 * f0) * params.interaction_curvature(m);
        Ok(Self { n, m, lambda, sigma, a: a.lo.max(-1.0), b: a.hi.min(1.0), f0, f1 })
    }

    fn atom(&self, params: &ModelParams, k: usize, prob: f64) -> Result<AtomDrift> {
        let n = self.n as f64;
        let s = 2 * k as i64 - self.n as i64;
        let x_bar = s as f64 / n;
        let t = (s as f64 - n * self.m) / self.sigma;
        let e_a = (s - 2) as f64 >= self.a * n;
        let e_b = (s + 2) as f64 <= self.b * n;
        let (af, bf) = if x_bar.abs() < 1.0 { ab_at(params, x_bar)? } else if x_bar > 0.0 { (0.0, 1.0) } else { (1.0, 0.0) };
        let plus = k as f64;
        let minus = (self.n - k) as f64;
        let site_sum = 2.0 / (n * self.sigma)
            * (plus * af * if e_a { 1.0 } else { 0.0 } - minus * bf * if e_b { 1.0 } else { 0.0 });
        let tanh_u = bf - af;
        let closed_form = (t / n + self.m / self.sigma) - tanh_u / self.sigma;
        let q = -plus * 2.0 / (n * self.sigma) * af * if e_a { 0.0 } else { 1.0 }
            + minus * 2.0 / (n * self.sigma) * bf * if e_b { 0.0 } else { 1.0 };
        let u = self.sigma * t / n;
        let rem = tanh_u - self.f0 - self.f1 * u;
        let r = rem / (self.sigma * self.lambda) - q / self.lambda;
        Ok(AtomDrift { k, t, prob, site_sum, closed_form, r, interior: e_a && e_b })
    }

    // E(D|T) = E[(T−T′)²|X]/(2λ).
    fn conditional_d(&self, params: &ModelParams, k: usize) -> Result<f64> {
        let n = self.n as f64;
        let s = 2 * k as i64 - self.n as i64;
        let x_bar = s as f64 / n;
        let (af, bf) = ab_at(params, x_bar)?;
        let e_a = (s - 2) as f64 >= self.a * n;
        let e_b = (s + 2) as f64 <= self.b * n;
        let second = 4.0 / (n * self.sigma * self.sigma)
            * (k as f64 * af * if e_a { 1.0 } else { 0.0 }
                + (self.n - k) as f64 * bf * if e_b { 1.0 } else { 0.0 });
        Ok(second / (2.0 * self.lambda))
    }
}

/// Drift identity check on the law conditioned on `X̄ ∈ A`.
pub fn drift_check(law: &MagnetizationLaw, m: f64, a: &Interval) -> Result<DriftReport> {
    let params = law.params();
    let setup = PairSetup::new(params, m, a)?;
    let cond = law.condition(a)?;
    let mut atoms = Vec::new();
    for k in 0..cond.len() {
        if cond.log_weights()[k] == f64::NEG_INFINITY {
            continue;
        }
        atoms.push(setup.atom(params, k, cond.prob(k))?);
    }
    let sqrt_n = (setup.n as f64).sqrt();
    let mut max_discrepancy = 0.0f64;
    let mut fitted_b = 0.0f64;
    for at in atoms.iter().filter(|a| a.interior) {
        max_discrepancy = max_discrepancy.max((at.site_sum - at.closed_form).abs());
        if at.t != 0.0 {
            fitted_b = fitted_b.max(at.r.abs() * sqrt_n / (at.t * at.t));
        }
    }
    let lhs: Vec<f64> = atoms.iter().map(|a| a.prob * a.site_sum).collect();
    let rhs: Vec<f64> = atoms.iter().map(|a| a.prob * setup.lambda * (a.t - a.r)).collect();
    let mean_identity_gap = (pairwise_sum(&lhs) - pairwise_sum(&rhs)).abs();
    Ok(DriftReport {
        n: setup.n,
        m,
        lambda: setup.lambda,
        sigma: setup.sigma,
        max_discrepancy,
        fitted_b,
        mean_identity_gap,
        atoms,
    })
}

/// Constants of the exchangeable-pair hypotheses on the truncated law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairConstants {
    pub n: usize,
    pub m: f64,
    pub k: f64,
    pub sigma2: f64,
    pub lambda: f64,
    /// `2/σ`, the bound on `|Δ|`.
    pub delta: f64,
    /// `max E(D|T)`.
    pub theta_hat: f64,
    /// `max |E(D|T) − 1|/(1 + |T|)`.
    pub delta1_hat: f64,
    /// `max |R|/(1 + T²)`.
    pub delta2_hat: f64,
    /// `δ₂·K√N`.
    pub alpha: f64,
    /// `min E(D|T)`.
    pub min_d: f64,
}

/// Fitted constants on `T | {|T| ≤ K√N}` with `E_a, E_b` taken from `A`.
pub fn hypothesis_constants(law: &MagnetizationLaw, m: f64, a: &Interval, k_const: f64) -> Result<PairConstants> {
    let params = law.params();
    let setup = PairSetup::new(params, m, a)?;
    let d2 = curvature_at(params, m)?;
    let half = k_const / (-d2).sqrt();
    let (lo, hi) = (m - half, m + half);
    if !(k_const > 0.0) || lo <= setup.a || hi >= setup.b || lo <= -1.0 || hi >= 1.0 {
        return Err(Error::TruncationTooWide { k: k_const, lo, hi });
    }
    let sqrt_n = (setup.n as f64).sqrt();
    let mut out = PairConstants {
        n: setup.n,
        m,
        k: k_const,
        sigma2: setup.sigma * setup.sigma,
        lambda: setup.lambda,
        delta: 2.0 / setup.sigma,
        theta_hat: 0.0,
        delta1_hat: 0.0,
        delta2_hat: 0.0,
        alpha: 0.0,
        min_d: f64::INFINITY,
    };
    let mut any = false;
    for k in 0..law.len() {
        let at = setup.atom(params, k, law.prob(k))?;
        if at.t.abs() > k_const * sqrt_n {
            continue;
        }
        any = true;
        let d = setup.conditional_d(params, k)?;
        out.theta_hat = out.theta_hat.max(d);
        out.min_d = out.min_d.min(d);
        out.delta1_hat = out.delta1_hat.max((d - 1.0).abs() / (1.0 + at.t.abs()));
        out.delta2_hat = out.delta2_hat.max(at.r.abs() / (1.0 + at.t * at.t));
    }
    if !any {
        return Err(Error::EmptyEvent);
    }
    out.alpha = out.delta2_hat * k_const * sqrt_n;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{classify_point, DEFAULT_TOL_CURV, DEFAULT_TOL_HEIGHT};
    use crate::law::build_law;
    use proptest::prelude::*;

    fn regular(n: usize) -> (ModelParams, f64) {
        let p = ModelParams::with_size(0.3, 0.2, 3, n).unwrap();
        let land = classify_point(&p, DEFAULT_TOL_HEIGHT, DEFAULT_TOL_CURV);
        (p, land.global_maximizers[0].m)
    }

    #[test]
    fn lambda_forms_agree_and_lie_in_unit_interval() {
        let (p, m) = regular(1000);
        let (a, b) = lambda_forms(&p, m).unwrap();
        assert!(((a - b) / a).abs() < 1e-12);
        let l = lambda_const(&p, m).unwrap();
        assert!(l > 0.0 && l < 1.0);
        let bad = ModelParams::with_size(2.0, 0.0, 3, 100).unwrap();
        assert!(matches!(lambda_const(&bad, 0.5), Err(Error::InvalidMaximizer { .. })));
        assert!(lambda_const(&ModelParams::new(0.3, 0.2, 3).unwrap(), m).is_err());
    }

    #[test]
    fn lambda_tends_to_one_over_n_for_weak_coupling() {
        let n = 500;
        let p = ModelParams::with_size(1e-6, 0.4, 3, n).unwrap();
        let m = classify_point(&p, DEFAULT_TOL_HEIGHT, DEFAULT_TOL_CURV).global_maximizers[0].m;
        assert!((m - 0.4f64.tanh()).abs() < 1e-5);
        assert!((lambda_const(&p, m).unwrap() * n as f64 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn ab_identities() {
        let (p, m) = regular(800);
        for &t in &[-3.0, -0.5, 0.0, 1.2, 4.0] {
            let (a, b) = ab_factors(&p, m, t).unwrap();
            assert!((a + b - 1.0).abs() < 1e-15);
            let s = sigma(&p, m).unwrap();
            let u = 0.3 * 3.0 * (s * t / 800.0 + m).powi(2) + 0.2;
            assert!((b - a - u.tanh()).abs() < 1e-15);
        }
        let (a, b) = ab_factors(&p, m, 0.0).unwrap();
        assert!((b - a - m).abs() < 1e-12);
        assert!(ab_at(&p, 1.0).is_err());
    }

    #[test]
    fn single_spin_conditional() {
        let (beta, h): (f64, f64) = (0.7, 0.15);
        let p = ModelParams::with_size(beta, h, 3, 1).unwrap();
        let got = exact_conditional(&p, &[1], 0).unwrap();
        let want = (beta + h).exp() / ((beta + h).exp() + (-beta - h).exp());
        assert!((got - want).abs() < 1e-15);
        assert!(exact_conditional(&p, &[0], 0).is_err());
        assert!(exact_conditional(&p, &[1, 1], 0).is_err());
    }

    #[test]
    fn conditional_matches_enumeration() {
        let n = 10;
        let p = ModelParams::with_size(0.6, -0.1, 3, n).unwrap();
        let energy = |x: &[i8]| {
            let s: f64 = x.iter().map(|&v| v as f64).sum();
            0.6 * (n as f64).powi(-2) * s.powi(3) - 0.1 * s
        };
        for mask in [0u32, 0b1011, 0b11_0110_1001, 0b11_1111_1111] {
            let mut x: Vec<i8> = (0..n).map(|i| if mask >> i & 1 == 1 { 1 } else { -1 }).collect();
            for i in 0..n {
                x[i] = 1;
                let ep = energy(&x);
                x[i] = -1;
                let em = energy(&x);
                let want = ep.exp() / (ep.exp() + em.exp());
                let got = exact_conditional(&p, &x, i).unwrap();
                assert!((got - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn surrogate_gap_is_order_one_over_n() {
        let g1 = surrogate_gap(&ModelParams::with_size(0.3, 0.2, 3, 100).unwrap()).unwrap();
        let g4 = surrogate_gap(&ModelParams::with_size(0.3, 0.2, 3, 400).unwrap()).unwrap();
        let ratio = g1 / g4;
        assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
    }

    #[test]
    fn fitted_b_stable_across_n() {
        let mut bs = Vec::new();
        for n in [500, 2000] {
            let (p, m) = regular(n);
            let law = build_law(&p).unwrap();
            bs.push(drift_check(&law, m, &Interval::REAL_LINE).unwrap().fitted_b);
        }
        assert!(bs[0] / bs[1] < 2.0 && bs[1] / bs[0] < 2.0, "{bs:?}");
    }

    #[test]
    fn delta1_scaled_band() {
        let mut v = Vec::new();
        for n in [500, 1000, 2000, 4000] {
            let (p, m) = regular(n);
            let law = build_law(&p).unwrap();
            let k = default_k(p.free_energy_deriv(m, 2));
            let c = hypothesis_constants(&law, m, &Interval::REAL_LINE, k).unwrap();
            assert!(c.lambda > 0.0 && c.lambda < 1.0 && c.alpha.is_finite());
            v.push(c.delta1_hat * (n as f64).sqrt());
        }
        let hi = v.iter().cloned().fold(f64::MIN, f64::max);
        let lo = v.iter().cloned().fold(f64::MAX, f64::min);
        assert!(hi / lo < 4.0, "{v:?}");
    }

    #[test]
    fn interior_representations_agree() {
        let (p, m) = regular(1000);
        let law = build_law(&p).unwrap();
        let rep = drift_check(&law, m, &Interval::REAL_LINE).unwrap();
        assert!(rep.max_discrepancy < 1e-12);
        assert!(rep.mean_identity_gap < 1e-10);
        assert!(rep.fitted_b.is_finite() && rep.fitted_b > 0.0);
    }

    #[test]
    fn truncation_must_fit_inside_interval() {
        let (p, m) = regular(1000);
        let law = build_law(&p).unwrap();
        let d2 = p.free_energy_deriv(m, 2);
        let ok = hypothesis_constants(&law, m, &Interval::REAL_LINE, default_k(d2)).unwrap();
        assert!(ok.theta_hat < 4.0 && ok.min_d > 0.0);
        assert!((ok.delta * (1000f64).sqrt() - 2.0 * (-d2).sqrt()).abs() < 1e-12);
        let narrow = Interval::new(m - 0.05, m + 0.05);
        assert!(matches!(
            hypothesis_constants(&law, m, &narrow, default_k(d2)),
            Err(Error::TruncationTooWide { .. })
        ));
    }

    proptest! {
        #[test]
        fn conditional_depends_only_on_sum(mask in 0u32..(1 << 12), i in 0usize..12, rot in 1usize..12, beta in 0.05f64..2.0, h in -0.5f64..0.5) {
            let n = 12;
            let p = ModelParams::with_size(beta, h, 4, n).unwrap();
            let x: Vec<i8> = (0..n).map(|j| if mask >> j & 1 == 1 { 1 } else { -1 }).collect();
            let mut y = x.clone();
            y.rotate_left(rot);
            let j = (i + n - rot % n) % n;
            prop_assert_eq!(exact_conditional(&p, &x, i).unwrap(), exact_conditional(&p, &y, j).unwrap());
        }

        #[test]
        fn ab_sum_to_one(beta in 0.05f64..2.0, h in -1.0f64..1.0, x in -0.999f64..0.999) {
            let p = ModelParams::with_size(beta, h, 3, 100).unwrap();
            let (a, b) = ab_at(&p, x).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-15);
            let u = beta * 3.0 * x * x + h;
            prop_assert!((b - a - u.tanh()).abs() < 1e-15);
        }
    
        #[test]
        fn lambda_identity_at_regular_points(beta in 0.05f64..1.2, h in -0.6f64..0.6, p in 3u32..=5) {
            let params = ModelParams::with_size(beta, h, p, 1000).unwrap();
            let land = classify_point(&params, DEFAULT_TOL_HEIGHT, DEFAULT_TOL_CURV);
            prop_assume!(land.classification == crate::landscape::Classification::Regular);
            let m = land.global_maximizers[0].m;
            let (a, b) = lambda_forms(&params, m).unwrap();
            prop_assert!(((a - b) / a).abs() <= 1e-12);
            prop_assert!(a > 0.0 && a < 1.0);
        }
    }
}
