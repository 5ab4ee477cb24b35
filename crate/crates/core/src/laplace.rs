//! Laplace-type expansion of the magnetization tail at a special point:
//! weights `y_{m,N}`, the partial sums `A_N, Â_N, B_N, B_{N,x}`, the kernels
//! `p₁, p₂, r` and their tail integrals.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::landscape::SpecialPoint;
use crate::limit::{ln_tail_moment, tail_moment};
use crate::model::ModelParams;
use crate::numeric::{integrate_to_infinity, ipow, ln_binomial, ln_factorials, log_add_exp, log_sum_exp};
use crate::special::gamma;

/// Width exponent: the inner window is `|m − m_*| < N^{−1/4+ε}`.
pub const EPSILON: f64 = 0.24;
/// Exponent of the discarded boundary terms `e^{−N^{ζε}}`.
pub const ZETA: f64 = 3.9;

/// Which remainder kernel `r(t)` to use. Both are even in `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum RemainderKernel {
    /// `(N^{−1/2} + t² + t⁵N^{−3/4} + t⁶ + t¹⁰ + t¹¹N^{−1/4})·p₁(t)`.
    #[default]
    Appendix,
    /// `(N^{−1/2}(1+t⁴) + t¹¹N^{−1/4} + t² + t⁶ + t¹⁰)·p₁(t)`.
    Summary,
}

impl RemainderKernel {
    // (power, N-exponent) pairs: coefficient N^{e}·t^{k}.
    fn terms(&self) -> &'static [(u32, f64)] {
        match self {
            RemainderKernel::Appendix => &[(0, -0.5), (2, 0.0), (5, -0.75), (6, 0.0), (10, 0.0), (11, -0.25)],
            RemainderKernel::Summary => &[(0, -0.5), (4, -0.5), (11, -0.25), (2, 0.0), (6, 0.0), (10, 0.0)],
        }
    }
}

/// Constants of the expansion around a special point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceContext {
    pub params: ModelParams,
    pub m_star: f64,
    pub h4: f64,
    pub h5: f64,
    pub epsilon: f64,
    pub zeta: f64,
    pub kernel: RemainderKernel,
}

impl LaplaceContext {
    /// Validates that `m_star` is a flat maximizer of `params`.
    pub fn new(params: ModelParams, m_star: f64) -> Result<Self> {
        if !(m_star.abs() < 1.0) {
            return Err(Error::Domain { what: "special maximizer", value: m_star });
        }
        let res = (1..=3).map(|s| params.free_energy_deriv(m_star, s).abs()).fold(0.0, f64::max);
        if res > 1e-10 {
            return Err(Error::RegimeMismatch {
                expected: "special point (H′ = H″ = H‴ = 0)".into(),
                found: format!("derivative residual {res:e}"),
            });
        }
        let h4 = params.free_energy_deriv(m_star, 4);
        if !(h4 < 0.0) {
            return Err(Error::InvalidMaximizer { m: m_star, second_deriv: h4 });
        }
        Ok(Self {
            params,
            m_star,
            h4,
            h5: params.free_energy_deriv(m_star, 5),
            epsilon: EPSILON,
            zeta: ZETA,
            kernel: RemainderKernel::default(),
        })
    }

    pub fn from_special(point: &SpecialPoint, p: u32) -> Result<Self> {
        Self::new(point.params(p)?, point.m_star)
    }

    pub fn with_kernel(self, kernel: RemainderKernel) -> Self {
        Self { kernel, ..self }
    }

    /// `c = −H^{(4)}(m_*)/24`.
    pub fn c(&self) -> f64 {
        -self.h4 / 24.0
    }

    fn linear_coeff(&self) -> f64 {
        self.m_star / (1.0 - self.m_star * self.m_star)
    }

    /// Half-width `N^{−1/4+ε}` of the inner window.
    pub fn window(&self, n: usize) -> f64 {
        (n as f64).powf(-0.25 + self.epsilon)
    }
}

/// `ln y_{m,N}` for atom `k` (magnetization `−1 + 2k/N`).
pub fn ln_y_weight(ctx: &LaplaceContext, n: usize, ln_fact: &[f64], k: usize) -> f64 {
    let nf = n as f64;
    let m = -1.0 + 2.0 * k as f64 / nf;
    let ms = ctx.m_star;
    let (beta, h, p) = (ctx.params.beta(), ctx.params.h(), ctx.params.p());
    -nf * std::f64::consts::LN_2
        + 0.5 * (std::f64::consts::PI * nf * (1.0 - ms * ms) / 2.0).ln()
        + ln_binomial(ln_fact, n, k)
        + nf * (beta * ipow(m, p) + h * m - ctx.params.free_energy(ms))
}

/// `ln y_{m,N}` for every atom of `M_N`.
pub fn ln_y_weights(ctx: &LaplaceContext, n: usize) -> Vec<f64> {
    let lf = ln_factorials(n);
    (0..=n).map(|k| ln_y_weight(ctx, n, &lf, k)).collect()
}

/// The four partial sums, held in log-space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialSums {
    pub n: usize,
    pub x: f64,
    pub ln_a: f64,
    pub ln_a_hat: f64,
    pub ln_b: f64,
    pub ln_b_x: f64,
}

impl PartialSums {
    pub fn a_n(&self) -> f64 {
        self.ln_a.exp()
    }

    pub fn a_hat_n(&self) -> f64 {
        self.ln_a_hat.exp()
    }

    pub fn b_n(&self) -> f64 {
        self.ln_b.exp()
    }

    pub fn b_n_x(&self) -> f64 {
        self.ln_b_x.exp()
    }

    /// `ln(A_N + B_N)`.
    pub fn ln_total(&self) -> f64 {
        log_add_exp(self.ln_a, self.ln_b)
    }

    /// `(Â_N + B_{N,x})/(A_N + B_N)`.
    pub fn reconstructed_tail(&self) -> f64 {
        (log_add_exp(self.ln_a_hat, self.ln_b_x) - self.ln_total()).exp()
    }
}

/// Exact sums of `y_{m,N}` over the index sets `|m−m_*| ≥ δ`, `m−m_* ≥ δ`,
/// `|m−m_*| < δ` and `N^{−1/4}x < m−m_* < δ`, with `δ = N^{−1/4+ε}`.
pub fn partial_sums(ctx: &LaplaceContext, n: usize, x: f64) -> Result<PartialSums> {
    if !(x >= 0.0) {
        return Err(Error::Domain { what: "partial sum threshold", value: x });
    }
    if n == 0 {
        return Err(Error::InvalidParams("N must be at least 1".into()));
    }
    let lw = ln_y_weights(ctx, n);
    let delta = ctx.window(n);
    let lower = (n as f64).powf(-0.25) * x;
    let (mut a, mut a_hat, mut b, mut b_x) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, &w) in lw.iter().enumerate() {
        let d = -1.0 + 2.0 * k as f64 / n as f64 - ctx.m_star;
        if d.abs() >= delta {
            a.push(w);
        } else {
            b.push(w);
        }
        if d >= delta {
            a_hat.push(w);
        }
        if lower < d && d < delta {
            b_x.push(w);
        }
    }
    Ok(PartialSums {
        n,
        x,
        ln_a: log_sum_exp(&a),
        ln_a_hat: log_sum_exp(&a_hat),
        ln_b: log_sum_exp(&b),
        ln_b_x: log_sum_exp(&b_x),
    })
}

/// Kernel values at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kernels {
    pub p1: f64,
    pub p2: f64,
    pub r: f64,
}

/// `p₁(t) = e^{H4 t⁴/24}`, `p₂(t) = p₁(t)(H5 t⁵/120 + m_* t/(1−m_*²))` and
/// the remainder kernel `r(t)` at system size `n`.
pub fn kernels(ctx: &LaplaceContext, n: usize, t: f64) -> Kernels {
    let p1 = (ctx.h4 / 24.0 * ipow(t, 4)).exp();
    let p2 = p1 * (ctx.h5 / 120.0 * ipow(t, 5) + ctx.linear_coeff() * t);
    let nf = n as f64;
    let a = t.abs();
    let poly: f64 = ctx.kernel.terms().iter().map(|&(k, e)| nf.powf(e) * ipow(a, k)).sum();
    Kernels { p1, p2, r: poly * p1 }
}

/// Tail integrals `P̂₁(x), P̂₂(x), R̂(x)` over `[x, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailIntegrals {
    pub p1: f64,
    pub p2: f64,
    pub r: f64,
}

/// Tail integrals through incomplete gamma functions (`x ≥ 0`).
pub fn tail_integrals(ctx: &LaplaceContext, n: usize, x: f64) -> TailIntegrals {
    let c = ctx.c();
    let nf = n as f64;
    let p1 = tail_moment(c, 0, x);
    let p2 = ctx.h5 / 120.0 * tail_moment(c, 5, x) + ctx.linear_coeff() * tail_moment(c, 1, x);
    let r = ctx
        .kernel
        .terms()
        .iter()
        .map(|&(k, e)| (e * nf.ln() + ln_tail_moment(c, k, x)).exp())
        .sum();
    TailIntegrals { p1, p2, r }
}

/// Tail integrals by adaptive quadrature of the kernels (`x ≥ 0`).
pub fn tail_integrals_quadrature(ctx: &LaplaceContext, n: usize, x: f64) -> TailIntegrals {
    let q = |f: &dyn Fn(f64) -> f64| integrate_to_infinity(f, x, 1e-15, 1e-12);
    TailIntegrals {
        p1: q(&|t| kernels(ctx, n, t).p1),
        p2: q(&|t| kernels(ctx, n, t).p2),
        r: q(&|t| kernels(ctx, n, t).r),
    }
}

/// `∫_{−∞}^{∞} p₁ = Γ(¼)/(2c^{1/4})`.
pub fn p1_integral(ctx: &LaplaceContext) -> f64 {
    gamma(0.25) / (2.0 * ctx.c().powf(0.25))
}

/// Leading-order approximation `(N^{3/4}/2)∫p₁` of `B_N`.
pub fn laplace_bn(ctx: &LaplaceContext, n: usize) -> f64 {
    (n as f64).powf(0.75) / 2.0 * p1_integral(ctx)
}

/// Two-term approximation of `B_{N,x}` with its error diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BnxApprox {
    /// `(N^{3/4}/2)P̂₁(x) + (√N/2)P̂₂(x)`.
    pub estimate: f64,
    /// `(N^{3/4}/2)P̂₁(x)` alone.
    pub one_term: f64,
    /// `N^{1/4}R̂(x) + p₁(x) + |p₂(x)|N^{−1/4} + r(x)N^{−1/2}`.
    pub error_scale: f64,
    /// `e^{−N^{ζε}}`.
    pub boundary_term: f64,
}

pub fn laplace_bnx(ctx: &LaplaceContext, n: usize, x: f64) -> Result<BnxApprox> {
    if !(x >= 0.0) {
        return Err(Error::Domain { what: "B_N,x threshold", value: x });
    }
    let nf = n as f64;
    let ti = tail_integrals(ctx, n, x);
    let kx = kernels(ctx, n, x);
    let one_term = nf.powf(0.75) / 2.0 * ti.p1;
    Ok(BnxApprox {
        estimate: one_term + nf.sqrt() / 2.0 * ti.p2,
        one_term,
        error_scale: nf.powf(0.25) * ti.r + kx.p1 + kx.p2.abs() * nf.powf(-0.25) + kx.r / nf.sqrt(),
        boundary_term: (-nf.powf(ctx.zeta * ctx.epsilon)).exp(),
    })
}

/// Smallest `K` with `|approx − exact| ≤ K·error_scale` over the grid.
pub fn fitted_bnx_constant(ctx: &LaplaceContext, xs: &[f64], ns: &[usize]) -> Result<f64> {
    let mut k = 0.0f64;
    for &n in ns {
        for &x in xs {
            let exact = partial_sums(ctx, n, x)?.b_n_x();
            let approx = laplace_bnx(ctx, n, x)?;
            k = k.max((approx.estimate - exact).abs() / approx.error_scale);
        }
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::special_points;
    use crate::law::{build_law, tail_prob, Standardization, TailQuery};

    fn ctx() -> LaplaceContext {
        LaplaceContext::from_special(&special_points(3).unwrap()[0], 3).unwrap()
    }

    #[test]
    fn context_constants() {
        let c = ctx();
        assert!((c.h4 + 13.5).abs() < 1e-8);
        assert!((c.h5 + 93.530_743_6).abs() < 1e-6);
        let off = ModelParams::new(0.3, 0.2, 3).unwrap();
        assert!(LaplaceContext::new(off, 0.25).is_err());
    }

    #[test]
    fn kernel_identities() {
        let c = ctx();
        let k0 = kernels(&c, 1000, 0.0);
        assert_eq!(k0.p1, 1.0);
        for &t in &[0.2, 0.9, 1.7] {
            let (a, b) = (kernels(&c, 1000, t), kernels(&c, 1000, -t));
            assert_eq!(a.p1, b.p1);
            assert!((a.p2 + b.p2).abs() < 1e-15);
            assert!(a.r > 0.0 && b.r > 0.0);
        }
    }

    #[test]
    fn integrals_agree_across_methods() {
        for kernel in [RemainderKernel::Appendix, RemainderKernel::Summary] {
            let c = ctx().with_kernel(kernel);
            for &x in &[0.0, 0.5, 1.0, 2.0] {
                let a = tail_integrals(&c, 4000, x);
                let b = tail_integrals_quadrature(&c, 4000, x);
                assert!((a.p1 - b.p1).abs() < 1e-9);
                assert!((a.p2 - b.p2).abs() < 1e-9);
                assert!((a.r - b.r).abs() < 1e-9 * a.r.max(1.0));
            }
        }
        let full = 2.0 * tail_integrals_quadrature(&ctx(), 1000, 0.0).p1;
        assert!((p1_integral(&ctx()) - full).abs() < 1e-10);
    }

    #[test]
    fn partition_and_inclusions() {
        let c = ctx();
        let total = log_sum_exp(&ln_y_weights(&c, 2000));
        for &x in &[0.0, 0.5, 1.5] {
            let s = partial_sums(&c, 2000, x).unwrap();
            assert!((s.ln_total() - total).abs() < 1e-12 * total.abs().max(1.0));
            assert!(s.ln_a_hat <= s.ln_a);
            assert!(s.ln_b_x <= s.ln_b);
        }
        assert!(partial_sums(&c, 2000, -0.1).is_err());
    }

    #[test]
    fn reconstruction_matches_exact_tail() {
        let c = ctx();
        let n = 4000;
        let law = build_law(&c.params.sized(n).unwrap()).unwrap();
        for &x in &[0.0, 0.3, 1.0] {
            let s = partial_sums(&c, n, x).unwrap();
            let q = TailQuery::new(Standardization::quartic(c.m_star), false, x, None).unwrap();
            let exact = tail_prob(&law, &q).unwrap();
            assert!((s.reconstructed_tail() - exact).abs() <= 1e-12 * exact);
        }
    }

    #[test]
    fn two_term_approximation_at_origin() {
        let c = ctx();
        let a = laplace_bnx(&c, 1000, 0.0).unwrap();
        let ti = tail_integrals(&c, 1000, 0.0);
        let expected = laplace_bn(&c, 1000) / 2.0 + (1000f64).sqrt() / 2.0 * ti.p2;
        assert!((a.estimate - expected).abs() < 1e-10 * expected);
    }

    #[test]
    fn peak_weight_is_near_one() {
        let c = ctx();
        let n = 4000;
        let lw = ln_y_weights(&c, n);
        let k = ((1.0 + c.m_star) * n as f64 / 2.0).round() as usize;
        assert!(lw[k].abs() < 0.05);
    }
}
