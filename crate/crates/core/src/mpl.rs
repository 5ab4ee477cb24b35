//! Maximum pseudolikelihood estimation of `β` at `h = 0`.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::landscape::{beta_star, classify_point, Interval, DEFAULT_TOL_CURV, DEFAULT_TOL_HEIGHT};
use crate::law::{build_law, DiscreteLaw, MagnetizationLaw, Standardization};
use crate::limit::Gaussian;
use crate::model::ModelParams;
use crate::numeric::ipow;
use crate::rate::{RateAxis, RateReport};
use crate::sampler::AtomSampler;
use crate::stein::conditional_plus;

fn check_t(t: f64) -> Result<()> {
    if t == 0.0 || !(t.abs() < 1.0) {
        return Err(Error::Domain { what: "pseudolikelihood link", value: t });
    }
    Ok(())
}

/// `g(t) = arctanh(t)/(p t^{p−1})`.
pub fn g_link(p: u32, t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(t.atanh() / (p as f64 * ipow(t, p - 1)))
}

/// `g′(t)`.
pub fn g_prime(p: u32, t: f64) -> Result<f64> {
    check_t(t)?;
    let pf = p as f64;
    let u = t.atanh();
    let u1 = 1.0 / (1.0 - t * t);
    Ok((u1 * ipow(t, p - 1) - (pf - 1.0) * u * ipow(t, p - 2)) / (pf * ipow(t, 2 * p - 2)))
}

/// `g″(t)`.
pub fn g_second(p: u32, t: f64) -> Result<f64> {
    check_t(t)?;
    let pf = p as f64;
    let u = t.atanh();
    let u1 = 1.0 / (1.0 - t * t);
    let u2 = 2.0 * t * u1 * u1;
    let tp = ipow(t, p - 1);
    Ok((u2 / tp - 2.0 * (pf - 1.0) * u1 / (tp * t) + pf * (pf - 1.0) * u / (tp * t * t)) / pf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MplStatus {
    Valid,
    /// `X̄ = 0`: no estimate exists.
    ZeroMagnetization,
    /// `|X̄| = 1`: the estimate is infinite.
    Boundary,
    /// `X̄ < 0` with odd `p`: finite but negative.
    NegativeBranch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MplResult {
    /// `NaN` when no estimate exists, `±∞` at the boundary.
    pub beta_hat: f64,
    pub x_bar: f64,
    pub status: MplStatus,
}

impl MplResult {
    pub fn valid(&self) -> bool {
        self.status == MplStatus::Valid
    }
}

/// `β̂ = g(X̄)`.
pub fn mpl_estimate(x_bar: f64, p: u32) -> MplResult {
    let (beta_hat, status) = if x_bar == 0.0 {
        (f64::NAN, MplStatus::ZeroMagnetization)
    } else if x_bar.abs() >= 1.0 {
        let sign = if x_bar < 0.0 && p % 2 == 1 { -1.0 } else { 1.0 };
        (sign * f64::INFINITY, MplStatus::Boundary)
    } else {
        let b = g_link(p, x_bar).expect("checked domain");
        let status = if x_bar < 0.0 && p % 2 == 1 { MplStatus::NegativeBranch } else { MplStatus::Valid };
        (b, status)
    };
    MplResult { beta_hat, x_bar, status }
}

pub fn mpl_from_config(config: &[i8], p: u32) -> Result<MplResult> {
    if config.is_empty() || config.iter().any(|&x| x != 1 && x != -1) {
        return Err(Error::InvalidParams("configuration must be a non-empty ±1 vector".into()));
    }
    let s: i64 = config.iter().map(|&x| x as i64).sum();
    Ok(mpl_estimate(s as f64 / config.len() as f64, p))
}

/// Which single-site conditionals define the pseudolikelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditionals {
    /// `P(X_i = x) = e^{xu}/(2cosh u)`, `u = βpX̄^{p−1}`.
    TanhForm,
    /// Exact Gibbs conditionals given the other spins.
    Exact,
}

/// `ln L(β | X)` at `h = 0`.
pub fn log_pseudolikelihood(config: &[i8], p: u32, beta: f64, kind: Conditionals) -> Result<f64> {
    let n = config.len();
    let params = ModelParams::with_size(beta, 0.0, p, n)?;
    let s: i64 = config.iter().map(|&x| x as i64).sum();
    Ok(match kind {
        Conditionals::TanhForm => {
            let x_bar = s as f64 / n as f64;
            let u = beta * p as f64 * ipow(x_bar, p - 1);
            let ln_2cosh = u.abs() + (-2.0 * u.abs()).exp().ln_1p();
            n as f64 * (u * x_bar - ln_2cosh)
        }
        Conditionals::Exact => {
            let mut total = 0.0;
            for &x in config {
                let pp = conditional_plus(&params, n, s - x as i64);
                total += if x == 1 { pp.ln() } else { (1.0 - pp).ln() };
            }
            total
        }
    })
}

/// Grid argmax of the pseudolikelihood.
pub fn pseudolikelihood_argmax(config: &[i8], p: u32, grid: &[f64], kind: Conditionals) -> Result<f64> {
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for &b in grid {
        let v = log_pseudolikelihood(config, p, b, kind)?;
        if v > best.1 {
            best = (b, v);
        }
    }
    if best.0.is_nan() {
        return Err(Error::EmptyEvent);
    }
    Ok(best.0)
}

/// Positive global maximizer of `H_{β,0,p}` for `β > β*(p)`.
pub fn positive_maximizer(beta: f64, p: u32) -> Result<f64> {
    let bs = beta_star(p)?;
    if beta <= bs {
        return Err(Error::ConsistencyImpossible { beta, beta_star: bs });
    }
    let params = ModelParams::new(beta, 0.0, p)?;
    let land = classify_point(&params, DEFAULT_TOL_HEIGHT, DEFAULT_TOL_CURV);
    land.global_maximizers
        .iter()
        .map(|g| g.m)
        .filter(|&m| m > 0.0)
        .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.max(m))))
        .ok_or_else(|| Error::RegimeMismatch { expected: "positive maximizer".into(), found: land.classification.label().into() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticVariance {
    pub variance: f64,
    /// `−(g′(m))²/H″(m)`.
    pub delta_method: f64,
    pub identity_residual: f64,
}

/// `−H″(m*)/(p² m*^{2p−2})`, cross-checked against the delta method.
pub fn asymptotic_variance(params: &ModelParams, m_star: f64) -> Result<AsymptoticVariance> {
    if params.h() != 0.0 {
        return Err(Error::InvalidParams("pseudolikelihood inference needs h = 0".into()));
    }
    let bs = beta_star(params.p())?;
    if params.beta() <= bs {
        return Err(Error::ConsistencyImpossible { beta: params.beta(), beta_star: bs });
    }
    let p = params.p();
    let d2 = params.free_energy_deriv(m_star, 2);
    if !(m_star > 0.0 && m_star < 1.0) || !(d2 < 0.0) {
        return Err(Error::InvalidMaximizer { m: m_star, second_deriv: d2 });
    }
    let variance = -d2 / ((p * p) as f64 * ipow(m_star, 2 * p - 2));
    let gp = g_prime(p, m_star)?;
    let delta_method = -gp * gp / d2;
    Ok(AsymptoticVariance { variance, delta_method, identity_residual: (variance - delta_method).abs() })
}

/// `(a, b·√N) = (g′(m), g″(m)/2)`.
pub fn quadratic_expansion_constants(p: u32, m: f64) -> Result<(f64, f64)> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::Domain { what: "expansion point", value: m });
    }
    Ok((g_prime(p, m)?, 0.5 * g_second(p, m)?))
}

/// `max |√N(g(m+W/√N) − g(m)) − aW − bW²|·N/|W|³` over the given `W`.
pub fn cubic_remainder_constant(p: u32, m: f64, n: usize, ws: &[f64]) -> Result<f64> {
    let (a, b_scale) = quadratic_expansion_constants(p, m)?;
    let rn = (n as f64).sqrt();
    let g0 = g_link(p, m)?;
    let mut worst = 0.0f64;
    for &w in ws.iter().filter(|w| **w != 0.0) {
        let rem = rn * (g_link(p, m + w / rn)? - g0) - a * w - b_scale / rn * w * w;
        worst = worst.max(rem.abs() * n as f64 / w.abs().powi(3));
    }
    Ok(worst)
}

/// Exact law of `X̄` at `(β, 0, p, N)` conditioned on the basin of `m*`.
pub struct MplSetup {
    pub params: ModelParams,
    pub m_star: f64,
    pub basin: Interval,
    pub variance: AsymptoticVariance,
    pub law: MagnetizationLaw,
}

impl MplSetup {
    pub fn new(beta: f64, p: u32, n: usize) -> Result<Self> {
        let params = ModelParams::with_size(beta, 0.0, p, n)?;
        let m_star = positive_maximizer(beta, p)?;
        let land = classify_point(&params, DEFAULT_TOL_HEIGHT, DEFAULT_TOL_CURV);
        let basin = land.basin(m_star);
        let basin = Interval::new(basin.lo.max(0.0), basin.hi);
        let variance = asymptotic_variance(&params, m_star)?;
        let law = build_law(&params)?;
        Ok(Self { params, m_star, basin, variance, law })
    }

    /// Law of `W = √N(X̄ − m*)` on the basin.
    pub fn w_law(&self) -> Result<DiscreteLaw> {
        self.law.standardized(&Standardization::root_n(self.m_star), Some(&self.basin))
    }

    /// Law of `√N(β̂ − β)` on the basin.
    pub fn estimate_law(&self) -> Result<DiscreteLaw> {
        let rn = (self.law.n() as f64).sqrt();
        let (m, p, beta) = (self.m_star, self.params.p(), self.params.beta());
        Ok(self.w_law()?.pushforward(|w| rn * (g_link(p, m + w / rn).unwrap_or(f64::NAN) - beta)))
    }

    /// Kolmogorov distance of `√N(β̂ − β)` to its Gaussian limit.
    pub fn distance(&self) -> Result<f64> {
        let target = Gaussian::new(0.0, self.variance.variance)?;
        Ok(self.estimate_law()?.kolmogorov_to(&target))
    }

    /// Kolmogorov distance of `W` to `N(0, −1/H″(m*))`.
    pub fn w_distance(&self) -> Result<f64> {
        let d2 = self.params.free_energy_deriv(self.m_star, 2);
        Ok(self.w_law()?.kolmogorov_to(&Gaussian::new(0.0, -1.0 / d2)?))
    }

    /// Sample variance of `√N(β̂ − β)` over `n_rep` exact draws on the basin.
    pub fn sampled_variance<R: Rng + ?Sized>(&self, rng: &mut R, n_rep: usize) -> Result<f64> {
        let cond = self.law.condition(&self.basin)?;
        let sampler = AtomSampler::new(&cond);
        let rn = (self.law.n() as f64).sqrt();
        let p = self.params.p();
        let vals: Vec<f64> = (0..n_rep)
            .map(|_| rn * (mpl_estimate(cond.atom(sampler.draw(rng)), p).beta_hat - self.params.beta()))
            .collect();
        let mean = vals.iter().sum::<f64>() / n_rep as f64;
        Ok(vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_rep as f64 - 1.0))
    }
}

/// Distance of `√N(β̂ − β)` to its limit across `ns`, fitted against
/// `ln(N/ln N)`.
pub fn mpl_be_experiment(beta: f64, p: u32, ns: &[usize]) -> Result<RateReport> {
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        rows.push((n, MplSetup::new(beta, p, n)?.distance()?));
    }
    RateReport::new("mpl_kolmogorov", RateAxis::LogNOverLogN, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixed_point_map;
    use crate::sampler::stream_rng;

    fn fd(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn link_inverts_fixed_point() {
        for (beta, p) in [(0.7, 3u32), (0.8, 4), (1.2, 5)] {
            let m = positive_maximizer(beta, p).unwrap();
            let params = ModelParams::new(beta, 0.0, p).unwrap();
            assert!((m - fixed_point_map(&params, m)).abs() < 1e-12);
            assert!((g_link(p, m).unwrap() - beta).abs() < 1e-12);
            let r = mpl_estimate(m, p);
            assert!(r.valid() && (r.beta_hat - beta).abs() < 1e-12);
        }
    }

    #[test]
    fn link_behaviour_near_zero_and_boundary() {
        let t: f64 = 1e-4;
        assert!((g_link(3, t).unwrap() * 3.0 * t - 1.0).abs() < 1e-7);
        assert!(g_link(3, 0.0).is_err() && g_link(3, 1.0).is_err());
        assert_eq!(mpl_estimate(0.0, 3).status, MplStatus::ZeroMagnetization);
        let all_plus = mpl_from_config(&[1; 20], 3).unwrap();
        assert_eq!(all_plus.status, MplStatus::Boundary);
        assert_eq!(all_plus.beta_hat, f64::INFINITY);
        assert_eq!(mpl_estimate(-0.5, 3).status, MplStatus::NegativeBranch);
        assert!(mpl_estimate(-0.5, 3).beta_hat < 0.0);
        assert!(mpl_estimate(-0.5, 4).valid());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for p in [3u32, 4, 5] {
            for &t in &[0.2, 0.55, 0.9] {
                let g1 = fd(|x| g_link(p, x).unwrap(), t, 1e-4);
                let g2 = fd(|x| g_prime(p, x).unwrap(), t, 1e-4);
                assert!(((g_prime(p, t).unwrap() - g1) / g1).abs() < 1e-6);
                assert!(((g_second(p, t).unwrap() - g2) / g2).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn variance_identity_and_threshold() {
        let m = positive_maximizer(0.75, 3).unwrap();
        let v = asymptotic_variance(&ModelParams::new(0.75, 0.0, 3).unwrap(), m).unwrap();
        assert!(v.variance > 0.0 && v.identity_residual < 1e-10);
        assert!(matches!(positive_maximizer(0.6, 3), Err(Error::ConsistencyImpossible { .. })));
        assert!(matches!(
            asymptotic_variance(&ModelParams::new(0.6, 0.0, 3).unwrap(), 0.5),
            Err(Error::ConsistencyImpossible { .. })
        ));
    }

    #[test]
    fn cubic_remainder_stable() {
        let m = positive_maximizer(0.75, 3).unwrap();
        let sd = (-1.0 / ModelParams::new(0.75, 0.0, 3).unwrap().free_energy_deriv(m, 2)).sqrt();
        let ws: Vec<f64> = (1..=40).map(|i| (i as f64 * 0.1 - 2.05) * sd).collect();
        let c1 = cubic_remainder_constant(3, m, 1000, &ws).unwrap();
        let c4 = cubic_remainder_constant(3, m, 4000, &ws).unwrap();
        assert!(c1 / c4 < 1.5 && c4 / c1 < 1.5, "{c1} {c4}");
        let (_, b) = quadratic_expansion_constants(3, m).unwrap();
        assert_eq!(b, 0.5 * g_second(3, m).unwrap());
    }

    #[test]
    fn argmax_matches_link() {
        let n = 50;
        let config: Vec<i8> = (0..n).map(|i| if i < 38 { 1 } else { -1 }).collect();
        let grid: Vec<f64> = (1..=4000).map(|i| i as f64 * 5e-4).collect();
        let got = pseudolikelihood_argmax(&config, 3, &grid, Conditionals::TanhForm).unwrap();
        let want = mpl_from_config(&config, 3).unwrap().beta_hat;
        assert!((got - want).abs() <= 5e-4);
        let exact = pseudolikelihood_argmax(&config, 3, &grid, Conditionals::Exact).unwrap();
        assert!((exact - want).abs() < 0.1);
    }

    #[test]
    fn linear_pushforward_preserves_distance() {
        let s = MplSetup::new(0.75, 3, 1000).unwrap();
        let d2 = s.params.free_energy_deriv(s.m_star, 2);
        let w = s.w_law().unwrap();
        let base = w.kolmogorov_to(&Gaussian::new(0.0, -1.0 / d2).unwrap());
        let (a, b) = (2.5, -0.3);
        let moved = w.pushforward(|x| a * x + b);
        let d = moved.kolmogorov_to(&Gaussian::new(b, -a * a / d2).unwrap());
        assert!((d - base).abs() < 1e-12);
        assert!((s.w_distance().unwrap() - base).abs() < 1e-15);
    }

    #[test]
    fn sampled_variance_close_to_formula() {
        let s = MplSetup::new(0.75, 3, 4000).unwrap();
        let v = s.sampled_variance(&mut stream_rng(21, 0), 100_000).unwrap();
        assert!((v / s.variance.variance - 1.0).abs() < 0.05, "{v} {}", s.variance.variance);
    }

    #[test]
    fn link_decreasing_where_derivative_negative() {
        for p in [3u32, 4, 5] {
            let grid: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
            for w in grid.windows(2) {
                let (a, b) = (w[0], w[1]);
                if g_prime(p, a).unwrap() < 0.0 && g_prime(p, b).unwrap() < 0.0 {
                    assert!(g_link(p, b).unwrap() < g_link(p, a).unwrap());
                }
            }
        }
    }

    #[test]
    fn estimate_space_distance_within_log_budget() {
        let mut cs = Vec::new();
        for n in [1000usize, 4000] {
            let s = MplSetup::new(0.7, 3, n).unwrap();
            let nf = n as f64;
            cs.push((s.distance().unwrap() - s.w_distance().unwrap()).max(0.0) * nf.sqrt() / nf.ln());
        }
        assert!(cs[1] <= 2.0 * cs[0] + 1e-3, "{cs:?}");
    }
}
