//! Exact finite-N law of the magnetization, conditioning, tails, moments,
//! Kolmogorov distances and mixture weights.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::landscape::{Classification, Interval, Landscape};
use crate::limit::Law;
use crate::model::ModelParams;
use crate::numeric::{ipow, ln_binomial, ln_factorials, log_sum_exp, pairwise_sum};

/// Largest `N` accepted by [`brute_force_pmf`].
pub const BRUTE_FORCE_LIMIT: usize = 20;
/// Largest `N` accepted by [`build_law`].
pub const LAW_SIZE_LIMIT: usize = 50_000_000;

/// Law of `X̄ = S_N/N` on the lattice `{−1, −1+2/N, …, 1}`. Atom `k`
/// corresponds to `S_N = 2k − N`.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnetizationLaw {
    params: ModelParams,
    n: usize,
    log_weights: Vec<f64>,
    log_norm: f64,
    probs: Vec<f64>,
}

impl MagnetizationLaw {
    fn from_log_weights(params: ModelParams, n: usize, log_weights: Vec<f64>) -> Result<Self> {
        let log_norm = log_sum_exp(&log_weights);
        if log_norm == f64::NEG_INFINITY {
            return Err(Error::EmptyEvent);
        }
        let probs = log_weights.iter().map(|&w| (w - log_norm).exp()).collect();
        Ok(Self { params, n, log_weights, log_norm, probs })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of atoms (`N + 1`).
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Magnetization of atom `k`.
    #[inline]
    pub fn atom(&self, k: usize) -> f64 {
        -1.0 + 2.0 * k as f64 / self.n as f64
    }

    /// `S_N` of atom `k`.
    #[inline]
    pub fn spin_sum(&self, k: usize) -> i64 {
        2 * k as i64 - self.n as i64
    }

    pub fn support(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.atom(k)).collect()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.probs[k]
    }

    /// `P(X̄ ∈ A)`.
    pub fn mass_in(&self, a: &Interval) -> f64 {
        let lw: Vec<f64> = (0..self.len())
            .filter(|&k| a.contains(self.atom(k)))
            .map(|k| self.log_weights[k])
            .collect();
        (log_sum_exp(&lw) - self.log_norm).exp()
    }

    /// Law of `X̄` conditioned on `X̄ ∈ A`.
    pub fn condition(&self, a: &Interval) -> Result<Self> {
        let lw = (0..self.len())
            .map(|k| if a.contains(self.atom(k)) { self.log_weights[k] } else { f64::NEG_INFINITY })
            .collect();
        Self::from_log_weights(self.params, self.n, lw)
    }

    /// `E[X̄]`.
    pub fn mean(&self) -> f64 {
        let terms: Vec<f64> = (0..self.len()).map(|k| self.probs[k] * self.atom(k)).collect();
        pairwise_sum(&terms)
    }

    /// `Var[X̄]`.
    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        let terms: Vec<f64> = (0..self.len())
            .map(|k| {
                let d = self.atom(k) - mu;
                self.probs[k] * d * d
            })
            .collect();
        pairwise_sum(&terms)
    }

    /// Law of the standardized statistic `W` of `s`, optionally conditioned.
    pub fn standardized(&self, s: &Standardization, condition: Option<&Interval>) -> Result<DiscreteLaw> {
        let base;
        let law = match condition {
            Some(a) => {
                base = self.condition(a)?;
                &base
            }
            None => self,
        };
        let alpha = s.alpha(self.n);
        let pts: Vec<(f64, f64)> = (0..law.len())
            .filter(|&k| law.log_weights[k] > f64::NEG_INFINITY)
            .map(|k| (s.value(law.spin_sum(k), self.n, alpha), law.probs[k]))
            .collect();
        Ok(DiscreteLaw::from_points(pts))
    }
}

/// Exact law via log-binomials and a max-shifted pairwise reduction.
pub fn build_law(params: &ModelParams) -> Result<MagnetizationLaw> {
    let n = params.require_n()?;
    if n > LAW_SIZE_LIMIT {
        return Err(Error::SizeLimit { n, limit: LAW_SIZE_LIMIT });
    }
    let lf = ln_factorials(n);
    let nf = n as f64;
    let (beta, h, p) = (params.beta(), params.h(), params.p());
    let lw = (0..=n)
        .map(|k| {
            let m = -1.0 + 2.0 * k as f64 / nf;
            ln_binomial(&lf, n, k) + nf * (beta * ipow(m, p) + h * m)
        })
        .collect();
    MagnetizationLaw::from_log_weights(*params, n, lw)
}

/// Enumeration of all `2^N` configurations (`N ≤ 20`), using
/// `Σ_{i_1..i_p} X_{i_1}⋯X_{i_p} = S^p`.
pub fn brute_force_pmf(params: &ModelParams) -> Result<MagnetizationLaw> {
    let n = params.require_n()?;
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeLimit { n, limit: BRUTE_FORCE_LIMIT });
    }
    let nf = n as f64;
    let mut counts = vec![0u64; n + 1];
    for config in 0u64..(1u64 << n) {
        let mut s: i64 = 0;
        for i in 0..n {
            s += if config >> i & 1 == 1 { 1 } else { -1 };
        }
        counts[((s + n as i64) / 2) as usize] += 1;
    }
    let lw = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let s = (2 * k) as f64 - nf;
            let energy = params.beta() * nf.powi(1 - params.p() as i32) * ipow(s, params.p()) + params.h() * s;
            (c as f64).ln() + energy
        })
        .collect();
    MagnetizationLaw::from_log_weights(*params, n, lw)
}

/// Normalizing exponent of a standardized statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScaleExponent {
    /// `α_N ∝ √N`.
    Half,
    /// `α_N ∝ N^{3/4}`.
    ThreeQuarters,
}

/// `W = (S_N − N·center)/α_N` with `α_N = spread·N^{exponent}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Standardization {
    pub center: f64,
    pub exponent: ScaleExponent,
    pub spread: f64,
}

impl Standardization {
    /// Gaussian scaling `α_N = √(−N/H″(m))`.
    pub fn clt(center: f64, second_deriv: f64) -> Result<Self> {
        if !(second_deriv < 0.0) {
            return Err(Error::InvalidMaximizer { m: center, second_deriv });
        }
        Ok(Self { center, exponent: ScaleExponent::Half, spread: (-1.0 / second_deriv).sqrt() })
    }

    /// Quartic scaling `α_N = N^{3/4}`.
    pub fn quartic(center: f64) -> Self {
        Self { center, exponent: ScaleExponent::ThreeQuarters, spread: 1.0 }
    }

    /// Plain `√N` scaling without a variance factor.
    pub fn root_n(center: f64) -> Self {
        Self { center, exponent: ScaleExponent::Half, spread: 1.0 }
    }

    pub fn alpha(&self, n: usize) -> f64 {
        let nf = n as f64;
        self.spread
            * match self.exponent {
                ScaleExponent::Half => nf.sqrt(),
                ScaleExponent::ThreeQuarters => nf.powf(0.75),
            }
    }

    #[inline]
    pub fn value(&self, spin_sum: i64, n: usize, alpha: f64) -> f64 {
        (spin_sum as f64 - n as f64 * self.center) / alpha
    }
}

/// `P((−1)^r W > x | X̄ ∈ A)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailQuery {
    pub scaling: Standardization,
    /// `true` for the lower tail (`r = 1`).
    pub negate: bool,
    pub x: f64,
    pub condition: Option<Interval>,
}

impl TailQuery {
    pub fn new(scaling: Standardization, negate: bool, x: f64, condition: Option<Interval>) -> Result<Self> {
        if !(x >= 0.0) {
            return Err(Error::Domain { what: "tail threshold", value: x });
        }
        if let Some(a) = &condition {
            if !a.contains(scaling.center) {
                return Err(Error::InvalidParams(format!(
                    "center {} not inside conditioning interval ({}, {})",
                    scaling.center, a.lo, a.hi
                )));
            }
        }
        Ok(Self { scaling, negate, x, condition })
    }
}

/// `ln P((−1)^r W > x | A)`.
pub fn ln_tail_prob(law: &MagnetizationLaw, q: &TailQuery) -> Result<f64> {
    let alpha = q.scaling.alpha(law.n);
    let sign = if q.negate { -1.0 } else { 1.0 };
    let mut num = Vec::new();
    let mut den = Vec::new();
    for k in 0..law.len() {
        if let Some(a) = &q.condition {
            if !a.contains(law.atom(k)) {
                continue;
            }
        }
        let lw = law.log_weights[k];
        den.push(lw);
        if sign * q.scaling.value(law.spin_sum(k), law.n, alpha) > q.x {
            num.push(lw);
        }
    }
    let ln_den = log_sum_exp(&den);
    if ln_den == f64::NEG_INFINITY {
        return Err(Error::EmptyEvent);
    }
    Ok(log_sum_exp(&num) - ln_den)
}

/// `P((−1)^r W > x | A)`.
pub fn tail_prob(law: &MagnetizationLaw, q: &TailQuery) -> Result<f64> {
    ln_tail_prob(law, q).map(f64::exp)
}

/// Finite law on the real line with sorted, distinct support points.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    values: Vec<f64>,
    probs: Vec<f64>,
    cum: Vec<f64>,
}

impl DiscreteLaw {
    /// Builds from `(value, probability)` pairs in any order; equal values merge.
    pub fn from_points(mut pts: Vec<(f64, f64)>) -> Self {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::with_capacity(pts.len());
        let mut probs: Vec<f64> = Vec::with_capacity(pts.len());
        for (v, p) in pts {
            if values.last() == Some(&v) {
                *probs.last_mut().expect("paired") += p;
            } else {
                values.push(v);
                probs.push(p);
            }
        }
        let mut cum = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cum.push(acc);
        }
        Self { values, probs, cum }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Image law under `f`.
    pub fn pushforward<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self::from_points(self.values.iter().map(|&v| f(v)).zip(self.probs.iter().copied()).collect())
    }

    /// `E[W^s]` for `s = 0..=max_order`.
    pub fn moments(&self, max_order: usize) -> Vec<f64> {
        (0..=max_order)
            .map(|s| {
                let terms: Vec<f64> =
                    self.values.iter().zip(&self.probs).map(|(&v, &p)| p * v.powi(s as i32)).collect();
                pairwise_sum(&terms)
            })
            .collect()
    }

    /// `sup_x |F(x) − G(x)|`, evaluated on both sides of each atom. Exact for
    /// continuous targets and for discrete targets whose atoms lie in this
    /// law's support.
    pub fn kolmogorov_to(&self, target: &dyn Law) -> f64 {
        let mut best = 0.0f64;
        let mut below = 0.0;
        for (i, &w) in self.values.iter().enumerate() {
            let at = self.cum[i];
            let d = (at - target.cdf(w)).abs().max((below - target.cdf_left(w)).abs());
            best = best.max(d);
            below = at;
        }
        best
    }
}

impl Law for DiscreteLaw {
    fn cdf(&self, x: f64) -> f64 {
        let i = self.values.partition_point(|&v| v <= x);
        if i == 0 {
            0.0
        } else {
            self.cum[i - 1]
        }
    }

    fn cdf_left(&self, x: f64) -> f64 {
        let i = self.values.partition_point(|&v| v < x);
        if i == 0 {
            0.0
        } else {
            self.cum[i - 1]
        }
    }

    fn survival(&self, x: f64) -> f64 {
        let i = self.values.partition_point(|&v| v <= x);
        pairwise_sum(&self.probs[i..])
    }
}

/// Kolmogorov distance between the (conditional) law of `W` and `target`.
pub fn kolmogorov_distance(
    law: &MagnetizationLaw,
    scaling: &Standardization,
    condition: Option<&Interval>,
    target: &dyn Law,
) -> Result<f64> {
    Ok(law.standardized(scaling, condition)?.kolmogorov_to(target))
}

/// `E[W^s]` for `s = 0..=max_order` (at most 6).
pub fn standardized_moments(
    law: &MagnetizationLaw,
    scaling: &Standardization,
    condition: Option<&Interval>,
    max_order: usize,
) -> Result<Vec<f64>> {
    if max_order > 6 {
        return Err(Error::InvalidParams(format!("moment order {max_order} exceeds 6")));
    }
    Ok(law.standardized(scaling, condition)?.moments(max_order))
}

/// Limiting weights `p_k ∝ [(m_k² − 1)H″(m_k)]^{−1/2}` at a critical point.
pub fn mixture_weights(landscape: &Landscape, tol_curv: f64) -> Result<Vec<f64>> {
    if !matches!(landscape.classification, Classification::Critical { .. }) {
        return Err(Error::RegimeMismatch {
            expected: "critical".into(),
            found: landscape.classification.to_string(),
        });
    }
    let mut raw = Vec::with_capacity(landscape.global_maximizers.len());
    for g in &landscape.global_maximizers {
        if g.second_deriv.abs() <= tol_curv || g.second_deriv > 0.0 {
            return Err(Error::DegenerateCurvature { m: g.m, second_deriv: g.second_deriv });
        }
        raw.push(1.0 / ((g.m * g.m - 1.0) * g.second_deriv).sqrt());
    }
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}
