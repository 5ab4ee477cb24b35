//! Limiting laws (Gaussian, quartic, critical mixtures), quartic tail
//! moments, the first-order correction `G`, and moderate-deviation ratios.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::landscape::{Classification, Interval, Landscape};
use crate::law::{ln_tail_prob, MagnetizationLaw, Standardization, TailQuery};
use crate::special::{
    gaussian_cdf, gaussian_ln_survival, gaussian_survival, gamma, gamma_q, ln_gamma, ln_incomplete_gamma_upper,
};

/// A distribution on the real line given by its CDF.
pub trait Law {
    /// `P(Z ≤ x)`.
    fn cdf(&self, x: f64) -> f64;

    /// `P(Z < x)`; equals [`Law::cdf`] for continuous laws.
    fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x)
    }

    /// `P(Z > x)`.
    fn survival(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    /// `ln P(Z > x)`.
    fn ln_survival(&self, x: f64) -> f64 {
        self.survival(x).ln()
    }

    /// `ln P(Z < x)`.
    fn ln_cdf_left(&self, x: f64) -> f64 {
        self.cdf_left(x).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gaussian {
    pub mean: f64,
    pub variance: f64,
}

impl Gaussian {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidParams(format!("variance must be positive, got {variance}")));
        }
        Ok(Self { mean, variance })
    }

    pub fn standard() -> Self {
        Self { mean: 0.0, variance: 1.0 }
    }

    fn z(&self, x: f64) -> f64 {
        (x - self.mean) / self.variance.sqrt()
    }
}

impl Law for Gaussian {
    fn cdf(&self, x: f64) -> f64 {
        gaussian_cdf(self.z(x))
    }

    fn survival(&self, x: f64) -> f64 {
        gaussian_survival(self.z(x))
    }

    fn ln_survival(&self, x: f64) -> f64 {
        gaussian_ln_survival(self.z(x))
    }

    fn ln_cdf_left(&self, x: f64) -> f64 {
        gaussian_ln_survival(-self.z(x))
    }
}

/// Symmetric law with density `(2c^{1/4}/Γ(¼))·e^{−c x⁴}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuarticLaw {
    pub c: f64,
    pub norm_const: f64,
}

impl QuarticLaw {
    pub fn from_c(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParams(format!("quartic constant must be positive, got {c}")));
        }
        Ok(Self { c, norm_const: 2.0 * c.powf(0.25) / gamma(0.25) })
    }

    /// From `H^{(4)}(m_*) < 0`, with `c = −H^{(4)}/24`.
    pub fn from_fourth_deriv(h4: f64) -> Result<Self> {
        Self::from_c(-h4 / 24.0)
    }

    pub fn density(&self, x: f64) -> f64 {
        self.norm_const * (-self.c * x * x * x * x).exp()
    }

    fn upper(&self, x: f64) -> f64 {
        0.5 * gamma_q(0.25, self.c * x * x * x * x)
    }

    fn ln_upper(&self, x: f64) -> f64 {
        ln_incomplete_gamma_upper(0.25, self.c * x * x * x * x) - ln_gamma(0.25) - std::f64::consts::LN_2
    }
}

impl Law for QuarticLaw {
    fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.upper(-x)
        } else {
            1.0 - self.upper(x)
        }
    }

    fn survival(&self, x: f64) -> f64 {
        if x >= 0.0 {
            self.upper(x)
        } else {
            1.0 - self.upper(-x)
        }
    }

    fn ln_survival(&self, x: f64) -> f64 {
        if x >= 0.0 {
            self.ln_upper(x)
        } else {
            self.survival(x).ln()
        }
    }

    fn ln_cdf_left(&self, x: f64) -> f64 {
        if x <= 0.0 {
            self.ln_upper(-x)
        } else {
            self.cdf(x).ln()
        }
    }
}

/// Finite mixture of point masses `Σ p_k δ_{m_k}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mixture {
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Mixture {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() || atoms.is_empty() {
            return Err(Error::InvalidParams("mixture needs matching non-empty atoms and weights".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!("mixture weights must be a distribution (sum {total})")));
        }
        Ok(Self { atoms, weights })
    }
}

impl Law for Mixture {
    fn cdf(&self, x: f64) -> f64 {
        self.atoms.iter().zip(&self.weights).filter(|(&a, _)| a <= x).map(|(_, &w)| w).sum()
    }

    fn cdf_left(&self, x: f64) -> f64 {
        self.atoms.iter().zip(&self.weights).filter(|(&a, _)| a < x).map(|(_, &w)| w).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LimitLaw {
    Gaussian(Gaussian),
    Quartic(QuarticLaw),
    Mixture(Mixture),
}

impl Law for LimitLaw {
    fn cdf(&self, x: f64) -> f64 {
        match self {
            LimitLaw::Gaussian(g) => g.cdf(x),
            LimitLaw::Quartic(q) => q.cdf(x),
            LimitLaw::Mixture(m) => m.cdf(x),
        }
    }

    fn cdf_left(&self, x: f64) -> f64 {
        match self {
            LimitLaw::Gaussian(g) => g.cdf_left(x),
            LimitLaw::Quartic(q) => q.cdf_left(x),
            LimitLaw::Mixture(m) => m.cdf_left(x),
        }
    }

    fn survival(&self, x: f64) -> f64 {
        match self {
            LimitLaw::Gaussian(g) => g.survival(x),
            LimitLaw::Quartic(q) => q.survival(x),
            LimitLaw::Mixture(m) => m.survival(x),
        }
    }

    fn ln_survival(&self, x: f64) -> f64 {
        match self {
            LimitLaw::Gaussian(g) => g.ln_survival(x),
            LimitLaw::Quartic(q) => q.ln_survival(x),
            LimitLaw::Mixture(m) => m.ln_survival(x),
        }
    }

    fn ln_cdf_left(&self, x: f64) -> f64 {
        match self {
            LimitLaw::Gaussian(g) => g.ln_cdf_left(x),
            LimitLaw::Quartic(q) => q.ln_cdf_left(x),
            LimitLaw::Mixture(m) => m.ln_cdf_left(x),
        }
    }
}

/// `ln ∫_x^∞ t^k e^{−c t⁴} dt` for `x ≥ 0`, via
/// `¼ c^{−(k+1)/4} Γ((k+1)/4, c x⁴)`.
pub fn ln_tail_moment(c: f64, k: u32, x: f64) -> f64 {
    let a = (k as f64 + 1.0) / 4.0;
    (0.25f64).ln() - a * c.ln() + ln_incomplete_gamma_upper(a, c * x * x * x * x)
}

/// `∫_x^∞ t^k e^{−c t⁴} dt` for `x ≥ 0`.
pub fn tail_moment(c: f64, k: u32, x: f64) -> f64 {
    ln_tail_moment(c, k, x).exp()
}

/// `G(x) = P̂₂(x)/P̂₁(x)` with `P̂₁ = ∫_x^∞ e^{−ct⁴}dt` and
/// `P̂₂ = ∫_x^∞ e^{−ct⁴}(H5 t⁵/120 + m t/(1−m²))dt`.
pub fn correction_g(law: &QuarticLaw, m_star: f64, h5: f64, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain { what: "correction G", value: x });
    }
    let c = law.c;
    let base = ln_tail_moment(c, 0, x);
    let r5 = (ln_tail_moment(c, 5, x) - base).exp();
    let r1 = (ln_tail_moment(c, 1, x) - base).exp();
    Ok(h5 / 120.0 * r5 + m_star / (1.0 - m_star * m_star) * r1)
}

/// Regime under which a moderate-deviation ratio is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    Regular,
    /// Conditioned on the neighbourhood of maximizer `k` (ascending order).
    Critical(usize),
    Special,
}

impl Regime {
    /// Polynomial degree `q` in the normalization `1 + x^q`.
    pub fn q(&self) -> i32 {
        match self {
            Regime::Special => 5,
            _ => 3,
        }
    }

    /// Exponent `e` of the admissible range `x ≤ C N^e`.
    pub fn range_exponent(&self) -> f64 {
        match self {
            Regime::Special => 1.0 / 20.0,
            _ => 1.0 / 6.0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Regime::Regular => "regular",
            Regime::Critical(_) => "critical",
            Regime::Special => "special",
        }
    }
}

/// Centering, scaling, conditioning and limit law for a regime.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSetup {
    pub scaling: Standardization,
    pub condition: Option<Interval>,
    pub limit: LimitLaw,
}

/// Checks `regime` against the classification and assembles its setup.
pub fn regime_setup(landscape: &Landscape, regime: Regime) -> Result<RegimeSetup> {
    let mismatch = || Error::RegimeMismatch {
        expected: regime.label().into(),
        found: landscape.classification.to_string(),
    };
    match (regime, landscape.classification) {
        (Regime::Regular, Classification::Regular) => {
            let g = landscape.global_maximizers[0];
            Ok(RegimeSetup {
                scaling: Standardization::clt(g.m, g.second_deriv)?,
                condition: None,
                limit: LimitLaw::Gaussian(Gaussian::standard()),
            })
        }
        (Regime::Critical(k), Classification::Critical { .. }) => {
            let g = *landscape
                .global_maximizers
                .get(k)
                .ok_or_else(|| Error::InvalidParams(format!("maximizer index {k} out of range")))?;
            Ok(RegimeSetup {
                scaling: Standardization::clt(g.m, g.second_deriv)?,
                condition: Some(landscape.neighborhood(k)?),
                limit: LimitLaw::Gaussian(Gaussian::standard()),
            })
        }
        (Regime::Special, Classification::Special) => {
            let g = landscape.global_maximizers[0];
            let h4 = landscape.params.free_energy_deriv(g.m, 4);
            Ok(RegimeSetup {
                scaling: Standardization::quartic(g.m),
                condition: None,
                limit: LimitLaw::Quartic(QuarticLaw::from_fourth_deriv(h4)?),
            })
        }
        _ => Err(mismatch()),
    }
}

/// Upper end `C·N^e` of the moderate-deviation range.
pub fn md_x_max(regime: Regime, n: usize, c_const: f64) -> f64 {
    c_const * (n as f64).powf(regime.range_exponent())
}

/// Evenly spaced grid of `points` values on `[0, C·N^e]`.
pub fn md_x_grid(regime: Regime, n: usize, c_const: f64, points: usize) -> Vec<f64> {
    let top = md_x_max(regime, n, c_const);
    if points <= 1 {
        return vec![0.0];
    }
    (0..points).map(|i| top * i as f64 / (points - 1) as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MdRow {
    pub x: f64,
    /// `1` for the lower tail.
    pub r: u8,
    pub tail_exact: f64,
    pub tail_limit: f64,
    pub ratio: f64,
    pub normalized_error: f64,
    /// Set when a tail is not representable in double precision; such rows
    /// are excluded from [`MdReport::max_normalized_error`].
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MdReport {
    pub n: usize,
    pub q: i32,
    pub rows: Vec<MdRow>,
}

impl MdReport {
    pub fn max_normalized_error(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| !r.flagged)
            .map(|r| r.normalized_error)
            .fold(0.0, f64::max)
    }
}

/// Ratio rows of exact conditional tails against `target` tails, computed
/// in log-space.
#[allow(clippy::too_many_arguments)]
pub fn md_rows(
    law: &MagnetizationLaw,
    scaling: &Standardization,
    condition: Option<&Interval>,
    target: &dyn Law,
    q: i32,
    x_grid: &[f64],
    negate: bool,
) -> Result<Vec<MdRow>> {
    let min_ln = f64::MIN_POSITIVE.ln();
    x_grid
        .iter()
        .map(|&x| {
            let query = TailQuery::new(*scaling, negate, x, condition.copied())?;
            let ln_exact = ln_tail_prob(law, &query)?;
            let ln_limit = if negate { target.ln_cdf_left(-x) } else { target.ln_survival(x) };
            let flagged = !(ln_exact > min_ln && ln_limit > min_ln);
            let ratio = (ln_exact - ln_limit).exp();
            Ok(MdRow {
                x,
                r: negate as u8,
                tail_exact: ln_exact.exp(),
                tail_limit: ln_limit.exp(),
                ratio,
                normalized_error: (ratio - 1.0).abs() / (1.0 + x.powi(q)),
                flagged,
            })
        })
        .collect()
}

/// Moderate-deviation report for one regime and sign.
pub fn md_report(
    law: &MagnetizationLaw,
    landscape: &Landscape,
    regime: Regime,
    x_grid: &[f64],
    negate: bool,
) -> Result<MdReport> {
    let setup = regime_setup(landscape, regime)?;
    let rows = md_rows(law, &setup.scaling, setup.condition.as_ref(), &setup.limit, regime.q(), x_grid, negate)?;
    Ok(MdReport { n: law.n(), q: regime.q(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{classify_point, special_points, DEFAULT_TOL_CURV, DEFAULT_TOL_HEIGHT};
    use crate::law::build_law;
    use crate::model::ModelParams;
    use crate::numeric::{integrate, integrate_to_infinity};

    fn quartic() -> QuarticLaw {
        QuarticLaw::from_fourth_deriv(-13.5).unwrap()
    }

    #[test]
    fn quartic_normalization_and_symmetry() {
        let q = quartic();
        let total = 2.0 * integrate_to_infinity(|t| q.density(t), 0.0, 1e-15, 1e-13);
        assert!((total - 1.0).abs() < 1e-10);
        assert_eq!(q.cdf(0.0), 0.5);
        for &x in &[0.3, 1.0, 2.5] {
            assert_eq!(q.density(x), q.density(-x));
            assert!((q.cdf(-x) - q.survival(x)).abs() < 1e-14);
        }
        assert!(QuarticLaw::from_fourth_deriv(1.0).is_err());
    }

    #[test]
    fn quartic_survival_matches_quadrature() {
        let q = quartic();
        for &x in &[0.5, 1.0, 2.0] {
            let quad = integrate_to_infinity(|t| q.density(t), x, 1e-16, 1e-13);
            assert!((q.survival(x) - quad).abs() < 1e-10);
            assert!((q.ln_survival(x) - quad.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn tail_moments_match_quadrature() {
        let c = 0.5625;
        for k in [0u32, 1, 5] {
            for &x in &[0.0, 0.7, 1.5] {
                let quad = integrate_to_infinity(|t| t.powi(k as i32) * (-c * t.powi(4)).exp(), x, 1e-16, 1e-13);
                assert!((tail_moment(c, k, x) - quad).abs() < 1e-10 * quad.max(1.0));
            }
        }
    }

    #[test]
    fn correction_g_cases() {
        let q = quartic();
        assert_eq!(correction_g(&q, 0.0, 0.0, 1.3).unwrap(), 0.0);
        let (m, h5) = (1.0 / 3f64.sqrt(), -93.530_743_6);
        let c = q.c;
        let p1 = integrate(|t| (-c * t.powi(4)).exp(), 0.0, 12.0, 1e-15, 1e-13);
        let p2 = integrate(
            |t| (-c * t.powi(4)).exp() * (h5 / 120.0 * t.powi(5) + m / (1.0 - m * m) * t),
            0.0,
            12.0,
            1e-15,
            1e-13,
        );
        assert!((correction_g(&q, m, h5, 0.0).unwrap() - p2 / p1).abs() < 1e-10);
        for i in 0..=100 {
            let x = i as f64 / 10.0;
            let g = correction_g(&q, m, h5, x).unwrap();
            assert!(g.is_finite() && (g / (1.0 + x.powi(5))).abs() < 1.0);
        }
        assert!(correction_g(&q, m, h5, -1.0).is_err());
    }

    #[test]
    fn gaussian_survival_is_decreasing() {
        let g = Gaussian::standard();
        let mut prev = 1.0;
        for i in -50..=50 {
            let s = g.survival(i as f64 / 10.0);
            assert!(s < prev);
            prev = s;
        }
        assert!(Gaussian::new(0.0, 0.0).is_err());
    }

    #[test]
    fn mixture_cdf_steps() {
        let m = Mixture::new(vec![-0.5, 0.8], vec![0.3, 0.7]).unwrap();
        assert_eq!(m.cdf(-0.5), 0.3);
        assert_eq!(m.cdf_left(-0.5), 0.0);
        assert!((m.cdf(1.0) - 1.0).abs() < 1e-15);
        assert!(Mixture::new(vec![0.0], vec![0.5]).is_err());
    }

    #[test]
    fn regular_ratio_at_zero_is_near_one() {
        let p = ModelParams::with_size(0.3, 0.2, 3, 4000).unwrap();
        let land = classify_point(&p, DEFAULT_TOL_HEIGHT, DEFAULT_TOL_CURV);
        let law = build_law(&p).unwrap();
        let rep = md_report(&law, &land, Regime::Regular, &[0.0], false).unwrap();
        assert!((rep.rows[0].ratio - 1.0).abs() < 0.05);
        assert!(matches!(md_report(&law, &land, Regime::Special, &[0.0], false), Err(Error::RegimeMismatch { .. })));
    }

    #[test]
    fn exact_law_as_its_own_limit_gives_unit_ratio() {
        let p = ModelParams::with_size(0.3, 0.2, 3, 500).unwrap();
        let land = classify_point(&p, DEFAULT_TOL_HEIGHT, DEFAULT_TOL_CURV);
        let law = build_law(&p).unwrap();
        let setup = regime_setup(&land, Regime::Regular).unwrap();
        let own = law.standardized(&setup.scaling, None).unwrap();
        let grid = md_x_grid(Regime::Regular, 500, 0.5, 25);
        for negate in [false, true] {
            for row in md_rows(&law, &setup.scaling, None, &own, 3, &grid, negate).unwrap() {
                assert!((row.ratio - 1.0).abs() < 1e-12, "{row:?}");
            }
        }
    }

    #[test]
    fn special_setup_uses_quartic_limit() {
        let s = special_points(3).unwrap()[0];
        let p = ModelParams::with_size(s.beta, s.h, 3, 1000).unwrap();
        let land = classify_point(&p, DEFAULT_TOL_HEIGHT, DEFAULT_TOL_CURV);
        let setup = regime_setup(&land, Regime::Special).unwrap();
        match setup.limit {
            LimitLaw::Quartic(q) => assert!((q.c - 13.5 / 24.0).abs() < 1e-8),
            other => panic!("unexpected limit {other:?}"),
        }
        assert_eq!(md_x_grid(Regime::Special, 1000, 0.5, 3).len(), 3);
    }
}
