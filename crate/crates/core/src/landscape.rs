//! Stationary points and global maximizers of `H`, phase classification,
//! special points, the critical curve and the consistency threshold `β*`.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::{bisect, ipow};

/// Number of grid intervals scanned for sign changes of `H′`.
pub const STATIONARY_GRID: usize = 4096;
/// Stationary points closer than this are merged.
pub const DEDUP_RADIUS: f64 = 1e-8;
/// Near-coincident maximizers within this radius are treated as one.
pub const CLUSTER_RADIUS: f64 = 1e-4;
pub const DEFAULT_TOL_HEIGHT: f64 = 1e-9;
pub const DEFAULT_TOL_CURV: f64 = 1e-7;

const EDGE: f64 = 1.0 - f64::EPSILON;

/// Half-open-free interval `(lo, hi)` on the magnetization axis; infinite
/// endpoints allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Maximizer {
    pub m: f64,
    pub h_value: f64,
    pub second_deriv: f64,
    /// `H^{(4)}(m)`, populated when the curvature is within tolerance of zero.
    pub fourth_deriv: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Regular,
    Critical { k: usize },
    Special,
}

impl Classification {
    pub fn label(&self) -> &'static str {
        match self {
            Classification::Regular => "regular",
            Classification::Critical { .. } => "critical",
            Classification::Special => "special",
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Classification::Critical { k } => write!(f, "critical(K={k})"),
            other => f.write_str(other.label()),
        }
    }
}

impl Serialize for Classification {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Margins {
    /// Top `H` minus the best stationary value that is not a global maximizer;
    /// `None` when every stationary point is a global maximizer.
    pub height_gap: Option<f64>,
    /// `|H″|` at the top maximizer.
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Landscape {
    pub params: ModelParams,
    pub stationary: Vec<f64>,
    pub global_maximizers: Vec<Maximizer>,
    pub classification: Classification,
    pub margins: Margins,
}

impl Landscape {
    /// Open neighbourhood of maximizer `k` bounded by midpoints to its
    /// neighbouring global maximizers (infinite at the extremes).
    pub fn neighborhood(&self, k: usize) -> Result<Interval> {
        let ms: Vec<f64> = self.global_maximizers.iter().map(|g| g.m).collect();
        if k >= ms.len() {
            return Err(Error::InvalidParams(format!("maximizer index {k} out of range")));
        }
        let lo = if k == 0 { f64::NEG_INFINITY } else { 0.5 * (ms[k - 1] + ms[k]) };
        let hi = if k + 1 == ms.len() { f64::INFINITY } else { 0.5 * (ms[k] + ms[k + 1]) };
        Ok(Interval { lo, hi })
    }

    /// Basin of attraction of the local maximizer at `m`: the open interval
    /// between the adjacent stationary points (or `±∞`).
    pub fn basin(&self, m: f64) -> Interval {
        let lo = self
            .stationary
            .iter()
            .copied()
            .filter(|&s| s < m - CLUSTER_RADIUS)
            .fold(f64::NEG_INFINITY, f64::max);
        let hi = self
            .stationary
            .iter()
            .copied()
            .filter(|&s| s > m + CLUSTER_RADIUS)
            .fold(f64::INFINITY, f64::min);
        Interval { lo, hi }
    }

    /// Maximizer with the largest `H` value.
    pub fn top(&self) -> &Maximizer {
        self.global_maximizers
            .iter()
            .max_by(|a, b| a.h_value.total_cmp(&b.h_value))
            .expect("at least one maximizer")
    }
}

fn hp(params: &ModelParams, x: f64) -> f64 {
    params.free_energy_deriv(x, 1)
}

fn newton_polish<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(f: F, df: G, x: f64, lo: f64, hi: f64) -> f64 {
    let mut best = x;
    let mut best_res = f(x).abs();
    let mut cur = x;
    for _ in 0..4 {
        let d = df(cur);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = cur - f(cur) / d;
        if !(next >= lo && next <= hi) {
            break;
        }
        let res = f(next).abs();
        if res < best_res {
            best = next;
            best_res = res;
        }
        if next == cur {
            break;
        }
        cur = next;
    }
    best
}

// Sign-change roots of `f` on a grid over (−1, 1); each interval where the
// derivative `df` changes sign is split at its root first so that pairs of
// close roots are not lost.
fn grid_roots<F, G>(f: F, df: G, a: f64, b: f64, intervals: usize) -> Vec<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let mut roots = Vec::new();
    let step = (b - a) / intervals as f64;
    let push_bracket = |lo: f64, hi: f64, roots: &mut Vec<f64>| {
        let (flo, fhi) = (f(lo), f(hi));
        if flo == 0.0 {
            roots.push(lo);
        } else if flo * fhi < 0.0 {
            let r = bisect(&f, lo, hi);
            roots.push(newton_polish(&f, &df, r, lo, hi));
        }
    };
    for i in 0..intervals {
        let lo = if i == 0 { a } else { a + step * i as f64 };
        let hi = if i + 1 == intervals { b } else { a + step * (i + 1) as f64 };
        let (dlo, dhi) = (df(lo), df(hi));
        if dlo * dhi < 0.0 {
            let c = bisect(&df, lo, hi);
            push_bracket(lo, c, &mut roots);
            if f(c) != 0.0 {
                push_bracket(c, hi, &mut roots);
            }
        } else {
            push_bracket(lo, hi, &mut roots);
        }
    }
    if f(b) == 0.0 {
        roots.push(b);
    }
    roots
}

fn dedup_sorted(mut xs: Vec<f64>, radius: f64) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(xs.len());
    for x in xs {
        match out.last() {
            Some(&prev) if x - prev <= radius => {}
            _ => out.push(x),
        }
    }
    out
}

/// All roots of `H′` in `(−1, 1)`, sorted ascending.
pub fn find_stationary(params: &ModelParams) -> Vec<f64> {
    let f = |x: f64| hp(params, x);
    let df = |x: f64| params.free_energy_deriv(x, 2);
    let mut roots = grid_roots(f, df, -EDGE, EDGE, STATIONARY_GRID);
    // Tangential roots: extrema of H′ that touch zero without a sign change.
    let extrema = grid_roots(df, |x| params.free_energy_deriv(x, 3), -EDGE, EDGE, STATIONARY_GRID);
    for e in extrema {
        if f(e).abs() <= 1e-12 && !roots.iter().any(|r| (r - e).abs() <= CLUSTER_RADIUS) {
            roots.push(e);
        }
    }
    dedup_sorted(roots, DEDUP_RADIUS)
}

fn is_local_max(params: &ModelParams, x: f64, second: f64, tol_curv: f64) -> bool {
    if second < -tol_curv {
        return true;
    }
    if second > tol_curv {
        return false;
    }
    let d = 1e-3 * (1.0 - x.abs());
    let hx = params.free_energy(x);
    params.free_energy(x - d) <= hx && params.free_energy(x + d) <= hx
}

/// Classifies `(β, h)` as regular, critical or special.
pub fn classify_point(params: &ModelParams, tol_height: f64, tol_curv: f64) -> Landscape {
    classify_stationary(params, find_stationary(params), tol_height, tol_curv)
}

/// Classification from a precomputed stationary set given in any order.
pub fn classify_stationary(params: &ModelParams, stationary: Vec<f64>, tol_height: f64, tol_curv: f64) -> Landscape {
    let stationary = dedup_sorted(stationary, DEDUP_RADIUS);
    let values: Vec<f64> = stationary.iter().map(|&x| params.free_energy(x)).collect();
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = tol_height * top.abs().max(1.0);

    let mut candidates: Vec<(f64, f64, f64)> = stationary
        .iter()
        .zip(&values)
        .filter(|&(_, &v)| v >= top - tol)
        .map(|(&x, &v)| (x, v, params.free_energy_deriv(x, 2)))
        .filter(|&(x, _, d2)| is_local_max(params, x, d2, tol_curv))
        .collect();
    if candidates.is_empty() {
        // Numerical corner: fall back to the highest stationary point.
        let (i, _) = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("H′ always has a root");
        let x = stationary[i];
        candidates.push((x, values[i], params.free_energy_deriv(x, 2)));
    }

    // Merge clusters of near-coincident maximizers, keeping the highest.
    let mut merged: Vec<(f64, f64, f64)> = Vec::new();
    for c in candidates {
        match merged.last_mut() {
            Some(last) if c.0 - last.0 <= CLUSTER_RADIUS => {
                if c.1 > last.1 {
                    *last = c;
                }
            }
            _ => merged.push(c),
        }
    }

    let mut global_maximizers: Vec<Maximizer> = merged
        .iter()
        .map(|&(m, v, d2)| Maximizer {
            m,
            h_value: v,
            second_deriv: d2,
            fourth_deriv: (d2.abs() <= tol_curv.max(1e-6)).then(|| params.free_energy_deriv(m, 4)),
        })
        .collect();

    let classification = if global_maximizers.len() >= 2 {
        Classification::Critical { k: global_maximizers.len() }
    } else if global_maximizers[0].second_deriv.abs() <= tol_curv {
        Classification::Special
    } else {
        Classification::Regular
    };
    if classification == Classification::Special {
        global_maximizers[0] = refine_flat_maximizer(params, global_maximizers[0]);
    }

    let near_max = |x: f64| global_maximizers.iter().any(|g| (g.m - x).abs() <= CLUSTER_RADIUS);
    let best_other = stationary
        .iter()
        .zip(&values)
        .filter(|&(&x, _)| !near_max(x))
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let top_max = global_maximizers
        .iter()
        .max_by(|a, b| a.h_value.total_cmp(&b.h_value))
        .expect("non-empty");
    let margins = Margins {
        height_gap: best_other.is_finite().then_some(top_max.h_value - best_other),
        curvature: top_max.second_deriv.abs(),
    };

    Landscape { params: *params, stationary, global_maximizers, classification, margins }
}

// A flat maximizer is located only to about ε^{1/3} by root finding on H′;
// the zero of H‴ inside the cluster pins it to full precision.
fn refine_flat_maximizer(params: &ModelParams, g: Maximizer) -> Maximizer {
    let mut m = g.m;
    for _ in 0..20 {
        let d4 = params.free_energy_deriv(m, 4);
        if d4 == 0.0 {
            break;
        }
        let next = m - params.free_energy_deriv(m, 3) / d4;
        if !((next - g.m).abs() <= CLUSTER_RADIUS) {
            return g;
        }
        if next == m {
            break;
        }
        m = next;
    }
    let d2 = params.free_energy_deriv(m, 2);
    Maximizer {
        m,
        h_value: params.free_energy(m),
        second_deriv: d2,
        fourth_deriv: Some(params.free_energy_deriv(m, 4)),
    }
}

/// A point where `H′ = H″ = H‴ = 0` at the unique global maximizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpecialPoint {
    pub beta: f64,
    pub h: f64,
    pub m_star: f64,
    pub fourth_deriv: f64,
    pub fifth_deriv: f64,
    /// Whether `(β, h)` lies in the positive quadrant `β > 0, h > 0`.
    pub inside_theta: bool,
}

impl SpecialPoint {
    pub fn params(&self, p: u32) -> Result<ModelParams> {
        ModelParams::new(self.beta, self.h, p)
    }
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0.0; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3] = b[i];
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col] == 0.0 {
            return None;
        }
        m.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            let pivot_row = m[col];
            for (dst, src) in m[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst -= f * src;
            }
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let mut s = m[i][3];
        for k in i + 1..3 {
            s -= m[i][k] * x[k];
        }
        x[i] = s / m[i][i];
    }
    Some(x)
}

// H′, H″, H‴ of the p-spin model as functions of (β, h, m).
fn special_residual(p: u32, beta: f64, h: f64, m: f64) -> [f64; 3] {
    let pf = p as f64;
    let i1 = m.atanh();
    let d = 1.0 - m * m;
    [
        beta * pf * ipow(m, p - 1) + h - i1,
        beta * pf * (pf - 1.0) * ipow(m, p - 2) - 1.0 / d,
        beta * pf * (pf - 1.0) * (pf - 2.0) * ipow(m, p - 3) - 2.0 * m / (d * d),
    ]
}

fn special_from_seed(p: u32, seed: f64) -> Option<(f64, f64, f64, f64)> {
    let pf = p as f64;
    let mut m = seed;
    let mut beta = 1.0 / (pf * (pf - 1.0) * ipow(m, p - 2) * (1.0 - m * m));
    let mut h = m.atanh() - beta * pf * ipow(m, p - 1);
    let mut best = (beta, h, m, f64::INFINITY);
    for _ in 0..100 {
        let r = special_residual(p, beta, h, m);
        let res = r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if res < best.3 {
            best = (beta, h, m, res);
        }
        if res <= 1e-14 {
            break;
        }
        let d = 1.0 - m * m;
        let h2 = r[1];
        let h3 = r[2];
        let interaction4 = if p >= 4 {
            beta * pf * (pf - 1.0) * (pf - 2.0) * (pf - 3.0) * ipow(m, p - 4)
        } else {
            0.0
        };
        let h4 = interaction4 - (2.0 + 6.0 * m * m) / (d * d * d);
        let jac = [
            [pf * ipow(m, p - 1), 1.0, h2],
            [pf * (pf - 1.0) * ipow(m, p - 2), 0.0, h3],
            [pf * (pf - 1.0) * (pf - 2.0) * ipow(m, p - 3), 0.0, h4],
        ];
        let step = solve3(jac, [-r[0], -r[1], -r[2]])?;
        beta += step[0];
        h += step[1];
        m += step[2];
        if !(m > 0.0 && m < 1.0 && beta > 0.0 && beta.is_finite() && h.is_finite()) {
            return None;
        }
    }
    Some(best)
}

/// Special points of the `p`-spin model (`p ≥ 3`): one for odd `p`, a
/// sign-symmetric pair `(β, ±h, ±m)` for even `p`.
pub fn special_points(p: u32) -> Result<Vec<SpecialPoint>> {
    if p < 3 {
        return Err(Error::InvalidParams(format!("special points need p >= 3, got {p}")));
    }
    let mut found: Vec<(f64, f64, f64)> = Vec::new();
    let mut best_res = f64::INFINITY;
    for i in 1..=19 {
        let seed = 0.05 * i as f64;
        if let Some((beta, h, m, res)) = special_from_seed(p, seed) {
            best_res = best_res.min(res);
            if res <= 1e-10 && !found.iter().any(|f| (f.2 - m).abs() <= 1e-8) {
                found.push((beta, h, m));
            }
        }
    }
    if found.is_empty() {
        return Err(Error::SolverFailure { what: "special point system", best_residual: best_res });
    }
    found.sort_by(|a, b| a.2.total_cmp(&b.2));
    let mut out = Vec::new();
    for (beta, h, m) in found {
        let params = ModelParams::new(beta, h, p)?;
        let point = |h: f64, m: f64, sign: f64| SpecialPoint {
            beta,
            h,
            m_star: m,
            fourth_deriv: params.free_energy_deriv(m.abs(), 4),
            fifth_deriv: sign * params.free_energy_deriv(m.abs(), 5),
            inside_theta: h > 0.0,
        };
        out.push(point(h, m, 1.0));
        if p.is_multiple_of(2) {
            out.push(point(-h, -m, -1.0));
        }
    }
    out.sort_by(|a, b| a.m_star.total_cmp(&b.m_star));
    Ok(out)
}

/// One point of the critical curve: two global maximizers of equal height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub beta: f64,
    pub h: f64,
    pub m_low: f64,
    pub m_high: f64,
}

// φ(m) = atanh(m) − βp m^{p−1}; stationary points solve φ(m) = h.
fn phi(beta: f64, p: u32, m: f64) -> f64 {
    m.atanh() - beta * p as f64 * ipow(m, p - 1)
}

/// Equal-height point of the two competing maximizers at inverse
/// temperature `beta`; `None` when the two branches never coexist.
pub fn critical_point(p: u32, beta: f64) -> Result<Option<CriticalPoint>> {
    let base = ModelParams::new(beta, 0.0, p)?;
    // H″ = −φ′ does not depend on h.
    let curv = |x: f64| base.free_energy_deriv(x, 2);
    let mut turns = grid_roots(curv, |x| base.free_energy_deriv(x, 3), -EDGE, EDGE, STATIONARY_GRID);
    turns = dedup_sorted(turns, DEDUP_RADIUS);
    // rightmost interval where H″ > 0 (φ decreasing)
    let mut pair = None;
    for w in turns.windows(2).rev() {
        let mid = 0.5 * (w[0] + w[1]);
        if curv(mid) > 0.0 {
            pair = Some((w[0], w[1]));
            break;
        }
    }
    let Some((ra, rb)) = pair else { return Ok(None) };
    let left = turns.iter().copied().filter(|&t| t < ra).fold(-EDGE, f64::max);
    let right = EDGE;

    let f = |m: f64| phi(beta, p, m);
    let h_lo = f(rb).max(f(left));
    let h_hi = f(ra).min(f(right));
    if !(h_lo < h_hi) {
        return Ok(None);
    }
    let branch_low = |h: f64| bisect(|m| f(m) - h, left, ra);
    let branch_high = |h: f64| bisect(|m| f(m) - h, rb, right);
    let gap = |h: f64| {
        let params = ModelParams::new(beta, h, p).expect("validated");
        params.free_energy(branch_high(h)) - params.free_energy(branch_low(h))
    };
    let (glo, ghi) = (gap(h_lo), gap(h_hi));
    if !(glo < 0.0 && ghi > 0.0) {
        return Ok(None);
    }
    let h = bisect(gap, h_lo, h_hi);
    Ok(Some(CriticalPoint { beta, h, m_low: branch_low(h), m_high: branch_high(h) }))
}

/// Critical curve traced over `beta_grid`; entries are `None` where the
/// two maximizer branches do not coexist.
pub fn critical_curve(p: u32, beta_grid: &[f64]) -> Result<Vec<(f64, Option<CriticalPoint>)>> {
    if p < 3 {
        return Err(Error::InvalidParams(format!("critical curve needs p >= 3, got {p}")));
    }
    beta_grid.iter().map(|&b| critical_point(p, b).map(|c| (b, c))).collect()
}

/// `sup_{x ∈ [0,1]} H_{β,0,p}(x)`.
pub fn sup_h_nonneg(beta: f64, p: u32) -> Result<f64> {
    let params = ModelParams::new(beta, 0.0, p)?;
    let mut best = params.free_energy(0.0).max(params.free_energy(1.0));
    for x in find_stationary(&params) {
        if x >= 0.0 {
            best = best.max(params.free_energy(x));
        }
    }
    Ok(best)
}

/// Consistency threshold `β*(p)`: the smallest `β` with `sup_{[0,1]} H_{β,0,p} > 0`.
pub fn beta_star(p: u32) -> Result<f64> {
    if p < 3 {
        return Err(Error::InvalidParams(format!("beta_star needs p >= 3, got {p}")));
    }
    let pred = |b: f64| sup_h_nonneg(b, p).map(|v| v > 0.0);
    let mut lo = 0.05;
    let mut hi = std::f64::consts::LN_2 + 0.01;
    if pred(lo)? || !pred(hi)? {
        return Err(Error::SolverFailure { what: "beta_star bracket", best_residual: f64::NAN });
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
