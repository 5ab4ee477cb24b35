//! Seeded sampling: exact magnetization draws and random-scan Glauber
//! dynamics on full configurations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::law::MagnetizationLaw;
use crate::model::ModelParams;
use crate::stein::conditional_plus;

/// Name recorded next to every seed.
pub const RNG_ALGORITHM: &str = "ChaCha8";

const RECHECK_PERIOD: u64 = 1 << 10;

/// Generator for stream `stream` of master seed `seed`.
///
/// Independent chains use the same 256-bit key expanded from `seed` and
/// distinct ChaCha stream ids, so streams never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Inverse-CDF sampler over the atoms of a law.
#[derive(Debug, Clone)]
pub struct AtomSampler {
    cdf: Vec<f64>,
}

impl AtomSampler {
    pub fn new(law: &MagnetizationLaw) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = law
            .probs()
            .iter()
            .map(|&p| {
                acc += p;
                acc
            })
            .collect();
        // Guard against the last cumulative value falling short of 1.
        if let Some(last_pos) = law.probs().iter().rposition(|&p| p > 0.0) {
            for c in &mut cdf[last_pos..] {
                *c = f64::INFINITY;
            }
        }
        Self { cdf }
    }

    /// Atom index `k` (so `S = 2k − N`).
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u)
    }
}

/// `n_samples` i.i.d. atom indices drawn from `law`.
pub fn sample_magnetization<R: Rng + ?Sized>(law: &MagnetizationLaw, rng: &mut R, n_samples: usize) -> Vec<usize> {
    let s = AtomSampler::new(law);
    (0..n_samples).map(|_| s.draw(rng)).collect()
}

/// One exchangeable-pair step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiteUpdate {
    pub site: usize,
    pub old_spin: i8,
    pub new_spin: i8,
}

impl SiteUpdate {
    /// `Δ = (X′_I − X_I)/σ`.
    pub fn delta(&self, sigma: f64) -> f64 {
        (self.new_spin - self.old_spin) as f64 / sigma
    }
}

#[derive(Debug, Clone)]
pub struct ChainState {
    spins: Vec<i8>,
    s: i64,
    rng: ChaCha8Rng,
    sweeps_done: u64,
    updates: u64,
}

impl ChainState {
    /// Uniformly random start drawn from the chain's own generator.
    pub fn random(n: usize, mut rng: ChaCha8Rng) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("chain needs N ≥ 1".into()));
        }
        let spins: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        Self::from_spins(spins, rng)
    }

    pub fn from_spins(spins: Vec<i8>, rng: ChaCha8Rng) -> Result<Self> {
        if spins.is_empty() || spins.iter().any(|&x| x != 1 && x != -1) {
            return Err(Error::InvalidParams("spins must be a non-empty ±1 vector".into()));
        }
        let s = spins.iter().map(|&x| x as i64).sum();
        Ok(Self { spins, s, rng, sweeps_done: 0, updates: 0 })
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn n(&self) -> usize {
        self.spins.len()
    }

    pub fn spin_sum(&self) -> i64 {
        self.s
    }

    pub fn magnetization(&self) -> f64 {
        self.s as f64 / self.n() as f64
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweeps_done
    }

    fn check_size(&self, params: &ModelParams) -> Result<()> {
        match params.n() {
            Some(n) if n != self.n() => {
                Err(Error::InvalidParams(format!("chain has N={} but parameters have N={n}", self.n())))
            }
            _ => Ok(()),
        }
    }

    /// Resample `site` from its exact conditional given the rest.
    pub fn resample_at(&mut self, params: &ModelParams, site: usize) -> SiteUpdate {
        let n = self.n();
        let old = self.spins[site];
        let p_plus = conditional_plus(params, n, self.s - old as i64);
        let u: f64 = self.rng.random();
        let new = if u < p_plus { 1 } else { -1 };
        self.spins[site] = new;
        self.s += (new - old) as i64;
        self.updates += 1;
        if cfg!(debug_assertions) && self.updates.is_multiple_of(RECHECK_PERIOD) {
            let recomputed: i64 = self.spins.iter().map(|&x| x as i64).sum();
            debug_assert_eq!(recomputed, self.s, "incremental spin sum drifted");
        }
        SiteUpdate { site, old_spin: old, new_spin: new }
    }
}

/// Resample a uniformly chosen site.
pub fn resample_site(state: &mut ChainState, params: &ModelParams) -> Result<SiteUpdate> {
    state.check_size(params)?;
    let site = state.rng.random_range(0..state.n());
    Ok(state.resample_at(params, site))
}

/// `N` random-scan updates.
pub fn glauber_sweep(state: &mut ChainState, params: &ModelParams) -> Result<()> {
    state.check_size(params)?;
    let n = state.n();
    for _ in 0..n {
        let site = state.rng.random_range(0..n);
        state.resample_at(params, site);
    }
    state.sweeps_done += 1;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSchedule {
    pub burn_in: u64,
    pub thin: u64,
    pub samples: usize,
}

impl Default for ChainSchedule {
    fn default() -> Self {
        Self { burn_in: 1000, thin: 1, samples: 1000 }
    }
}

/// Spin sums recorded every `thin` sweeps after `burn_in` sweeps.
pub fn run_chain(params: &ModelParams, seed: u64, stream: u64, schedule: ChainSchedule) -> Result<Vec<i64>> {
    let n = params.require_n()?;
    if schedule.thin == 0 {
        return Err(Error::InvalidParams("thin must be at least 1".into()));
    }
    let mut state = ChainState::random(n, stream_rng(seed, stream))?;
    for _ in 0..schedule.burn_in {
        glauber_sweep(&mut state, params)?;
    }
    let mut out = Vec::with_capacity(schedule.samples);
    for _ in 0..schedule.samples {
        for _ in 0..schedule.thin {
            glauber_sweep(&mut state, params)?;
        }
        out.push(state.spin_sum());
    }
    Ok(out)
}

/// Empirical law of spin sums as probabilities on atoms `k = (S+N)/2`.
pub fn empirical_atoms(n: usize, spin_sums: &[i64]) -> Vec<f64> {
    let mut counts = vec![0u64; n + 1];
    for &s in spin_sums {
        counts[((s + n as i64) / 2) as usize] += 1;
    }
    let total = spin_sums.len().max(1) as f64;
    counts.into_iter().map(|c| c as f64 / total).collect()
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Pearson statistic and p-value of observed counts against expected
/// probabilities; cells with expected count below 5 are pooled.
pub fn chi_square(observed: &[u64], expected_probs: &[f64]) -> (f64, f64) {
    let total: u64 = observed.iter().sum();
    let total = total as f64;
    let (mut stat, mut cells) = (0.0, 0usize);
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected_probs) {
        let e = p * total;
        if e < 5.0 {
            pool_o += o as f64;
            pool_e += e;
            continue;
        }
        stat += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    if pool_e > 0.0 {
        stat += (pool_o - pool_e).powi(2) / pool_e;
        cells += 1;
    }
    let df = cells.saturating_sub(1).max(1) as f64;
    (stat, crate::special::gamma_q(df / 2.0, stat / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::Interval;
    use crate::law::build_law;
    use crate::stein::exact_conditional;

    #[test]
    fn exact_draws_match_mean() {
        let p = ModelParams::with_size(0.3, 0.2, 3, 2000).unwrap();
        let law = build_law(&p).unwrap();
        let mut rng = stream_rng(7, 0);
        let draws = sample_magnetization(&law, &mut rng, 100_000);
        let mean = draws.iter().map(|&k| law.atom(k)).sum::<f64>() / draws.len() as f64;
        let se = (law.variance() / draws.len() as f64).sqrt();
        assert!((mean - law.mean()).abs() < 3.0 * se);
    }

    #[test]
    fn draws_are_deterministic() {
        let law = build_law(&ModelParams::with_size(0.5, 0.0, 4, 300).unwrap()).unwrap();
        let a = sample_magnetization(&law, &mut stream_rng(11, 3), 1000);
        let b = sample_magnetization(&law, &mut stream_rng(11, 3), 1000);
        let c = sample_magnetization(&law, &mut stream_rng(11, 4), 1000);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn single_atom_law() {
        let law = build_law(&ModelParams::with_size(0.5, 0.1, 3, 50).unwrap()).unwrap();
        let point = law.condition(&Interval::new(0.39, 0.41)).unwrap();
        let draws = sample_magnetization(&point, &mut stream_rng(1, 0), 500);
        assert!(draws.iter().all(|&k| (law.atom(k) - 0.4).abs() < 1e-12));
    }

    #[test]
    fn delta_bounded_by_two_over_sigma() {
        let p = ModelParams::with_size(0.3, 0.2, 3, 40).unwrap();
        let mut st = ChainState::random(40, stream_rng(5, 0)).unwrap();
        let sigma = 3.7;
        for _ in 0..5000 {
            let u = resample_site(&mut st, &p).unwrap();
            assert!(u.delta(sigma).abs() <= 2.0 / sigma);
            assert_eq!(st.spins()[u.site], u.new_spin);
        }
        assert_eq!(st.spin_sum(), st.spins().iter().map(|&x| x as i64).sum::<i64>());
    }

    #[test]
    fn even_p_flip_symmetry() {
        let p = ModelParams::with_size(0.8, 0.3, 4, 9).unwrap();
        let q = ModelParams::with_size(0.8, -0.3, 4, 9).unwrap();
        let x: Vec<i8> = vec![1, -1, 1, 1, -1, 1, 1, -1, 1];
        let y: Vec<i8> = x.iter().map(|&v| -v).collect();
        for i in 0..9 {
            let a = exact_conditional(&p, &x, i).unwrap();
            let b = exact_conditional(&q, &y, i).unwrap();
            assert!((a - (1.0 - b)).abs() < 1e-14);
        }
    }

    #[test]
    fn independent_spins_give_binomial() {
        let n = 10;
        let p = ModelParams::with_size(1e-300, 0.0, 3, n).unwrap();
        let s = run_chain(&p, 3, 0, ChainSchedule { burn_in: 10, thin: 1, samples: 100_000 }).unwrap();
        let emp = empirical_atoms(n, &s);
        let exact = build_law(&p).unwrap();
        assert!(total_variation(&emp, exact.probs()) < 0.01);
    }

    #[test]
    fn size_mismatch_rejected() {
        let p = ModelParams::with_size(0.3, 0.2, 3, 12).unwrap();
        let mut st = ChainState::random(10, stream_rng(0, 0)).unwrap();
        assert!(glauber_sweep(&mut st, &p).is_err());
        assert!(ChainState::from_spins(vec![1, 0], stream_rng(0, 0)).is_err());
    }
}
