//! Experiment configuration: a JSON document merged with command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Which `(β, h)` a command runs at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Anchor {
    /// `--beta` and `--h` as given.
    Point,
    /// A solved special point for `--p` (`--component` picks among several).
    Special,
    /// The critical point on the curve at `--beta`.
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMethod {
    /// Inverse-CDF draws from the exact law of `S`.
    Exact,
    /// Random-scan Glauber dynamics.
    Glauber,
}

/// Every setting a command may read. Unset fields fall back to
/// command-specific defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub h: Option<f64>,
    #[arg(long)]
    pub p: Option<u32>,
    /// Comma-separated sizes.
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Comma-separated thresholds, or `lo:hi:count`.
    #[arg(long, value_parser = parse_grid)]
    pub x_grid: Option<Grid>,
    /// Number of points of the default threshold grid.
    #[arg(long)]
    pub x_points: Option<usize>,
    /// Range constant `C` in `x ≤ C·N^e`.
    #[arg(long)]
    pub c_const: Option<f64>,
    /// Truncation constant `K` in `|T| ≤ K√N`.
    #[arg(long)]
    pub k_const: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub tol_height: Option<f64>,
    #[arg(long)]
    pub tol_curv: Option<f64>,
    #[arg(long, value_parser = parse_grid)]
    pub beta_grid: Option<Grid>,
    #[arg(long, value_parser = parse_grid)]
    pub h_grid: Option<Grid>,
    #[arg(long, value_enum)]
    pub at: Option<Anchor>,
    /// Maximizer index for critical points, or special-point index.
    #[arg(long)]
    pub component: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<u64>,
    #[arg(long)]
    pub thin: Option<u64>,
    #[arg(long, value_enum)]
    pub method: Option<SampleMethod>,
}

/// A list of reals written either explicitly or as `lo:hi:count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Grid(pub Vec<f64>);

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let s = s.trim();
    if let Some((lo, rest)) = s.split_once(':') {
        let (hi, count) = rest.split_once(':').ok_or("range grid must be lo:hi:count")?;
        let lo: f64 = lo.trim().parse().map_err(|e| format!("bad lower end: {e}"))?;
        let hi: f64 = hi.trim().parse().map_err(|e| format!("bad upper end: {e}"))?;
        let count: usize = count.trim().parse().map_err(|e| format!("bad count: {e}"))?;
        if count == 0 || !(lo.is_finite() && hi.is_finite()) {
            return Err("range grid needs finite ends and count ≥ 1".into());
        }
        if count == 1 {
            return Ok(Grid(vec![lo]));
        }
        return Ok(Grid((0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()));
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad grid value {t:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()
        .map(Grid)
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        Self::from_json(&text)
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &ExperimentConfig) -> Self {
        overlay!(
            self, top, beta, h, p, n_list, x_grid, x_points, c_const, k_const, seed, out, threads, tol_height,
            tol_curv, beta_grid, h_grid, at, component, samples, burn_in, thin, method
        );
        self
    }

    /// SHA-256 of the command and every data-affecting setting.
    pub fn hash(&self, command: &str) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        canonical.threads = None;
        let body = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(format!("{command}\n{body}").as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return bad(format!("beta must be positive, got {b}"));
            }
        }
        if let Some(h) = self.h {
            if !h.is_finite() {
                return bad(format!("h must be finite, got {h}"));
            }
        }
        if let Some(p) = self.p {
            if p < 3 {
                return bad(format!("p must be at least 3, got {p}"));
            }
        }
        if let Some(ns) = &self.n_list {
            if ns.is_empty() || ns.contains(&0) {
                return bad("n_list must hold positive sizes".into());
            }
        }
        if let Some(Grid(xs)) = &self.x_grid {
            if xs.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return bad("x_grid values must be finite and non-negative".into());
            }
        }
        for (name, v) in [("c_const", self.c_const), ("k_const", self.k_const)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be positive, got {v}"));
                }
            }
        }
        for (name, v) in [("tol_height", self.tol_height), ("tol_curv", self.tol_curv)] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be non-negative, got {v}"));
                }
            }
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        if self.thin == Some(0) {
            return bad("thin must be at least 1".into());
        }
        Ok(())
    }
}
