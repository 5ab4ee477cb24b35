//! Least-squares rate fits over an `N` sweep.

use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_FIT_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fitted line.
    pub rms_residual: f64,
    pub points: usize,
}

impl SlopeFit {
    /// Ordinary least squares `y ≈ intercept + slope·x`.
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let points = xs.len().min(ys.len());
        if points < MIN_FIT_POINTS {
            return Err(Error::InsufficientPoints { needed: MIN_FIT_POINTS, got: points });
        }
        if xs.iter().chain(ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite value in rate fit".into()));
        }
        let nf = points as f64;
        let mx = xs.iter().sum::<f64>() / nf;
        let my = ys.iter().sum::<f64>() / nf;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        if sxx == 0.0 {
            return Err(Error::InvalidParams("rate fit needs distinct abscissae".into()));
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let ss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        Ok(Self { slope, intercept, rms_residual: (ss / nf).sqrt(), points })
    }

    /// Fit of `ln value` against `ln N`.
    pub fn log_log(ns: &[usize], values: &[f64]) -> Result<Self> {
        let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        Self::fit(&xs, &values.iter().map(|v| v.ln()).collect::<Vec<_>>())
    }
}

/// Abscissa used for a rate fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateAxis {
    /// `ln N`.
    LogN,
    /// `ln(N / ln N)`.
    LogNOverLogN,
}

impl RateAxis {
    pub fn abscissa(self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            RateAxis::LogN => nf.ln(),
            RateAxis::LogNOverLogN => (nf / nf.ln()).ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub metric: String,
    pub axis: RateAxis,
    pub rows: Vec<(usize, f64)>,
    /// Present once at least three `N` values are available.
    pub fit: Option<SlopeFit>,
}

impl RateReport {
    pub fn new(metric: impl Into<String>, axis: RateAxis, mut rows: Vec<(usize, f64)>) -> Result<Self> {
        rows.sort_by_key(|r| r.0);
        let fit = if rows.len() >= MIN_FIT_POINTS {
            let xs: Vec<f64> = rows.iter().map(|r| axis.abscissa(r.0)).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
            Some(SlopeFit::fit(&xs, &ys)?)
        } else {
            None
        };
        Ok(Self { metric: metric.into(), axis, rows, fit })
    }

    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }
}
