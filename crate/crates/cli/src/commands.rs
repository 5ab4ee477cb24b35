//! One function per subcommand, each producing an output body.

use rayon::prelude::*;
use serde_json::json;
use spinlab::landscape::{
    beta_star, classify_point, critical_curve, critical_point, special_points, Classification, Interval, Landscape,
    DEFAULT_TOL_CURV, DEFAULT_TOL_HEIGHT,
};
use spinlab::laplace::{laplace_bn, laplace_bnx, ln_y_weights, partial_sums, LaplaceContext};
use spinlab::law::{build_law, mixture_weights};
use spinlab::limit::{md_report, md_x_grid, regime_setup, Regime};
use spinlab::mpl::MplSetup;
use spinlab::numeric::log_sum_exp;
use spinlab::rate::{RateAxis, RateReport};
use spinlab::sampler::{run_chain, sample_magnetization, stream_rng, ChainSchedule};
use spinlab::stein::{default_k, drift_check, hypothesis_constants, surrogate_gap};
use spinlab::{Error, ModelParams};

use crate::config::{Anchor, ExperimentConfig, Grid, SampleMethod};
use crate::error::{CliError, CliResult};
use crate::output::{real, Body, Table};

pub const DEFAULT_N_LIST: [usize; 5] = [250, 500, 1000, 2000, 4000];
pub const DEFAULT_C: f64 = 0.5;
pub const DEFAULT_X_POINTS: usize = 201;

/// Configuration with defaults applied on demand.
pub struct Settings<'a>(pub &'a ExperimentConfig);

impl Settings<'_> {
    fn p(&self) -> u32 {
        self.0.p.unwrap_or(3)
    }

    pub fn seed(&self) -> u64 {
        self.0.seed.unwrap_or(0)
    }

    fn tol_height(&self) -> f64 {
        self.0.tol_height.unwrap_or(DEFAULT_TOL_HEIGHT)
    }

    fn tol_curv(&self) -> f64 {
        self.0.tol_curv.unwrap_or(DEFAULT_TOL_CURV)
    }

    fn n_list(&self) -> Vec<usize> {
        let mut ns = self.0.n_list.clone().unwrap_or_else(|| DEFAULT_N_LIST.to_vec());
        ns.sort_unstable();
        ns.dedup();
        ns
    }

    fn component(&self) -> usize {
        self.0.component.unwrap_or(0)
    }

    fn require<T: Copy>(&self, v: Option<T>, name: &str) -> CliResult<T> {
        v.ok_or_else(|| CliError::Config(format!("missing --{name}")))
    }

    fn grid(&self, g: &Option<Grid>, name: &str) -> CliResult<Vec<f64>> {
        g.as_ref().map(|g| g.0.clone()).ok_or_else(|| CliError::Config(format!("missing --{name}")))
    }

    /// `(β, h)` selected by `--at`.
    fn point(&self) -> CliResult<(f64, f64)> {
        let p = self.p();
        match self.0.at.unwrap_or(Anchor::Point) {
            Anchor::Point => Ok((self.require(self.0.beta, "beta")?, self.require(self.0.h, "h")?)),
            Anchor::Special => {
                let pts = special_points(p)?;
                let sp = pts
                    .get(self.component())
                    .ok_or_else(|| CliError::Config(format!("p={p} has {} special points", pts.len())))?;
                Ok((sp.beta, sp.h))
            }
            Anchor::Critical => {
                let beta = self.require(self.0.beta, "beta")?;
                let cp = critical_point(p, beta)?.ok_or_else(|| Error::RegimeMismatch {
                    expected: "critical".into(),
                    found: format!("no critical point at beta={beta}"),
                })?;
                Ok((cp.beta, cp.h))
            }
        }
    }

    fn params(&self) -> CliResult<ModelParams> {
        let (beta, h) = self.point()?;
        Ok(ModelParams::new(beta, h, self.p())?)
    }

    fn landscape(&self, params: &ModelParams) -> Landscape {
        classify_point(params, self.tol_height(), self.tol_curv())
    }

    fn regime(&self, land: &Landscape) -> Regime {
        match land.classification {
            Classification::Regular => Regime::Regular,
            Classification::Critical { .. } => Regime::Critical(self.component()),
            Classification::Special => Regime::Special,
        }
    }
}

fn fit_notes(report: &RateReport) -> Vec<String> {
    let mut notes = vec![format!("metric: {}", report.metric), format!("axis: {}", axis_name(report.axis))];
    match report.fit {
        Some(f) => notes.push(format!(
            "fit: slope={} intercept={} rms_residual={} points={}",
            real(f.slope),
            real(f.intercept),
            real(f.rms_residual),
            f.points
        )),
        None => notes.push("fit: none (fewer than 3 sizes)".into()),
    }
    notes
}

fn axis_name(a: RateAxis) -> &'static str {
    match a {
        RateAxis::LogN => "ln N",
        RateAxis::LogNOverLogN => "ln(N/ln N)",
    }
}

pub fn classify(cfg: &ExperimentConfig) -> CliResult<Body> {
    let s = Settings(cfg);
    let params = s.params()?;
    let land = s.landscape(&params);
    let mut v = serde_json::to_value(&land).expect("landscape serializes");
    if let Classification::Critical { .. } = land.classification {
        v["mixture_weights"] = json!(mixture_weights(&land, s.tol_curv())?);
    }
    Ok(Body::Json(v))
}

pub fn phase_diagram(cfg: &ExperimentConfig) -> CliResult<Body> {
    let s = Settings(cfg);
    let p = s.p();
    let betas = s.grid(&cfg.beta_grid, "beta-grid")?;
    let hs = s.grid(&cfg.h_grid, "h-grid")?;
    let cells: Vec<(f64, f64)> = betas.iter().flat_map(|&b| hs.iter().map(move |&h| (b, h))).collect();
    let rows = cells
        .par_iter()
        .map(|&(b, h)| {
            let land = s.landscape(&ModelParams::new(b, h, p)?);
            let ms: Vec<String> = land.global_maximizers.iter().map(|g| real(g.m)).collect();
            Ok(vec![
                real(b),
                real(h),
                land.classification.label().to_string(),
                ms.join(";"),
                land.margins.height_gap.map(real).unwrap_or_default(),
                real(land.margins.curvature),
            ])
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut t = Table::new(crate::output::PHASE_COLUMNS.to_vec());
    t.rows = rows;
    t.notes.push(format!("p: {p}"));
    Ok(Body::Csv(t))
}

pub fn md_ratio(cfg: &ExperimentConfig) -> CliResult<Body> {
    let s = Settings(cfg);
    let base = s.params()?;
    let land = s.landscape(&base);
    let regime = s.regime(&land);
    regime_setup(&land, regime)?;
    let c = cfg.c_const.unwrap_or(DEFAULT_C);
    let points = cfg.x_points.unwrap_or(DEFAULT_X_POINTS);
    let reports = s
        .n_list()
        .par_iter()
        .map(|&n| {
            let law = build_law(&base.sized(n)?)?;
            let grid = match &cfg.x_grid {
                Some(g) => g.0.clone(),
                None => md_x_grid(regime, n, c, points),
            };
            let up = md_report(&law, &land, regime, &grid, false)?;
            let down = md_report(&law, &land, regime, &grid, true)?;
            Ok((up, down))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut t = Table::new(vec!["N", "x", "r", "tail_exact", "tail_limit", "ratio", "normalized_error", "flag"]);
    t.notes.push(format!("regime: {}", land.classification));
    t.notes.push(format!("q: {}", regime.q()));
    for (up, down) in &reports {
        let worst = up.max_normalized_error().max(down.max_normalized_error());
        t.notes.push(format!("max_normalized_error N={}: {}", up.n, real(worst)));
        for row in up.rows.iter().chain(&down.rows) {
            t.push(vec![
                up.n.to_string(),
                real(row.x),
                row.r.to_string(),
                real(row.tail_exact),
                real(row.tail_limit),
                real(row.ratio),
                real(row.normalized_error),
                (row.flagged as u8).to_string(),
            ]);
        }
    }
    Ok(Body::Csv(t))
}

/// Kolmogorov distance of the standardized exact law to its limit at each size.
pub fn be_report(base: &ModelParams, land: &Landscape, regime: Regime, ns: &[usize]) -> CliResult<RateReport> {
    let setup = regime_setup(land, regime)?;
    let rows = ns
        .par_iter()
        .map(|&n| {
            let law = build_law(&base.sized(n)?)?;
            let d = law.standardized(&setup.scaling, setup.condition.as_ref())?.kolmogorov_to(&setup.limit);
            Ok((n, d))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(RateReport::new("kolmogorov_distance", RateAxis::LogN, rows)?)
}

fn rate_table(report: &RateReport, column: &'static str) -> Table {
    let mut t = Table::new(vec!["N", column]);
    t.notes = fit_notes(report);
    for &(n, v) in &report.rows {
        t.push(vec![n.to_string(), real(v)]);
    }
    t
}

pub fn be(cfg: &ExperimentConfig) -> CliResult<Body> {
    let s = Settings(cfg);
    let base = s.params()?;
    let land = s.landscape(&base);
    let regime = s.regime(&land);
    let report = be_report(&base, &land, regime, &s.n_list())?;
    let mut t = rate_table(&report, "distance");
    t.notes.insert(0, format!("regime: {}", land.classification));
    Ok(Body::Csv(t))
}

pub fn stein(cfg: &ExperimentConfig) -> CliResult<Body> {
    let s = Settings(cfg);
    let base = s.params()?;
    let land = s.landscape(&base);
    let (m, interval) = match land.classification {
        Classification::Regular => (land.global_maximizers[0].m, Interval::REAL_LINE),
        Classification::Critical { .. } => {
            let k = s.component();
            let g = land
                .global_maximizers
                .get(k)
                .ok_or_else(|| CliError::Config(format!("no maximizer with index {k}")))?;
            (g.m, land.neighborhood(k)?)
        }
        Classification::Special => {
            return Err(Error::RegimeMismatch { expected: "regular or critical".into(), found: "special".into() }.into())
        }
    };
    let k_const = cfg.k_const.unwrap_or_else(|| default_k(base.free_energy_deriv(m, 2)));
    let rows = s
        .n_list()
        .par_iter()
        .map(|&n| {
            let params = base.sized(n)?;
            let law = build_law(&params)?;
            let c = hypothesis_constants(&law, m, &interval, k_const)?;
            let d = drift_check(&law, m, &interval)?;
            Ok(vec![
                n.to_string(),
                real(m),
                real(c.lambda),
                real(c.sigma2),
                real(c.delta),
                real(c.theta_hat),
                real(c.delta1_hat),
                real(c.delta2_hat),
                real(c.alpha),
                real(c.min_d),
                real(d.max_discrepancy),
                real(d.fitted_b),
                real(d.mean_identity_gap),
                real(surrogate_gap(&params)?),
            ])
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut t = Table::new(vec![
        "N",
        "m",
        "lambda",
        "sigma2",
        "delta",
        "theta_hat",
        "delta1_hat",
        "delta2_hat",
        "alpha",
        "min_d",
        "drift_max_discrepancy",
        "fitted_b",
        "mean_identity_gap",
        "surrogate_gap",
    ]);
    t.notes.push(format!("regime: {}", land.classification));
    t.notes.push(format!("k_const: {}", real(k_const)));
    t.rows = rows;
    Ok(Body::Csv(t))
}

pub fn laplace(cfg: &ExperimentConfig) -> CliResult<Body> {
    let s = Settings(cfg);
    let base = s.params()?;
    let land = s.landscape(&base);
    if land.classification != Classification::Special {
        return Err(Error::RegimeMismatch { expected: "special".into(), found: land.classification.to_string() }.into());
    }
    let ctx = LaplaceContext::new(base, land.global_maximizers[0].m)?;
    let xs = cfg.x_grid.as_ref().map(|g| g.0.clone()).unwrap_or_else(|| vec![0.0, 0.5, 1.0, 2.0]);
    let ns = cfg.n_list.as_ref().map(|_| s.n_list()).unwrap_or_else(|| vec![1000, 4000, 16000]);
    let rows = ns
        .par_iter()
        .map(|&n| {
            let total = log_sum_exp(&ln_y_weights(&ctx, n));
            let lb = laplace_bn(&ctx, n);
            xs.iter()
                .map(|&x| {
                    let ps = partial_sums(&ctx, n, x)?;
                    let approx = laplace_bnx(&ctx, n, x)?;
                    let exact = ps.b_n_x();
                    Ok(vec![
                        n.to_string(),
                        real(x),
                        real(ps.b_n()),
                        real(lb),
                        real((lb / ps.b_n() - 1.0) * (n as f64).sqrt()),
                        real((ps.ln_total() - total).exp_m1().abs()),
                        real(exact),
                        real(approx.estimate),
                        real(approx.error_scale),
                        real((approx.estimate - exact).abs() / approx.error_scale),
                    ])
                })
                .collect::<CliResult<Vec<_>>>()
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut t = Table::new(vec![
        "N",
        "x",
        "b_n",
        "laplace_b_n",
        "scaled_rel_error",
        "partition_residual",
        "b_n_x",
        "b_n_x_estimate",
        "error_scale",
        "error_ratio",
    ]);
    t.notes.push(format!("m_star: {}", real(ctx.m_star)));
    t.rows = rows.into_iter().flatten().collect();
    Ok(Body::Csv(t))
}

pub fn mpl(cfg: &ExperimentConfig) -> CliResult<Body> {
    let s = Settings(cfg);
    let (beta, h) = s.point()?;
    if h != 0.0 {
        return Err(CliError::Config(format!("mpl needs h = 0, got {h}")));
    }
    let p = s.p();
    let setups = s
        .n_list()
        .par_iter()
        .map(|&n| {
            let st = MplSetup::new(beta, p, n)?;
            Ok((n, st.distance()?, st.w_distance()?, st.variance))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let report = RateReport::new("mpl_kolmogorov", RateAxis::LogNOverLogN, setups.iter().map(|r| (r.0, r.1)).collect())?;
    let mut t = Table::new(vec!["N", "distance", "w_distance", "variance", "identity_residual"]);
    t.notes = fit_notes(&report);
    for (n, d, w, v) in setups {
        t.push(vec![n.to_string(), real(d), real(w), real(v.variance), real(v.identity_residual)]);
    }
    Ok(Body::Csv(t))
}

pub fn sample(cfg: &ExperimentConfig) -> CliResult<Body> {
    let s = Settings(cfg);
    let base = s.params()?;
    let seed = s.seed();
    let count = cfg.samples.unwrap_or(1000);
    let method = cfg.method.unwrap_or(SampleMethod::Exact);
    let schedule =
        ChainSchedule { burn_in: cfg.burn_in.unwrap_or(1000), thin: cfg.thin.unwrap_or(1), samples: count };
    let ns = s.n_list();
    let draws = ns
        .par_iter()
        .enumerate()
        .map(|(i, &n)| {
            let params = base.sized(n)?;
            let sums: Vec<i64> = match method {
                SampleMethod::Exact => {
                    let law = build_law(&params)?;
                    let mut rng = stream_rng(seed, i as u64);
                    sample_magnetization(&law, &mut rng, count).into_iter().map(|k| law.spin_sum(k)).collect()
                }
                SampleMethod::Glauber => run_chain(&params, seed, i as u64, schedule)?,
            };
            Ok((n, sums))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut t = Table::new(vec!["N", "index", "spin_sum", "x_bar"]);
    t.notes.push(format!("method: {}", if method == SampleMethod::Exact { "exact" } else { "glauber" }));
    t.notes.push("stream: position of N in the sorted size list".into());
    for (n, sums) in draws {
        for (j, sv) in sums.into_iter().enumerate() {
            t.push(vec![n.to_string(), j.to_string(), sv.to_string(), real(sv as f64 / n as f64)]);
        }
    }
    Ok(Body::Csv(t))
}

pub fn special(cfg: &ExperimentConfig) -> CliResult<Body> {
    let p = Settings(cfg).p();
    Ok(Body::Json(json!({ "p": p, "special_points": special_points(p)? })))
}

pub fn critical_curve_cmd(cfg: &ExperimentConfig) -> CliResult<Body> {
    let s = Settings(cfg);
    let p = s.p();
    let betas = cfg.beta_grid.as_ref().map(|g| g.0.clone()).unwrap_or_else(|| {
        (0..51).map(|i| 0.5 + 0.01 * i as f64).collect()
    });
    let chunks: Vec<Vec<f64>> = betas.chunks(8).map(|c| c.to_vec()).collect();
    let traced = chunks
        .par_iter()
        .map(|c| critical_curve(p, c).map_err(CliError::from))
        .collect::<CliResult<Vec<_>>>()?;
    let mut t = Table::new(vec!["beta", "h", "m_low", "m_high"]);
    t.notes.push(format!("p: {p}"));
    for (b, cp) in traced.into_iter().flatten() {
        match cp {
            Some(c) => t.push(vec![real(b), real(c.h), real(c.m_low), real(c.m_high)]),
            None => t.push(vec![real(b), String::new(), String::new(), String::new()]),
        }
    }
    Ok(Body::Csv(t))
}

pub fn beta_star_cmd(cfg: &ExperimentConfig) -> CliResult<Body> {
    let p = Settings(cfg).p();
    Ok(Body::Json(json!({ "p": p, "beta_star": beta_star(p)? })))
}
