//! Command-line experiments over the spinlab library.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{render, Body, Meta};

pub const THREADS_ENV: &str = "SPINLAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "spinlab", version, about = "Exact finite-size experiments for the p-spin Curie-Weiss model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Opts {
    /// JSON configuration; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: ExperimentConfig,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stationary points, global maximizers and regime of one point.
    Classify(Opts),
    /// Classification over a β×h grid.
    PhaseDiagram(Opts),
    /// Moderate-deviation tail ratios against the limit law.
    MdRatio(Opts),
    /// Kolmogorov distance to the limit law across sizes.
    Be(Opts),
    /// Exchangeable-pair constants and drift checks.
    Stein(Opts),
    /// Laplace expansion of the partial sums at a special point.
    Laplace(Opts),
    /// Pseudolikelihood estimator distance to its Gaussian limit.
    Mpl(Opts),
    /// Exact or Glauber samples of the spin sum.
    Sample(Opts),
    /// Special points for a given p.
    Special(Opts),
    /// Critical curve over a β grid.
    CriticalCurve(Opts),
    /// Consistency threshold β*(p).
    BetaStar(Opts),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Classify(_) => "classify",
            Command::PhaseDiagram(_) => "phase-diagram",
            Command::MdRatio(_) => "md-ratio",
            Command::Be(_) => "be",
            Command::Stein(_) => "stein",
            Command::Laplace(_) => "laplace",
            Command::Mpl(_) => "mpl",
            Command::Sample(_) => "sample",
            Command::Special(_) => "special",
            Command::CriticalCurve(_) => "critical-curve",
            Command::BetaStar(_) => "beta-star",
        }
    }

    pub fn opts(&self) -> &Opts {
        match self {
            Command::Classify(o)
            | Command::PhaseDiagram(o)
            | Command::MdRatio(o)
            | Command::Be(o)
            | Command::Stein(o)
            | Command::Laplace(o)
            | Command::Mpl(o)
            | Command::Sample(o)
            | Command::Special(o)
            | Command::CriticalCurve(o)
            | Command::BetaStar(o) => o,
        }
    }
}

/// File configuration overlaid with command-line flags, validated.
pub fn resolve_config(opts: &Opts) -> CliResult<ExperimentConfig> {
    let base = match &opts.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let cfg = base.overlay(&opts.flags);
    cfg.validate()?;
    Ok(cfg)
}

fn thread_count(cfg: &ExperimentConfig) -> CliResult<Option<usize>> {
    if let Some(t) = cfg.threads {
        return Ok(Some(t));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

fn dispatch(command: &Command, cfg: &ExperimentConfig) -> CliResult<Body> {
    use crate::commands as c;
    match command {
        Command::Classify(_) => c::classify(cfg),
        Command::PhaseDiagram(_) => c::phase_diagram(cfg),
        Command::MdRatio(_) => c::md_ratio(cfg),
        Command::Be(_) => c::be(cfg),
        Command::Stein(_) => c::stein(cfg),
        Command::Laplace(_) => c::laplace(cfg),
        Command::Mpl(_) => c::mpl(cfg),
        Command::Sample(_) => c::sample(cfg),
        Command::Special(_) => c::special(cfg),
        Command::CriticalCurve(_) => c::critical_curve_cmd(cfg),
        Command::BetaStar(_) => c::beta_star_cmd(cfg),
    }
}

/// Runs a parsed command and returns the rendered document together with
/// the configured output path.
pub fn execute(cli: &Cli, command_line: String) -> CliResult<(String, Option<PathBuf>)> {
    let cfg = resolve_config(cli.command.opts())?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = thread_count(&cfg)? {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let body = pool.install(|| dispatch(&cli.command, &cfg))?;
    let meta = Meta::new(command_line, cfg.hash(cli.command.name()), commands::Settings(&cfg).seed());
    Ok((render(&meta, &body), cfg.out.clone()))
}

/// Parses `args`, runs the command and writes its output; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let command_line = std::iter::once("spinlab".into())
        .chain(args.iter().skip(1).map(|a| a.to_string_lossy()))
        .collect::<Vec<_>>()
        .join(" ");
    let result = execute(&cli, command_line).and_then(|(text, out)| match out {
        Some(path) => std::fs::write(&path, text).map_err(|e| CliError::Io(path, e)),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io("<stdout>".into(), e))
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
