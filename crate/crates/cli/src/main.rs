//! Command-line front end for the photon-chaos toolkit.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::FileConfig;

#[derive(Debug, Parser)]
#[command(
    name = "photon-chaos",
    version,
    about = "Mode competition, wedge billiards and pattern statistics"
)]
pub struct Cli {
    /// JSON configuration file (with `schema_version`); flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for randomized commands; a fresh one is drawn and echoed if absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Write tabular output (CSV) to this path.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo win probabilities, optionally swept over the mode-0 fraction.
    Compete(SystemArgs),
    /// Generalized Born rule and the analytic two-mode winner probability.
    Born(BornArgs),
    /// One stochastic trajectory.
    Trajectory(TrajectoryArgs),
    /// Classical wedge trajectory and Lyapunov exponent.
    Billiard(BilliardArgs),
    /// Regular-versus-chaotic map over pump positions.
    StabilityMap(StabilityArgs),
    /// Normalised intensity entropy of patterns.
    Entropy(AnalysisArgs),
    /// Pearson correlations between patterns.
    Correlate(CorrelateArgs),
    /// Porter–Thomas comparison of patterns.
    PtFit(AnalysisArgs),
    /// Synthetic chaotic or regular patterns.
    Synth(SynthArgs),
}

/// Comma-separated numbers, parsed as one value.
pub type NumList = Vec<f64>;

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad number `{t}`")))
        .collect()
}

#[derive(Debug, Clone, Args, Default)]
pub struct SystemArgs {
    #[arg(long)]
    pub modes: Option<usize>,
    /// Comma-separated gains (1/s); one value applies to all modes.
    #[arg(long, value_parser = parse_list)]
    pub gains: Option<NumList>,
    #[arg(long, value_parser = parse_list)]
    pub losses: Option<NumList>,
    #[arg(long, value_parser = parse_list)]
    pub noise: Option<NumList>,
    #[arg(long)]
    pub beta_diag: Option<f64>,
    #[arg(long)]
    pub beta_off: Option<f64>,
    /// Total initial population Z.
    #[arg(long)]
    pub z_total: Option<f64>,
    /// Comma-separated initial population fractions.
    #[arg(long, value_parser = parse_list)]
    pub fractions: Option<NumList>,
    /// Comma-separated values of the mode-0 fraction to sweep.
    #[arg(long, value_parser = parse_list)]
    pub sweep: Option<NumList>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub rate_step: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub record_stride: Option<usize>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct BornArgs {
    /// Comma-separated initial populations.
    #[arg(long, value_parser = parse_list)]
    pub populations: Option<NumList>,
    /// Comma-separated net gains g - kappa (1/s).
    #[arg(long, value_parser = parse_list)]
    pub gammas: Option<NumList>,
    #[arg(long)]
    pub t_star: Option<f64>,
    /// Use the exact exponent constant instead of 3.
    #[arg(long)]
    pub exact_alpha: bool,
    /// Noise strengths for the analytic two-mode probability.
    #[arg(long, value_parser = parse_list)]
    pub noise: Option<NumList>,
    /// Time for the analytic two-mode probability (s).
    #[arg(long)]
    pub time: Option<f64>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Trial index whose random stream is used.
    #[arg(long)]
    pub trial: Option<u64>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct BilliardArgs {
    #[arg(long)]
    pub angle_deg: Option<f64>,
    #[arg(long)]
    pub gravity: Option<f64>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub y0: Option<f64>,
    #[arg(long)]
    pub vx0: Option<f64>,
    #[arg(long)]
    pub vy0: Option<f64>,
    /// Launch on the periodic orbit through (x0, y0) instead.
    #[arg(long)]
    pub periodic: bool,
    #[arg(long)]
    pub bounces: Option<usize>,
    /// Stop at this time instead of after a number of bounces.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Recorded points inside each flight.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub lyapunov: bool,
    /// Lyapunov horizon (s).
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct StabilityArgs {
    #[arg(long)]
    pub angle_deg: Option<f64>,
    #[arg(long)]
    pub gravity: Option<f64>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub pump_diameter: Option<f64>,
    #[arg(long)]
    pub confidence: Option<f64>,
    /// Grid size as NXxNY, e.g. 101x101.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub y_min: Option<f64>,
    #[arg(long)]
    pub y_max: Option<f64>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct AnalysisArgs {
    /// Pattern files (.pgm or .csv).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// 0/1 mask image applied to every input.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct CorrelateArgs {
    /// Pattern files in order.
    pub inputs: Vec<PathBuf>,
    /// Text file listing pattern paths, one per line (appended to the inputs).
    #[arg(long)]
    pub list: Option<PathBuf>,
    /// Correlate each pattern with the next instead of all pairs.
    #[arg(long)]
    pub scan: bool,
    #[arg(long)]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct SynthArgs {
    /// chaotic or regular
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub angle_deg: Option<f64>,
    #[arg(long)]
    pub gravity: Option<f64>,
    #[arg(long)]
    pub mass: Option<f64>,
    /// Particle energy (J); overrides --turning-height.
    #[arg(long)]
    pub energy: Option<f64>,
    /// Height (m) at which the particle energy is purely potential.
    #[arg(long)]
    pub turning_height: Option<f64>,
    /// Grid as HxW, e.g. 128x128.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// pgm or csv
    #[arg(long)]
    pub format: Option<String>,
    /// 8 or 16
    #[arg(long)]
    pub bits: Option<u32>,
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig {
            schema_version: config::SCHEMA_VERSION,
            ..Default::default()
        },
    };
    let run = || commands::run(cli, &file);
    let report = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .context("building the thread pool")?
            .install(run)?,
        None => run()?,
    };
    let text = serde_json::to_string_pretty(&report)?;
    match &cli.output {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}
