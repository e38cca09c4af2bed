mod commands;
mod config;
mod selftest;

use clap::{Parser, Subcommand};
use config::{ConfigError, ExperimentConfig};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "phi4", version, about = "Skeleton solvers, controls and Monte Carlo experiments for the periodic Phi^4 model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML or JSON config; a written manifest.json is accepted too.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config and every nested seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (falls back to the config, then PHI4_WORKERS, then all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (default "out").
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve the skeleton equation from the configured target with the configured forcing.
    SolveSkeleton,
    /// Quasi-potential certificate: a path from 0 to the target of cost close to 2S.
    Certificate,
    /// Exact nonlinear control from 0 to the target.
    Control,
    /// Control driving a ball of starts near the target within budget 2S + gamma/2.
    LowerBoundControl,
    /// Monte Carlo tube probabilities against the rate of a skeleton path.
    McLdp,
    /// Tails of the action under the invariant measure.
    Tails,
    /// Coming down from infinity across initial condition magnitudes.
    Cdfi,
    /// Excursion frequencies outside a small ball.
    Excursions,
    /// Reduced invariant suite; exits nonzero if any check fails.
    Selftest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::SolveSkeleton => "solve-skeleton",
            Command::Certificate => "certificate",
            Command::Control => "control",
            Command::LowerBoundControl => "lower-bound-control",
            Command::McLdp => "mc-ldp",
            Command::Tails => "tails",
            Command::Cdfi => "cdfi",
            Command::Excursions => "excursions",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numeric(#[from] phi4::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
    #[error("{0} selftest check(s) failed")]
    SelftestFailed(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use phi4::Error as E;
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(e) => match e {
                E::InvalidGrid(_) | E::InvalidArgument(_) | E::GridMismatch(..) => 1,
                E::Blowup { .. } => 2,
                E::NoConvergence { .. } | E::HorizonExhausted { .. } | E::BudgetExceeded { .. } => 3,
                E::InsufficientData(_) => 4,
                _ => 6,
            },
            CliError::SelftestFailed(_) => 5,
            CliError::Io(_) | CliError::Pool(_) => 6,
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    subcommand: &'static str,
    config: &'a ExperimentConfig,
}

/// Applies the flags and the master seed, then validates.
fn resolve(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.mc_ldp.tube.seed = cfg.seed;
    cfg.lower_bound.options.seed = cfg.seed;
    if let Some(o) = &cli.out {
        cfg.out = Some(o.display().to_string());
    }
    cfg.workers = cli.workers.or(cfg.workers).or_else(env_workers);
    cfg.validate()?;
    Ok(cfg)
}

fn env_workers() -> Option<usize> {
    std::env::var("PHI4_WORKERS").ok()?.trim().parse().ok()
}

fn run(cli: &Cli) -> Result<Vec<String>, CliError> {
    let cfg = resolve(cli)?;
    let out = PathBuf::from(cfg.out.as_deref().unwrap_or("out"));
    std::fs::create_dir_all(&out)?;
    let manifest = Manifest { version: env!("CARGO_PKG_VERSION"), subcommand: cli.command.name(), config: &cfg };
    commands::write_json(&out, "manifest.json", &manifest)?;
    let workers = cfg.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))?;
    pool.install(|| dispatch(cli.command, &cfg, &out))
}

fn dispatch(cmd: Command, cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>, CliError> {
    match cmd {
        Command::SolveSkeleton => commands::solve(cfg, out),
        Command::Certificate => commands::certificate(cfg, out),
        Command::Control => commands::control(cfg, out),
        Command::LowerBoundControl => commands::lower_bound(cfg, out),
        Command::McLdp => commands::mc_ldp(cfg, out),
        Command::Tails => commands::tails(cfg, out),
        Command::Cdfi => commands::cdfi(cfg, out),
        Command::Excursions => commands::excursions(cfg, out),
        Command::Selftest => selftest::run(cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
