//! `krein-ridge`: spectra, single fits, learning curves and self-checks for
//! sphere-constrained indefinite kernel regression.
//!
//! Exit codes: 0 success, 1 a check failed, 2 usage error, 3 numerical or
//! solver failure.

mod config;
mod fit;
mod rate;
mod spectrum;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use config::RunConfig;
use krein_ridge::Tolerances;

pub const THREADS_ENV: &str = "KREIN_RIDGE_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "krein-ridge",
    version,
    about = "Sphere-constrained least squares with indefinite kernels"
)]
struct Cli {
    /// Master seed; every random draw derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for all outputs (created if missing).
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    /// JSON file whose entries override the flags (same layout as config-echo.json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Tolerance override `name=value`, repeatable (see config-echo.json for names).
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    tol: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Command {
    /// Gram-matrix eigenvalue spectra across sample sizes.
    Spectrum(spectrum::SpectrumArgs),
    /// Solve one sphere-constrained problem.
    Fit(fit::FitArgs),
    /// Learning curve with a fitted log-log slope.
    Rate(rate::RateArgs),
    /// Oracle and identity checks with a pass/fail table.
    Verify(verify::VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::Fit(_) => "fit",
            Command::Rate(_) => "rate",
            Command::Verify(_) => "verify",
        }
    }
}

/// Whether the command's own checks passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    ChecksFailed,
}

/// Shared state handed to every command.
pub struct Ctx {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub tolerances: Tolerances,
    threads: Option<usize>,
}

impl Ctx {
    pub fn path(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    /// Writes the fully resolved configuration next to the outputs.
    pub fn echo(&self, command: Command) -> krein_ridge::Result<()> {
        let cfg = RunConfig {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            threads: self.threads,
            tolerances: self.tolerances,
            command,
        };
        krein_ridge::io::write_json(&cfg, &self.path("config-echo.json"))
    }
}

fn exit_code(e: &krein_ridge::Error) -> u8 {
    if e.is_usage() {
        2
    } else {
        3
    }
}

fn threads_from_env() -> krein_ridge::Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(krein_ridge::Error::Argument(format!(
                "{THREADS_ENV} must be a positive integer, got '{v}'"
            ))),
        },
    }
}

fn resolve(cli: Cli) -> krein_ridge::Result<RunConfig> {
    let tolerances = config::apply_tolerance_overrides(Tolerances::default(), &cli.tol)?;
    let cfg = RunConfig {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cli.seed,
        output_dir: cli.output_dir,
        threads: threads_from_env()?,
        tolerances,
        command: cli.command,
    };
    match &cli.config {
        Some(path) => config::overlay_file(cfg, path),
        None => Ok(cfg),
    }
}

fn run(cfg: RunConfig) -> krein_ridge::Result<Status> {
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| krein_ridge::Error::Numeric(format!("thread pool: {e}")))?;
    }
    create_dir(&cfg.output_dir)?;
    let ctx = Ctx {
        seed: cfg.seed,
        output_dir: cfg.output_dir,
        tolerances: cfg.tolerances,
        threads: cfg.threads,
    };
    match cfg.command {
        Command::Spectrum(mut a) => spectrum::run(&mut a, &ctx),
        Command::Fit(mut a) => fit::run(&mut a, &ctx),
        Command::Rate(mut a) => rate::run(&mut a, &ctx),
        Command::Verify(mut a) => verify::run(&mut a, &ctx),
    }
}

fn create_dir(p: &Path) -> krein_ridge::Result<()> {
    std::fs::create_dir_all(p).map_err(|e| krein_ridge::Error::Io {
        path: p.to_path_buf(),
        source: e,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = resolve(cli).and_then(run);
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
