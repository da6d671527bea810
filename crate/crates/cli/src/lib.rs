//! `pseudoiid` command-line runner.
//!
//! Every subcommand reads one TOML config (or a built-in preset), writes CSV
//! and JSON files to the output directory and prints a JSON summary of what
//! it wrote. Config errors exit with 2, failed computations with 1; both
//! print a JSON error object on stderr.

pub mod commands;
pub mod config;
pub mod error;
pub mod inputs;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

use pseudoiid::RngSeed;

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "pseudoiid", version, about = "Pseudo-iid ensembles, regime checks, NNGP kernels and posteriors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in configuration (fig2 ... fig9, cauchy, orthogonal, toy, eoc).
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Overrides the config's `seed` (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config's `out` (default `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides every Monte-Carlo trial count in the config.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Draw weight matrices and write their nonzero triplets.
    Sample,
    /// Classify weight laws against the four Pseudo-iid conditions.
    Check,
    /// NNGP kernel tables for every layer.
    Kernel,
    /// Monte-Carlo ensembles of probed preactivations.
    Simulate,
    /// Ensembles plus Gaussian fits against the kernel prediction.
    Compare,
    /// Edge-of-chaos curve.
    Eoc,
    /// NNGP posterior on a regression set.
    Posterior,
    /// List the built-in presets.
    Presets,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Check => "check",
            Command::Kernel => "kernel",
            Command::Simulate => "simulate",
            Command::Compare => "compare",
            Command::Eoc => "eoc",
            Command::Posterior => "posterior",
            Command::Presets => "presets",
        }
    }
}

/// Parse `args`, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let err = CliError::config(e.to_string().trim().to_string(), None);
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            err.exit_code()
        }
    }
}

fn load(cli: &Cli) -> Result<config::RunConfig, CliError> {
    let text = match (&cli.config, &cli.preset) {
        (Some(_), Some(_)) => return Err(CliError::config("give either --config or --preset, not both", None)),
        (None, None) => return Err(CliError::config("one of --config or --preset is required", None)),
        (Some(path), None) => std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display()), None))?,
        (None, Some(name)) => config::preset(name)?.to_string(),
    };
    config::parse(&text)
}

pub fn run(cli: &Cli) -> Result<serde_json::Value, CliError> {
    if cli.command == Command::Presets {
        let names: Vec<&str> = config::PRESETS.iter().map(|(n, _)| *n).collect();
        return Ok(json!({ "presets": names }));
    }
    let cfg = load(cli)?;
    if cli.trials == Some(0) {
        return Err(CliError::config("--trials must be positive", None));
    }
    let ctx = commands::Ctx {
        seed: RngSeed::new(cli.seed.or(cfg.seed).unwrap_or(0)),
        out: cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
        trials: cli.trials,
    };
    let threads = match cli.threads {
        Some(0) => return Err(CliError::config("--threads must be positive", None)),
        Some(n) => n,
        None => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let files = pool.install(|| commands::dispatch(cli.command, &cfg, &ctx))?;
    Ok(json!({ "command": cli.command.name(), "out": ctx.out, "files": files }))
}
