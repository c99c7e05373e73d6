//! Batch runner: `l1bound <subcommand> --config PATH [--seed U64] [--out DIR] [--workers N] [--svg]`.
//!
//! Exit codes: 0 pass, 1 invalid configuration, 2 a check failed, 3 solver failure.

// `!(x > 0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::{Context, Outcome};
use config::ExperimentConfig;
use error::CliError;
use output::Artifacts;

#[derive(Parser)]
#[command(name = "l1bound", version, about = "Experiments for l1-penalized M-estimation bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat TOML configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides `workers` from the config (default 1).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Also write SVG figures where available.
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Subcommand, Clone, Copy, Debug)]
enum Command {
    /// Greedy covering numbers and the polynomial envelope.
    Covering,
    /// Sparsification plan and its approximation error.
    Maurey,
    /// Base-process suprema against the expectation bound.
    Epsim,
    /// Loss-process tail frequencies and the symmetrization factor.
    Tail,
    /// One penalized fit.
    Solve,
    /// Coverage of the oracle inequality.
    Verify,
    /// Rate of the estimation error in n.
    Rate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Covering => "covering",
            Self::Maurey => "maurey",
            Self::Epsim => "epsim",
            Self::Tail => "tail",
            Self::Solve => "solve",
            Self::Verify => "verify",
            Self::Rate => "rate",
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    seed: u64,
    workers: usize,
    pass: bool,
    summary: &'a str,
    artifacts: Vec<String>,
    config: String,
    versions: Versions,
    wall_time_s: f64,
    /// Seconds since the Unix epoch; the only run-dependent field.
    timestamp: u64,
}

#[derive(Serialize)]
struct Versions {
    l1bound: &'static str,
    cli: &'static str,
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    let workers = config::at_least("workers", cfg.workers.unwrap_or(1), 1)?;
    let seed = cfg.seed_or_default();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start {workers} workers: {e}")))?;
    let mut out = Artifacts::open(&cli.out)?;
    let result = pool.install(|| {
        let mut ctx = Context { cfg: &cfg, seed, svg: cli.svg, out: &mut out };
        match cli.command {
            Command::Covering => commands::covering(&mut ctx),
            Command::Maurey => commands::maurey(&mut ctx),
            Command::Epsim => commands::epsim(&mut ctx),
            Command::Tail => commands::tail(&mut ctx),
            Command::Solve => commands::solve(&mut ctx),
            Command::Verify => commands::verify(&mut ctx),
            Command::Rate => commands::rate(&mut ctx),
        }
    });
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            out.discard();
            return Err(e);
        }
    };
    let manifest = Manifest {
        subcommand: cli.command.name(),
        seed,
        workers,
        pass: outcome.pass,
        summary: &outcome.summary,
        artifacts: out.names(),
        config: cfg.echo(),
        versions: Versions { l1bound: l1bound::VERSION, cli: env!("CARGO_PKG_VERSION") },
        wall_time_s: started.elapsed().as_secs_f64(),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    };
    if let Err(e) = out.write_json("manifest.json", &manifest) {
        out.discard();
        return Err(e);
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(o) if o.pass => {
            println!("{}: PASS ({})", cli.command.name(), o.summary);
            ExitCode::SUCCESS
        }
        Ok(o) => {
            let e = CliError::Check(o.summary);
            eprintln!("{}: FAIL ({e})", cli.command.name());
            ExitCode::from(e.exit_code())
        }
        Err(e) => {
            eprintln!("{}: error: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
