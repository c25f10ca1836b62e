//! `nonmarkov`: run coefficient, probe, master-equation, oracle and sweep
//! scenarios from a TOML config and write CSV/JSON tables for plotting.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};

use crate::commands::Ctx;
use crate::error::CliError;
use crate::output::{sha256_hex, Manifest};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// W, Γ, Γ̃, Ω̃ and V per sample
    Coefficients,
    /// Decoherence factor with and without the Markov approximation
    Probe,
    /// Master-equation evolution of one mode
    Evolve,
    /// Residuals of the Volterra solution against exact diagonalization
    OracleCheck,
    /// Probe over the `[sweep]` coupling list
    Sweep,
}

#[derive(Debug, Parser)]
#[command(name = "nonmarkov", version, about = "Exact non-Markovian open-system dynamics")]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// Scenario file (TOML)
    #[arg(long)]
    config: PathBuf,

    /// Output directory, overrides `[output] dir`
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// `section.key=value`, applied before validation; repeatable
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("NONMARKOV_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("NONMARKOV_THREADS must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let start = Instant::now();
    let (config, hashed) = config::load(&cli.config, &cli.overrides)?;
    let dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from(&config.output.dir));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let ctx = Ctx {
        config: &config,
        dir: &dir,
        format: config.output.format,
    };
    let pool = thread_pool()?;
    let files = pool.install(|| match cli.command {
        Command::Coefficients => commands::coefficients(&ctx),
        Command::Probe => commands::probe(&ctx),
        Command::Evolve => commands::evolve(&ctx),
        Command::OracleCheck => commands::oracle_check(&ctx),
        Command::Sweep => commands::sweep(&ctx),
    })?;

    let name = cli.command.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    Manifest {
        tool: "nonmarkov",
        version: env!("CARGO_PKG_VERSION"),
        command: name,
        config: cli.config.display().to_string(),
        config_sha256: sha256_hex(&hashed),
        overrides: cli.overrides.clone(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        files: files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
    }
    .write(&dir)?;
    for f in &files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nonmarkov: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
