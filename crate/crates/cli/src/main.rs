//! `lsmm`: reduce, analyse and simulate systems by least-squares moment matching.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::ProjectConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "lsmm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Project configuration file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides the seed of randomly generated systems.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce the system and write model.json and report.json.
    Reduce,
    /// Write the frequency response of the system and, if any, the model.
    Freqresp,
    /// Simulate system and model driven by the generator.
    Simulate,
    /// Compare the a priori error bound with the steady-state gain.
    Bound,
    /// Write a ready-made configuration: fss, inverter or lag.
    Example { name: String },
}

fn run(cli: &Cli) -> Result<(), CliError> {
    std::fs::create_dir_all(&cli.out)?;
    if let Command::Example { name } = &cli.command {
        let mut cfg = commands::example_config(name)?;
        if let Some(seed) = cli.seed {
            cfg.apply_seed(seed);
        }
        let path = cli.out.join(format!("{name}.json"));
        io::write_json(&path, &cfg)?;
        println!("{}", path.display());
        return Ok(());
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = ProjectConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.apply_seed(seed);
    }
    match cli.command {
        Command::Reduce => commands::reduce(&cfg, &cli.out),
        Command::Freqresp => commands::freqresp(&cfg, &cli.out),
        Command::Simulate => commands::simulate(&cfg, &cli.out),
        Command::Bound => commands::bound(&cfg, &cli.out),
        Command::Example { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LSMM_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lsmm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
