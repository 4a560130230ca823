use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use viscowave::certificate::Formulas;
use viscowave_cli::config::{self, RunConfig};
use viscowave_cli::{certify, selfcheck, simulate, sweep};

#[derive(Parser)]
#[command(name = "viscowave", version, about = "Viscoelastic wave equation with delayed feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` in the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for sweeps; 0 uses all cores
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the stability constants; exit 0 if certified, 2 if not
    Certify,
    /// Run one simulation and write energy.csv, report.json, energy.svg
    Simulate,
    /// Simulate over a list of gains and write sweep.csv
    Sweep,
    /// Run the built-in consistency checks
    Selfcheck,
}

fn load(cli: &Cli) -> Result<(RunConfig, PathBuf)> {
    let path = cli.config.as_deref().context("--config is required for this command")?;
    let config = config::load(path)?;
    let out = cli
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok((config, out))
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global()?;
    }
    match cli.command {
        Command::Certify => {
            let (config, out) = load(cli)?;
            let certified = certify::cmd_certify(&config, &out, cli.seed)?;
            print_done(&out, if certified { "certified" } else { "not certified" });
            Ok(ExitCode::from(if certified { 0 } else { 2 }))
        }
        Command::Simulate => {
            let (config, out) = load(cli)?;
            simulate::cmd_simulate(&config, &out, cli.seed)?;
            print_done(&out, "simulation complete");
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep => {
            let (config, out) = load(cli)?;
            let rows = sweep::cmd_sweep(&config, &out, cli.seed)?;
            let failed = rows.iter().filter(|r| r.sigma_emp.is_nan() && r.error.is_some()).count();
            print_done(&out, &format!("{} rows, {failed} failed", rows.len()));
            Ok(ExitCode::SUCCESS)
        }
        Command::Selfcheck => {
            let checks = selfcheck::run_checks(Formulas::STANDARD, cli.seed);
            print!("{}", selfcheck::render(&checks));
            Ok(if checks.iter().all(|c| c.pass) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn print_done(out: &Path, what: &str) {
    println!("{what}; outputs in {}", out.display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
