//! `bowtie`: cavity design, NV spin tuning, field maps, coupling and
//! transmission spectroscopy from the command line.
//!
//! Settings come from an optional TOML file (`--config` or `BOWTIE_CONFIG`)
//! and command-line flags; flags win. Errors go to stderr as
//! `ERROR:<module>:<code>: <message>` with a nonzero exit status.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{couple, design, fieldmap, fit, spectrum, spins, Context};
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "bowtie", version, about = "Lumped-element cavity and NV ensemble toolkit")]
struct Cli {
    /// TOML run configuration
    #[arg(long, global = true, env = "BOWTIE_CONFIG")]
    config: Option<PathBuf>,

    /// Directory for output files (default: config `output.dir`, else `.`)
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Also write gnuplot-ready `.dat` files
    #[arg(long, global = true)]
    emit_plot_data: bool,

    /// Print the JSON result to stdout instead of a table
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Capacitance, inductance and eigenfrequency of a cavity geometry
    Design(design::DesignArgs),
    /// NV transition frequencies versus static field, optional Zeeman tuning
    Spins(spins::SpinsArgs),
    /// Generate or ingest a field map and report its homogeneity
    Fieldmap(fieldmap::FieldMapArgs),
    /// Single-spin and collective coupling, cooperativity
    Couple(couple::CoupleArgs),
    /// Simulate |S21|² and optionally an avoided-crossing map
    Spectrum(spectrum::SpectrumArgs),
    /// Fit the coupled-mode model to a measured spectrum
    Fit(fit::FitArgs),
    /// Print the physical constants used everywhere else
    Constants,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let out_dir = cli.out_dir.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let plot_data = cli.emit_plot_data || cfg.output.plot_data.unwrap_or(false);
    let ctx = Context { cfg, out_dir, plot_data, json: cli.json };
    match cli.command {
        Command::Design(args) => design::run(ctx, args),
        Command::Spins(args) => spins::run(ctx, args),
        Command::Fieldmap(args) => fieldmap::run(ctx, args),
        Command::Couple(args) => couple::run(ctx, args),
        Command::Spectrum(args) => spectrum::run(ctx, args),
        Command::Fit(args) => fit::run(ctx, args),
        Command::Constants => commands::constants(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let mut lines = msg.lines();
            let first = lines.next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("ERROR:cli:usage: {first}");
            for line in lines {
                eprintln!("{line}");
            }
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ERROR:{}:{}: {e}", e.module(), e.code());
            ExitCode::FAILURE
        }
    }
}
