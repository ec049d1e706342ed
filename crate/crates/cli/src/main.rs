//! `fsd`: run one study from a JSON config and emit its report.
//!
//! Exit status: 0 on success, 2 when a checked hypothesis does not hold (the
//! numbers are still reported), 1 on error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use spectral_fsd::commands::{run_command, write_outputs, Subcommand};
use spectral_fsd::config::{load_config, parse_config_str, OutputFormat};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Kstar,
    Rate,
    Theta,
    Fit,
    Mc,
    Sobolev,
    Plateau,
    Compare,
    SingleIndex,
    Omega,
    Match,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Kstar => Subcommand::Kstar,
            Command::Rate => Subcommand::Rate,
            Command::Theta => Subcommand::Theta,
            Command::Fit => Subcommand::Fit,
            Command::Mc => Subcommand::Mc,
            Command::Sobolev => Subcommand::Sobolev,
            Command::Plateau => Subcommand::Plateau,
            Command::Compare => Subcommand::Compare,
            Command::SingleIndex => Subcommand::SingleIndex,
            Command::Omega => Subcommand::Omega,
            Command::Match => Subcommand::Match,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "fsd", version, about = "Spectral-estimator rates, fits and Monte Carlo studies")]
struct Cli {
    command: Command,
    /// JSON config file.
    #[arg(long, required_unless_present = "inline", conflicts_with = "inline")]
    config: Option<PathBuf>,
    /// JSON config given on the command line.
    #[arg(long)]
    inline: Option<String>,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `parallelism`.
    #[arg(long)]
    parallelism: Option<usize>,
    /// Overrides `trials`.
    #[arg(long)]
    trials: Option<usize>,
    /// Directory for `<command>.json` and `<command>.csv`; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// What to print on stdout; overrides `output.format`.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn run(cli: Cli) -> Result<u8> {
    let mut config = match (&cli.config, &cli.inline) {
        (Some(path), _) => load_config(path)?,
        (None, Some(text)) => parse_config_str(text)?,
        (None, None) => unreachable!("clap requires one of --config and --inline"),
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if let Some(p) = cli.parallelism {
        config.parallelism = p;
    }
    if let Some(t) = cli.trials {
        config.trials = t;
    }
    if let Some(dir) = cli.out {
        config.output.dir = Some(dir);
    }
    if let Some(f) = cli.format {
        config.output.format = match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        };
    }

    let command = Subcommand::from(cli.command);
    let output = run_command(command, &config).with_context(|| format!("`fsd {command}` failed"))?;
    if let Some(dir) = &config.output.dir {
        let (json, csv) = write_outputs(&output, dir)?;
        eprintln!("wrote {} and {}", json.display(), csv.display());
    }
    let mut stdout = std::io::stdout().lock();
    match config.output.format {
        OutputFormat::Json => writeln!(stdout, "{}", output.report.to_json()),
        OutputFormat::Csv => write!(stdout, "{}", output.table.to_csv()),
    }
    .and_then(|()| stdout.flush())
    .context("writing to stdout")?;
    for p in output.report.preconditions.iter().filter(|p| p.gating && !p.holds) {
        eprintln!("hypothesis not met: {} ({})", p.name, p.detail);
    }
    Ok(output.status().exit_code())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
