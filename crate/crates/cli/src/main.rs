use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};
use lnpr_cli::{run_subcommand, Flags, Subcommand, EXIT_OK, EXIT_VALIDATION};

#[derive(Parser)]
#[command(name = "lnpr", version, about = "Photorefraction models for lithium-niobate waveguide circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing)
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for synthetic noise; overrides `run.seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Reject unknown configuration keys
    #[arg(long)]
    strict: bool,
    /// Suppress progress and warnings on stderr
    #[arg(long)]
    quiet: bool,
}

#[derive(clap::Subcommand)]
enum Command {
    /// Simulate probe transmission traces through the facet cavity
    FpiTrace(Common),
    /// Free spectral range, linewidth and finesse of the facet cavity
    FpiChar(Common),
    /// Coupler reflectivity against pump power
    CouplerSweep(Common),
    /// Homodyne noise against LO phase
    Homodyne(Common),
    /// Quadrature spectra and optimal levels of a detuned squeezer
    OpoSpectrum(Common),
    /// Down-conversion spectra against pump power
    SpdcSpectrum(Common),
    /// Squeezing lost to the homodyne coupler and to phase matching
    SqueezeBudget(Common),
    /// Fit the index law to coupler reflectivity sweeps
    FitDn(Common),
    /// Fit the index excursion to a probe transmission trace
    FitFpi(Common),
}

impl Command {
    fn split(self) -> (Subcommand, Common) {
        match self {
            Command::FpiTrace(c) => (Subcommand::FpiTrace, c),
            Command::FpiChar(c) => (Subcommand::FpiChar, c),
            Command::CouplerSweep(c) => (Subcommand::CouplerSweep, c),
            Command::Homodyne(c) => (Subcommand::Homodyne, c),
            Command::OpoSpectrum(c) => (Subcommand::OpoSpectrum, c),
            Command::SpdcSpectrum(c) => (Subcommand::SpdcSpectrum, c),
            Command::SqueezeBudget(c) => (Subcommand::SqueezeBudget, c),
            Command::FitDn(c) => (Subcommand::FitDn, c),
            Command::FitFpi(c) => (Subcommand::FitFpi, c),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION as u8)
            } else {
                ExitCode::from(EXIT_OK as u8)
            };
        }
    };
    let (command, common) = cli.command.split();
    let flags = Flags {
        config: common.config,
        out: common.out,
        seed: common.seed,
        strict: common.strict,
        quiet: common.quiet,
    };
    let report = run_subcommand(command, &flags);
    ExitCode::from(report.exit_code as u8)
}
