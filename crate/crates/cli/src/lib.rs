//! Command-line front end of `vibemu`: configuration, file formats and subcommands.

pub mod commands;
pub mod config;
pub mod files;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use commands::{MomentCheckFailed, ReconstructInput};
use config::RunConfig;

/// Compile molecular force fields into emulator parameters and simulate
/// the resulting quench experiments.
#[derive(Parser)]
#[command(name = "vibemu", version)]
pub struct Cli {
    /// Run configuration (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Reserved; every computation is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Circuit table and protocol plan for a molecule.
    Compile { molecule: PathBuf },
    /// Switch-time sweep of the quench encoded in a plan.
    Quench {
        plan: PathBuf,
        /// Comma-separated switch times in units of 1/Omega_max.
        #[arg(long, value_delimiter = ',')]
        t_sw_omega: Option<Vec<f64>>,
    },
    /// Franck-Condon profile and moment check.
    Fcp { molecule: PathBuf },
    /// SQUID parameters for target anharmonicity ratios.
    SquidDesign {
        /// c3/c2 target times phi0.
        #[arg(long, allow_hyphen_values = true)]
        cubic: f64,
        /// c4/c2 target times phi0^2.
        #[arg(long, allow_hyphen_values = true)]
        quartic: f64,
    },
    /// Spectral density from a GHZ excitation record.
    Reconstruct(ReconstructArgs),
    /// GHZ excitation record of a line spectrum.
    Forward { spectrum: PathBuf },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ReconstructArgs {
    /// Measured record with tau_ps and p1 columns.
    #[arg(long)]
    p1: Option<PathBuf>,
    /// Line spectrum, simulated through the forward model first.
    #[arg(long)]
    spectrum: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    if cli.threads == Some(0) {
        return Err(vibemu::Error::Argument("--threads must be at least 1".into()).into());
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let config = RunConfig::load(cli.config.as_deref())?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Compile { molecule } => commands::compile(&molecule, &config, out),
        Command::Quench { plan, t_sw_omega } => commands::quench(&plan, t_sw_omega, &config, out),
        Command::Fcp { molecule } => commands::fcp(&molecule, &config, out),
        Command::SquidDesign { cubic, quartic } => commands::squid_design(cubic, quartic, &config, out),
        Command::Reconstruct(args) => {
            let input = match (args.p1, args.spectrum) {
                (Some(p), _) => ReconstructInput::P1(p),
                (None, Some(s)) => ReconstructInput::Spectrum(s),
                (None, None) => unreachable!("clap enforces one input"),
            };
            commands::reconstruct(input, &config, out)
        }
        Command::Forward { spectrum } => commands::forward(&spectrum, &config, out),
    }
}

/// 2 validation, 3 numerical failure, 4 non-convergence or failed moment check.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<MomentCheckFailed>() {
            return 4;
        }
        if let Some(e) = cause.downcast_ref::<vibemu::Error>() {
            return match e {
                vibemu::Error::Numerical(_) => 3,
                vibemu::Error::Convergence(_) => 4,
                _ => 2,
            };
        }
    }
    2
}
