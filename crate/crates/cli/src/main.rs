//! Config-driven experiment runner: pressure sweeps, ergodic optimization,
//! spanning-set entropy estimates, the gluing construction with its
//! certificate, suspension-flow roots, and artifact re-verification.
//!
//! Exit codes: 0 success, 1 input error, 2 certification failure.

mod commands;
mod output;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "shiftlab", version, about = "thermodynamic formalism experiments on shifts of finite type")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classical pressure: spectral oracle plus a separated-set estimator
    /// sweep over word lengths.
    Pressure {
        #[arg(long)]
        system: PathBuf,
        /// Weight potential file; defaults to zero (topological entropy).
        #[arg(long)]
        psi: Option<PathBuf>,
        /// Largest word length of the sweep.
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 0.125)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Birkhoff spectrum endpoints, irregularity verdict, and the
    /// finite-scale coboundary residual.
    Ergopt {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        phi: PathBuf,
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Weighted spanning-set estimator sweep against the exact
    /// entropy-plus-integral oracle.
    Katok {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        psi: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 0.125)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// The gluing construction: schedule, levels, an emitted point with its
    /// oscillation report, and the certified pressure lower bound.
    Construct {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        phi: PathBuf,
        /// Weight potential; defaults to zero (entropy bound).
        #[arg(long)]
        psi: Option<PathBuf>,
        #[arg(long)]
        mu1: PathBuf,
        #[arg(long)]
        mu2: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        #[arg(long, default_value_t = 4)]
        kmax: usize,
        /// Symbol budget for the final prescription time.
        #[arg(long, default_value_t = 1_000_000)]
        budget: usize,
        #[arg(long, default_value_t = 0.125)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.4)]
        r1: f64,
        #[arg(long, default_value_t = 2.25)]
        r2: f64,
        #[arg(long, default_value_t = 0.1)]
        r3: f64,
        /// Seed for sampling (address, ball plan, level sampling).
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Suspension flow over the base system: the entropy root, a pressure
    /// grid, and (with an observable) ratio extrema and the flow
    /// irregularity verdict.
    Suspend {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        roof: PathBuf,
        #[arg(long)]
        phi: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-runs the construction recorded in an output directory and checks
    /// that every artifact reproduces byte for byte.
    Verify {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Pressure { system, psi, n, epsilon, out } => {
            commands::run_pressure(&system, psi.as_deref(), n, epsilon, &out)
        }
        Command::Ergopt { system, phi, n, out } => commands::run_ergopt(&system, &phi, n, &out),
        Command::Katok { system, measure, psi, gamma, n, epsilon, out } => {
            commands::run_katok(&system, &measure, psi.as_deref(), gamma, n, epsilon, &out)
        }
        Command::Construct {
            system,
            phi,
            psi,
            mu1,
            mu2,
            gamma,
            kmax,
            budget,
            epsilon,
            r1,
            r2,
            r3,
            seed,
            out,
        } => commands::run_construct(commands::ConstructArgs {
            system,
            phi,
            psi,
            mu1,
            mu2,
            gamma,
            k_max: kmax,
            budget,
            epsilon,
            r: (r1, r2, r3),
            seed,
            out,
        }),
        Command::Suspend { system, roof, phi, out } => {
            commands::run_suspend(&system, &roof, phi.as_deref(), &out)
        }
        Command::Verify { out } => commands::run_verify(&out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(commands::CliError::Certification(msg)) => {
            eprintln!("certification failure: {msg}");
            ExitCode::from(2)
        }
    }
}
