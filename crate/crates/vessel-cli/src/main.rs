//! `vessel` binary: build finite-rank vessels from spectral measures and
//! emit potential grids, KdV evolution tables, kernel comparisons, boundary
//! tables, and verification reports.
//!
//! Exit codes: 0 success, 1 a verification gate failed, 2 configuration
//! error, 3 numerical singularity (tau zero crossing or an ill-conditioned
//! integral system).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::exit;

use clap::{Args, Parser, Subcommand};
use vessel_core::VesselError;

#[derive(Parser)]
#[command(
    name = "vessel",
    version,
    about = "Finite-rank spectral vessels: potentials, kernels, KdV flows, verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct the potential two independent ways (vessel algebra vs
    /// integral equation) and tabulate both with their difference.
    Potential(GridArgs),
    /// Evolve the potential through the KdV flow and tabulate flow residuals.
    Evolve(GridArgs),
    /// Run the verification suite and emit a JSON report.
    Verify(VerifyArgs),
    /// Compare the vessel kernel against the integral-equation kernel.
    GlCompare(GridArgs),
    /// Tabulate the boundary value q(0, t) next to the spectral trace series.
    Boundary(GridArgs),
}

/// Flags shared by the table-producing subcommands.
#[derive(Args)]
struct GridArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Write the table here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pass/fail threshold override.
    #[arg(long)]
    tol: Option<f64>,
    /// Finite-difference step override.
    #[arg(long = "fd-step")]
    fd_step: Option<f64>,
    /// Quadrature node count override.
    #[arg(long = "quad-points")]
    quad_points: Option<usize>,
}

/// Flags for the verification subcommand.
#[derive(Args)]
struct VerifyArgs {
    /// Optional JSON run configuration; without one the suite runs on a
    /// seeded sample measure.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the fallback sample measure.
    #[arg(long)]
    seed: Option<u64>,
    /// Corrupt one side of the transfer-symmetry product (negative control).
    #[arg(long = "corrupt-x", hide = true)]
    corrupt_x: bool,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Potential(args) => commands::cmd_potential(args),
        Command::Evolve(args) => commands::cmd_evolve(args),
        Command::Verify(args) => commands::cmd_verify(args),
        Command::GlCompare(args) => commands::cmd_gl_compare(args),
        Command::Boundary(args) => commands::cmd_boundary(args),
    };
    match outcome {
        Ok(code) => exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            exit(exit_code_for(&err));
        }
    }
}

/// Map an error chain onto the documented exit codes: numerical
/// singularities exit 3, everything else (configuration, I/O, domain
/// errors) exits 2.
fn exit_code_for(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(vessel_err) = cause.downcast_ref::<VesselError>() {
            return match vessel_err {
                VesselError::SingularGram { .. }
                | VesselError::IllConditioned { .. }
                | VesselError::SpectrumProximity { .. } => 3,
                _ => 2,
            };
        }
    }
    2
}
