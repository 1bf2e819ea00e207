//! Command-line driver for the relaxed micromorphic benchmark studies.
//!
//! Every study emits a CSV table with a fixed column schema plus a JSON
//! manifest that echoes the resolved configuration, so a published number
//! can be traced back to the exact invocation that produced it. Exit codes
//! separate the failure classes: 0 on success, 2 for configuration errors,
//! 3 for solver failures, 4 when a golden-file comparison finds a mismatch.

mod config;
mod study;

use clap::{Parser, Subcommand};
use config::StudyArgs;

#[derive(Parser)]
#[command(
    name = "rmfem",
    version,
    about = "Quadrilateral finite element studies for the planar relaxed micromorphic model",
    after_help = "Formulations: primal-hybrid (H1 x H(curl)), mixed-hybrid (Lc-robust saddle \
                  point with the moment stress as an extra unknown), primal-nodal (H1 x [H1]^2 \
                  comparison), full-gradient (micromorphic model penalizing the full gradient \
                  of the microdistortion). Lc lists accept the literal 'inf' to select the \
                  curl-free limit problem, which only mixed-hybrid can pose."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and emit a single summary row
    Solve(StudyArgs),
    /// Solve a ladder of structured grids and append observed convergence rates
    Convergence(StudyArgs),
    /// Sweep the characteristic length on a fixed grid; when a companion
    /// "<case>_limit" registry entry exists, errors are measured against its
    /// limit fields instead of the case's own
    LcSweep(StudyArgs),
    /// Tabulate the total energy of the chosen formulation against the
    /// full-gradient model over a characteristic-length ladder
    EnergySweep(StudyArgs),
    /// Generate a structured (optionally perturbed) mesh file on a case's domain
    MeshGen(StudyArgs),
    /// Check the registered loads of benchmark cases against the strong form
    /// by finite differences at random interior points
    ResidualCheck(StudyArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => study::run_study("solve", args),
        Command::Convergence(args) => study::run_study("convergence", args),
        Command::LcSweep(args) => study::run_study("lc-sweep", args),
        Command::EnergySweep(args) => study::run_study("energy-sweep", args),
        Command::MeshGen(args) => study::run_mesh_gen(args),
        Command::ResidualCheck(args) => study::run_residual_check(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.code());
    }
}
