use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "kerrmag", version, about = "Kerr cavity-magnomechanics: steady states, dynamics, entanglement and sweeps")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Parameter file (JSON). Defaults to the built-in reference set.
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    /// Output directory (default `out`). `steady` and stationary
    /// `entangle` only write files when it is given.
    #[arg(long, global = true, env = "KERRMAG_OUT")]
    pub out: Option<PathBuf>,
    /// Named sweep recipe: fig1, fig2, fig3 or fig5.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true, env = "KERRMAG_WORKERS")]
    pub workers: Option<usize>,
    /// Integrator tolerance (relative and absolute).
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Evaluate sweeps on the calling thread only.
    #[arg(long, global = true)]
    pub serial: bool,
    /// Override the drive power [mW].
    #[arg(long, global = true)]
    pub power_mw: Option<f64>,
    /// Override the magnon detuning, in units of ω_b.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub delta_m: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fixed points, stability, bistability window and switching points.
    Steady,
    /// Mean-field (and optionally covariance) trajectory.
    Dynamics(commands::DynamicsArgs),
    /// Log-negativity of a mode pair and magnon Wigner snapshots.
    Entangle(commands::EntangleArgs),
    /// Parameter sweep from a preset or a sweep file.
    Sweep(commands::SweepArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Steady => commands::steady(&cli.global),
        Command::Dynamics(a) => commands::dynamics(&cli.global, a),
        Command::Entangle(a) => commands::entangle(&cli.global, a),
        Command::Sweep(a) => commands::sweep(&cli.global, a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            if let Some(hint) = e.hint {
                eprintln!("hint: {hint}");
            }
            ExitCode::from(e.code)
        }
    }
}
