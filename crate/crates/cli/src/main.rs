//! Reproduction driver: step-scaling studies, the adiabatic-spiral benchmark,
//! Monte Carlo and perturbative reference tables, and the oracle-equivalence
//! report.
//!
//! Exit codes: 0 success; 2 configuration error; 3 convergence or degenerate-
//! spectrum error; 4 hardware-limit or coherence-budget error; 1 anything
//! else.

mod common;
mod mcref;
mod oracle_suite;
mod perturbative_cmd;
mod plot;
mod spiral_cmd;
mod stepscale;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use common::{GeomSpec, LatticePair, Sweep};

#[derive(Parser)]
#[command(name = "dtheory", version, about = "Lattice-to-continuum matching studies for a 2D spin regularization of the 1+1D O(3) sigma model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment.
    #[command(subcommand)]
    Run(RunCommand),
}

#[derive(Subcommand)]
enum RunCommand {
    /// Step-scaling curve F_s(z) over an anisotropy sweep (DMRG vacua).
    StepScale(StepScaleArgs),
    /// Adiabatic-spiral preparation benchmark with finite-shot readout.
    Spiral(SpiralArgs),
    /// Classical Monte Carlo reference table ("infrared anchor").
    McReference(McRefArgs),
    /// Two-loop perturbative reference table.
    Perturbative(PerturbativeArgs),
    /// Cross-implementation equivalence report (DMRG vs exact).
    OracleSuite(OracleSuiteArgs),
}

#[derive(Args)]
struct StepScaleArgs {
    /// Load the full config from a JSON file instead of flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "nn")]
    model: stepscale::Model,
    /// Lattice pair Lx:sLx (e.g. 6:8).
    #[arg(long, default_value = "6:8")]
    pair: LatticePair,
    #[arg(long, default_value_t = 6)]
    ly: usize,
    /// Anisotropy sweep lo:hi:n (Jx/Jy for nn, (ay/ax)^6 for d6).
    #[arg(long, default_value = "0.1:1.3:13")]
    sweep: Sweep,
    #[arg(long, default_value_t = 256)]
    bond: usize,
    #[arg(long, default_value_t = 1e-10)]
    trunc_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    mpo_tol: f64,
    #[arg(long, default_value_t = 1e-9)]
    energy_tol: f64,
    #[arg(long, default_value_t = 24)]
    max_sweeps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "runs/step-scale")]
    out: PathBuf,
    /// Sweep-point workers (tensor kernels already use threads).
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct SpiralArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Array geometry, e.g. 6x6 or 8x6.
    #[arg(long, default_value = "6x6")]
    geom: GeomSpec,
    /// Horizontal lattice spacing in μm (presets: 12.5, 12.1, 11.8, 11.1).
    #[arg(long, default_value_t = 12.5)]
    ax: f64,
    #[arg(long, default_value_t = 5000)]
    shots: usize,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 550)]
    bond: usize,
    /// Fixed energy penalty in MHz (skips the variational search).
    #[arg(long)]
    penalty: Option<f64>,
    /// Penalty search grid lo:hi:n (default: 0.1..0.8 in 0.05 steps).
    #[arg(long)]
    penalty_grid: Option<Sweep>,
    /// Golden-section refinement iterations after the grid scan.
    #[arg(long, default_value_t = 0)]
    refine: usize,
    /// Bond cap for the target-Hamiltonian DMRG (vacuum and gap).
    #[arg(long, default_value_t = 512)]
    dmrg_bond: usize,
    #[arg(long, default_value_t = 1000)]
    resamples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "runs/spiral")]
    out: PathBuf,
}

#[derive(Args)]
struct McRefArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bare-coupling sweep lo:hi:n.
    #[arg(long, default_value = "0.8:2.0:7")]
    g_sweep: Sweep,
    #[arg(long, default_value = "6:8")]
    pair: LatticePair,
    #[arg(long, default_value_t = 8)]
    lt_over_lx: usize,
    #[arg(long, default_value_t = 200)]
    therm: usize,
    #[arg(long, default_value_t = 4000)]
    measurements: usize,
    #[arg(long, default_value_t = 2)]
    sweeps_per_measurement: usize,
    #[arg(long, default_value_t = 20)]
    blocks: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "runs/mc-reference")]
    out: PathBuf,
}

#[derive(Args)]
struct PerturbativeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "0.02:0.9:45")]
    z_sweep: Sweep,
    /// Step factor (default 4/3).
    #[arg(long, default_value_t = 4.0 / 3.0)]
    s: f64,
    #[arg(long, default_value_t = 2)]
    loops: u8,
    #[arg(long, default_value = "runs/perturbative")]
    out: PathBuf,
}

#[derive(Args)]
struct OracleSuiteArgs {
    /// Include the slow 6x4 lattice.
    #[arg(long)]
    full: bool,
}

/// Schema-validated config loading with precise error positions.
fn load_config<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pos = e.inner();
        anyhow::Error::from(dtheory::Error::Config(format!(
            "{}: at `{}`, line {}, column {}: {}",
            path.display(),
            e.path(),
            pos.line(),
            pos.column(),
            pos
        )))
    })
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(run) => match run {
            RunCommand::StepScale(args) => {
                let mut config: stepscale::StepScaleConfig = match &args.config {
                    Some(p) => load_config(p)?,
                    None => stepscale::StepScaleConfig {
                        model: args.model,
                        pair: args.pair,
                        ly: args.ly,
                        sweep: args.sweep,
                        max_bond: args.bond,
                        trunc_tol: args.trunc_tol,
                        mpo_tol: args.mpo_tol,
                        energy_tol: args.energy_tol,
                        max_sweeps: args.max_sweeps,
                        seed: args.seed,
                        out: args.out.clone(),
                    },
                };
                if config.out.as_os_str().is_empty() {
                    config.out = args.out.clone();
                }
                let outcomes = stepscale::run(&config, args.workers)?;
                if outcomes.iter().any(|o| !o.converged) {
                    return Err(dtheory::Error::NotConverged(
                        "one or more sweep points did not converge (flagged in the CSV)".into(),
                    )
                    .into());
                }
                Ok(())
            }
            RunCommand::Spiral(args) => {
                let mut config: spiral_cmd::SpiralConfig = match &args.config {
                    Some(p) => load_config(p)?,
                    None => spiral_cmd::SpiralConfig {
                        geom: args.geom,
                        ax_um: args.ax,
                        shots: args.shots,
                        n_steps: args.steps,
                        max_bond: args.bond,
                        penalty: args.penalty,
                        penalty_grid: args.penalty_grid,
                        refine_iters: args.refine,
                        dmrg_bond: args.dmrg_bond,
                        n_resamples: args.resamples,
                        seed: args.seed,
                        out: args.out.clone(),
                    },
                };
                if config.out.as_os_str().is_empty() {
                    config.out = args.out.clone();
                }
                spiral_cmd::run(&config)?;
                Ok(())
            }
            RunCommand::McReference(args) => {
                let mut config: mcref::McRefConfig = match &args.config {
                    Some(p) => load_config(p)?,
                    None => mcref::McRefConfig {
                        g_sweep: args.g_sweep,
                        pair: args.pair,
                        lt_over_lx: args.lt_over_lx,
                        n_therm: args.therm,
                        n_measurements: args.measurements,
                        sweeps_per_measurement: args.sweeps_per_measurement,
                        n_blocks: args.blocks,
                        seed: args.seed,
                        out: args.out.clone(),
                    },
                };
                if config.out.as_os_str().is_empty() {
                    config.out = args.out.clone();
                }
                mcref::run(&config)?;
                Ok(())
            }
            RunCommand::Perturbative(args) => {
                let mut config: perturbative_cmd::PerturbativeConfig = match &args.config {
                    Some(p) => load_config(p)?,
                    None => perturbative_cmd::PerturbativeConfig {
                        z_sweep: args.z_sweep,
                        s: args.s,
                        loops: args.loops,
                        out: args.out.clone(),
                    },
                };
                if config.out.as_os_str().is_empty() {
                    config.out = args.out.clone();
                }
                perturbative_cmd::run(&config)?;
                Ok(())
            }
            RunCommand::OracleSuite(args) => {
                oracle_suite::run(&oracle_suite::OracleSuiteConfig { full: args.full })
            }
        },
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<dtheory::Error>() {
        Some(e) => match e {
            dtheory::Error::Config(_)
            | dtheory::Error::Geometry(_)
            | dtheory::Error::Shape(_)
            | dtheory::Error::Json(_)
            | dtheory::Error::ScheduleDomain { .. }
            | dtheory::Error::TooFewSamples { .. }
            | dtheory::Error::SizeLimit { .. } => 2,
            dtheory::Error::NotConverged(_)
            | dtheory::Error::DegenerateSpectrum(_)
            | dtheory::Error::Numerical(_) => 3,
            dtheory::Error::HardwareLimit(_) | dtheory::Error::BudgetExceeded(_) => 4,
            dtheory::Error::Io(_) => 1,
        },
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
