//! `vvot`: transport distances between vector-valued measures from the command line.
//!
//! Exit codes: 0 on success, 1 when a computation fails or a check does not
//! hold, 2 on usage or input errors.

mod commands;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use vvot::{Interpolation, SimplexPoint, SolverConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {reason}\n  expected {schema}")]
    Input { path: PathBuf, reason: String, schema: &'static str },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Compute(#[from] vvot::Error),

    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),

    /// A check ran to completion and did not hold; the report is already printed.
    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input { .. } | CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "vvot", version, about = "Optimal transport distances for vector-valued measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command that runs a solver.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Seed for references and random instances.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Stopping tolerance of the primal–dual solver.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 8000)]
    pub max_iter: usize,
    /// Spatial cells of the dynamic solver.
    #[arg(long, default_value_t = 32)]
    pub grid_cells: usize,
    /// Time steps of the dynamic solvers.
    #[arg(long, default_value_t = 16)]
    pub time_steps: usize,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        SolverConfig { max_iter: self.max_iter, tol: self.tol, ..SolverConfig::default() }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    /// Graph JSON `{"n": .., "q": [[..]]}`; defaults to two nodes joined by weight 1.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Interpolation: arithmetic | geometric | logarithmic.
    #[arg(long, default_value = "geometric", value_parser = input::theta)]
    pub theta: Interpolation,
}

#[derive(Debug, Clone, Args)]
pub struct PairArgs {
    /// Measure JSON `{"atoms": [{"x": [..], "w": [..]}]}`.
    #[arg(long)]
    pub mu: PathBuf,
    #[arg(long)]
    pub nu: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Distance between two distributions on the graph.
    Wg {
        #[command(flatten)]
        graph: GraphArgs,
        /// Start distribution, comma-separated.
        #[arg(long, value_delimiter = ',', required = true)]
        p0: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        p1: Vec<f64>,
        #[command(flatten)]
        solver: SolverArgs,
        /// JSON with the distance, convergence and path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Induced distance between two points of the simplex (first n − 1 coordinates).
    SimplexDist {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, value_parser = input::simplex_point)]
        r0: SimplexPoint,
        #[arg(long, value_parser = input::simplex_point)]
        r1: SimplexPoint,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Kantorovich distance with ground cost |x − y|² + d_W(i, j)².
    W2w {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// JSON with the distance and the optimal coupling.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dynamic distance on a spatial grid.
    Dyn {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        graph: GraphArgs,
        /// Grid JSON `{"x_min": .., "x_max": .., "cells": ..}`; by default the
        /// joint support padded by `--padding`, with `--grid-cells` cells.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, default_value_t = 0.25)]
        padding: f64,
        #[command(flatten)]
        solver: SolverArgs,
        /// Directory for one CSV per time slice.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Upper bound on the lifted distance from a simplex grid.
    DUpper {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        graph: GraphArgs,
        /// Subdivisions of the simplex grid.
        #[arg(long, default_value_t = 8)]
        subdivisions: usize,
        #[command(flatten)]
        solver: SolverArgs,
        /// JSON with the bound, both lifts and the plan.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bounded-Lipschitz distance.
    Bl {
        #[command(flatten)]
        pair: PairArgs,
        /// JSON with the distance and per-species components.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every metric of the comparison chain, with each link checked.
    Chain {
        /// Measures to compare; omit both and pass `--random` for a seeded batch.
        #[arg(long, requires = "nu")]
        mu: Option<PathBuf>,
        #[arg(long, requires = "mu")]
        nu: Option<PathBuf>,
        /// Number of seeded random instances (seeds 1000·seed + k).
        #[arg(long, conflicts_with = "mu")]
        random: Option<usize>,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Linearized embedding of a measure against a sampled reference.
    LotEmbed {
        #[arg(long)]
        mu: PathBuf,
        /// Atoms in the reference measure.
        #[arg(long, default_value_t = 64)]
        reference_atoms: usize,
        #[command(flatten)]
        solver: SolverArgs,
        /// CSV `atom, x.., r.., Tx.., Tr..`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pairwise linearized distances over a dataset.
    LotMatrix {
        /// JSON array of measures.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 64)]
        reference_atoms: usize,
        #[command(flatten)]
        solver: SolverArgs,
        /// CSV of the symmetric matrix.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multi-species drift–diffusion with quadratic confinement.
    PdeRun {
        #[arg(long, default_value_t = 2)]
        species: usize,
        /// Edge weight of the complete species graph.
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value_t = 2e-4)]
        dt: f64,
        #[arg(long, default_value_t = 0.2)]
        t_end: f64,
        /// Number of evenly spaced trajectory snapshots after the initial state.
        #[arg(long, default_value_t = 10)]
        snapshots: usize,
        /// Directory for trajectory.csv and diagnostics.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite: examples | chain | pde | lot | interpolation | all.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        chain_instances: usize,
        /// JSON array of reports.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    use commands as c;
    match cmd {
        Command::Wg { graph, p0, p1, solver, out } => c::wg(&graph, &p0, &p1, &solver, out.as_deref()),
        Command::SimplexDist { graph, r0, r1, solver, out } => c::simplex_dist(&graph, &r0, &r1, &solver, out.as_deref()),
        Command::W2w { pair, graph, solver, out } => c::w2w(&pair, &graph, &solver, out.as_deref()),
        Command::Dyn { pair, graph, grid, padding, solver, out } => {
            c::dynamic(&pair, &graph, grid.as_deref(), padding, &solver, out.as_deref())
        }
        Command::DUpper { pair, graph, subdivisions, solver, out } => {
            c::d_upper(&pair, &graph, subdivisions, &solver, out.as_deref())
        }
        Command::Bl { pair, out } => c::bl(&pair, out.as_deref()),
        Command::Chain { mu, nu, random, graph, solver, out } => {
            let pair = match (mu, nu, random) {
                (Some(mu), Some(nu), None) => Some(PairArgs { mu, nu }),
                (None, None, Some(_)) => None,
                _ => return Err(CliError::Usage("chain needs either --mu and --nu, or --random N".into())),
            };
            c::chain(pair.as_ref(), random.unwrap_or(0), &graph, &solver, out.as_deref())
        }
        Command::LotEmbed { mu, reference_atoms, solver, out } => c::lot_embed(&mu, reference_atoms, &solver, out.as_deref()),
        Command::LotMatrix { data, reference_atoms, solver, out } => {
            c::lot_matrix(&data, reference_atoms, &solver, out.as_deref())
        }
        Command::PdeRun { species, q, dt, t_end, snapshots, out } => c::pde_run(species, q, dt, t_end, snapshots, out.as_deref()),
        Command::Verify { suite, seed, chain_instances, out } => c::verify(&suite, seed, chain_instances, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
