//! The dynamic distance between vector-valued measures on a one-dimensional
//! spatial grid, solved as a convex program in momentum coordinates.

mod candidate;
pub(crate) mod cp;
mod projection;
pub mod prox;

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use candidate::{optimal_split, two_node_candidate_path, CandidatePath};
pub use cp::Convergence;
pub use projection::{
    project_lifted_dynamics, LiftedAtomVelocity, LiftedSnapshot, ProjectedDynamics, ProjectedSnapshot,
};
pub use prox::{prox_graph_term, prox_perspective, GraphProx};

use crate::error::{Error, Result};
use crate::graph::{alpha, graph_divergence, EdgeField, Interpolation, WeightedGraph};
use crate::measure::DiscreteVectorMeasure;

/// Iteration controls shared by the primal–dual solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Threshold on the RMS primal and dual residuals.
    pub tol: f64,
    /// Primal step. Leaving both steps unset starts from `τσ‖K‖² = 0.95²`
    /// and rebalances them as the residuals evolve; fixing either disables
    /// the rebalancing.
    pub tau: Option<f64>,
    /// Dual step.
    pub sigma: Option<f64>,
    pub check_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tol: 1e-7,
            tau: None,
            sigma: None,
            check_every: 50,
        }
    }
}

/// Uniform cell grid on `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub cells: usize,
}

impl GridConfig {
    pub fn new(x_min: f64, x_max: f64, cells: usize) -> Result<Self> {
        if !(x_max > x_min) || cells == 0 {
            return Err(Error::Domain(format!("invalid grid [{x_min}, {x_max}] with {cells} cells")));
        }
        Ok(Self { x_min, x_max, cells })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.cells as f64
    }

    pub fn center(&self, c: usize) -> f64 {
        self.x_min + (c as f64 + 0.5) * self.dx()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: GridConfig = serde_json::from_str(s)?;
        Self::new(g.x_min, g.x_max, g.cells)
    }
}

/// Spreads each atom over the grid: linear (cloud-in-cell) deposit onto the two
/// nearest centers, then a `[¼, ½, ¼]` smoothing pass with reflecting ends.
/// Returns cell masses laid out as `[c·n + i]`.
pub fn rasterize(mu: &DiscreteVectorMeasure, grid: &GridConfig) -> Result<Vec<f64>> {
    if mu.dim() != 1 {
        return Err(Error::NotImplemented(format!(
            "grid solver supports one spatial dimension, got {}",
            mu.dim()
        )));
    }
    let (cc, n, dx) = (grid.cells, mu.n_species(), grid.dx());
    let mut dep = vec![0.0; cc * n];
    for a in mu.atoms() {
        let x = a.x[0];
        if x < grid.x_min || x > grid.x_max {
            return Err(Error::Domain(format!("atom at {x} outside the grid")));
        }
        let u = ((x - grid.x_min) / dx - 0.5).clamp(0.0, (cc - 1) as f64);
        let c0 = (u.floor() as usize).min(cc - 1);
        let c1 = (c0 + 1).min(cc - 1);
        let frac = u - c0 as f64;
        for i in 0..n {
            dep[c0 * n + i] += (1.0 - frac) * a.w[i];
            dep[c1 * n + i] += frac * a.w[i];
        }
    }
    if cc == 1 {
        return Ok(dep);
    }
    let mut out = vec![0.0; cc * n];
    for c in 0..cc {
        for i in 0..n {
            let v = dep[c * n + i];
            let left = if c == 0 { c } else { c - 1 };
            let right = if c + 1 == cc { c } else { c + 1 };
            out[c * n + i] += 0.5 * v;
            out[left * n + i] += 0.25 * v;
            out[right * n + i] += 0.25 * v;
        }
    }
    Ok(out)
}

/// Space–time fields of a discrete path in momentum coordinates.
///
/// Densities are masses per cell. `m` lives on the `cells + 1` faces and is
/// scaled so that the transport action of cell `c` is `m̄²/ρ̄`, where `m̄`
/// averages the two faces and `ρ̄` the two time levels; `sigma` holds one
/// antisymmetric `n × n` graph momentum per step and cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicSolution {
    pub grid: GridConfig,
    pub t_steps: usize,
    pub n: usize,
    pub rho: Vec<f64>,
    pub m: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl DynamicSolution {
    pub fn zeros(grid: GridConfig, t_steps: usize, n: usize) -> Self {
        let cc = grid.cells;
        Self {
            grid,
            t_steps,
            n,
            rho: vec![0.0; (t_steps + 1) * cc * n],
            m: vec![0.0; t_steps * (cc + 1) * n],
            sigma: vec![0.0; t_steps * cc * n * n],
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.t_steps as f64
    }

    pub fn rho(&self, t: usize, c: usize, i: usize) -> f64 {
        self.rho[(t * self.grid.cells + c) * self.n + i]
    }

    pub fn rho_mut(&mut self, t: usize, c: usize, i: usize) -> &mut f64 {
        &mut self.rho[(t * self.grid.cells + c) * self.n + i]
    }

    pub fn m(&self, t: usize, face: usize, i: usize) -> f64 {
        self.m[(t * (self.grid.cells + 1) + face) * self.n + i]
    }

    pub fn m_mut(&mut self, t: usize, face: usize, i: usize) -> &mut f64 {
        &mut self.m[(t * (self.grid.cells + 1) + face) * self.n + i]
    }

    pub fn sigma(&self, t: usize, c: usize, i: usize, j: usize) -> f64 {
        self.sigma[((t * self.grid.cells + c) * self.n + i) * self.n + j]
    }

    pub fn sigma_mut(&mut self, t: usize, c: usize, i: usize, j: usize) -> &mut f64 {
        &mut self.sigma[((t * self.grid.cells + c) * self.n + i) * self.n + j]
    }

    pub fn sigma_matrix(&self, t: usize, c: usize) -> EdgeField {
        DMatrix::from_fn(self.n, self.n, |i, j| self.sigma(t, c, i, j))
    }

    /// Total mass at time level `t`.
    pub fn mass(&self, t: usize) -> f64 {
        let k = self.grid.cells * self.n;
        self.rho[t * k..(t + 1) * k].iter().sum()
    }

    /// Per-cell, per-species mass at time level `t`, laid out as `[c·n + i]`.
    pub fn level(&self, t: usize) -> &[f64] {
        let k = self.grid.cells * self.n;
        &self.rho[t * k..(t + 1) * k]
    }

    /// Writes one CSV per time level (`slice_0000.csv`, …) with columns
    /// `cell, species, rho, m, sigma_0 … sigma_{n-1}`; `m` is the left face of the
    /// cell and momenta are zero on the final level.
    pub fn write_csv_slices(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for t in 0..=self.t_steps {
            let mut w = csv::Writer::from_path(dir.join(format!("slice_{t:04}.csv")))?;
            let mut header = vec!["cell".to_string(), "species".into(), "rho".into(), "m".into()];
            header.extend((0..self.n).map(|j| format!("sigma_{j}")));
            w.write_record(&header)?;
            for c in 0..self.grid.cells {
                for i in 0..self.n {
                    let mut row = vec![c.to_string(), i.to_string(), self.rho(t, c, i).to_string()];
                    let live = t < self.t_steps;
                    row.push(if live { self.m(t, c, i) } else { 0.0 }.to_string());
                    for j in 0..self.n {
                        row.push(if live { self.sigma(t, c, i, j) } else { 0.0 }.to_string());
                    }
                    w.write_record(&row)?;
                }
            }
            w.flush()?;
        }
        Ok(())
    }
}

/// Result of [`w_dynamic`].
#[derive(Debug, Clone)]
pub struct DynamicResult {
    pub distance: f64,
    pub solution: DynamicSolution,
    pub convergence: Convergence,
}

/// The dynamic distance between two vector-valued measures on the real line.
///
/// Both measures are rasterized onto `grid`; the returned distance is the
/// square root of the action of the returned fields.
pub fn w_dynamic(
    g: &WeightedGraph,
    f: &Interpolation,
    mu: &DiscreteVectorMeasure,
    nu: &DiscreteVectorMeasure,
    grid: &GridConfig,
    t_steps: usize,
    cfg: &SolverConfig,
) -> Result<DynamicResult> {
    if t_steps < 2 {
        return Err(Error::Domain(format!("need at least 2 time steps, got {t_steps}")));
    }
    for m in [mu, nu] {
        if m.n_species() != g.n() {
            return Err(Error::LengthMismatch { expected: g.n(), got: m.n_species() });
        }
    }
    let rho0 = rasterize(mu, grid)?;
    let rho1 = rasterize(nu, grid)?;
    solve_fields(g, f, grid, t_steps, rho0, rho1, true, cfg)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn solve_fields(
    g: &WeightedGraph,
    f: &Interpolation,
    grid: &GridConfig,
    t_steps: usize,
    rho0: Vec<f64>,
    rho1: Vec<f64>,
    transport: bool,
    cfg: &SolverConfig,
) -> Result<DynamicResult> {
    let n = g.n();
    let problem = cp::Problem {
        g,
        f,
        t_steps,
        cells: grid.cells,
        dx: grid.dx(),
        transport,
        rho0,
        rho1,
    };
    let solver = cp::Solver::new(&problem)?;
    let (mut x, convergence) = if problem.rho0 == problem.rho1 {
        let mut x = cp::Fields {
            rho: problem.rho0.iter().cycle().take((t_steps + 1) * grid.cells * n).cloned().collect(),
            m: vec![0.0; t_steps * (grid.cells + 1) * n],
            s: vec![0.0; t_steps * grid.cells * solver.edges().len()],
        };
        solver.project(&mut x, false);
        (x, Convergence { converged: true, ..Default::default() })
    } else {
        solver.solve(cfg)
    };
    solver.clean(&mut x);
    let action = solver.action(&x);
    let mut sol = DynamicSolution::zeros(*grid, t_steps, n);
    sol.rho = x.rho;
    sol.m = x.m;
    let ne = solver.edges().len();
    for t in 0..t_steps {
        for c in 0..grid.cells {
            for (e, &(a, b, _)) in solver.edges().iter().enumerate() {
                let s = x.s[(t * grid.cells + c) * ne + e];
                *sol.sigma_mut(t, c, a, b) = s;
                *sol.sigma_mut(t, c, b, a) = -s;
            }
        }
    }
    Ok(DynamicResult {
        distance: action.max(0.0).sqrt(),
        solution: sol,
        convergence,
    })
}

/// Largest violation of the discrete continuity equation, scaled by the cell
/// width: `Δx·|(ρ_{t+1} − ρ_t)/Δt + (m_{c+1} − m_c)/Δx + (∇·σ)_i|`. Boundary
/// face momenta count as violations too.
pub fn continuity_residual(sol: &DynamicSolution, g: &WeightedGraph) -> Result<f64> {
    let (cc, n, dx, dt) = (sol.grid.cells, sol.n, sol.grid.dx(), sol.dt());
    let mut worst: f64 = 0.0;
    for t in 0..sol.t_steps {
        for c in 0..cc {
            let div = graph_divergence(g, &sol.sigma_matrix(t, c))?;
            for i in 0..n {
                let r = (sol.rho(t + 1, c, i) - sol.rho(t, c, i)) / dt + (sol.m(t, c + 1, i) - sol.m(t, c, i)) / dx + div[i];
                worst = worst.max(r.abs() * dx);
            }
        }
    }
    for t in 0..sol.t_steps {
        for i in 0..n {
            worst = worst.max(sol.m(t, 0, i).abs()).max(sol.m(t, cc, i).abs());
        }
    }
    Ok(worst)
}

/// `Σ_t Δt Σ_c [Σ_i α(m̄, ρ̄ᵢ, ρ̄ᵢ) + ½ Σ_{i≠j} α(σ_ij, ρ̄ᵢ, ρ̄ⱼ) q_ij]` with
/// time-averaged densities; the transport term uses the plain perspective `m̄²/ρ̄`.
pub fn action(sol: &DynamicSolution, g: &WeightedGraph, f: &Interpolation) -> f64 {
    let (cc, n) = (sol.grid.cells, sol.n);
    let arith = Interpolation::Arithmetic;
    let mut total = 0.0;
    for t in 0..sol.t_steps {
        for c in 0..cc {
            let rb: Vec<f64> = (0..n).map(|i| 0.5 * (sol.rho(t, c, i) + sol.rho(t + 1, c, i))).collect();
            for i in 0..n {
                let mb = 0.5 * (sol.m(t, c, i) + sol.m(t, c + 1, i));
                total += alpha(&[mb], rb[i], rb[i], &arith);
                for j in 0..n {
                    if i != j && g.q(i, j) > 0.0 {
                        total += 0.5 * g.q(i, j) * alpha(&[sol.sigma(t, c, i, j)], rb[i], rb[j], f);
                    }
                }
            }
        }
    }
    total * sol.dt()
}

/// Writes `(t, cell, species, rho)` rows for every time level.
pub fn write_density_csv(sol: &DynamicSolution, mut out: impl Write) -> Result<()> {
    writeln!(out, "t,cell,species,rho")?;
    for t in 0..=sol.t_steps {
        for c in 0..sol.grid.cells {
            for i in 0..sol.n {
                writeln!(out, "{},{},{},{}", t as f64 * sol.dt(), c, i, sol.rho(t, c, i))?;
            }
        }
    }
    Ok(())
}
