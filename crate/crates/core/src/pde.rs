//! Explicit finite-volume integrator for the multispecies gradient flow
//! `∂ₜρᵢ = ∂ₓ(ρᵢ ∂ₓξᵢ) − Σⱼ (ξᵢ − ξⱼ) θ(ρᵢ, ρⱼ) qᵢⱼ`, where
//! `ξᵢ = ∂ᵢf(ρ) + Vᵢ + Σₖ Wᵢₖ ∗ ρₖ` is the first variation of the energy
//! `E(ρ) = ∫ f(ρ) + Σᵢ ∫ Vᵢ ρᵢ + ½ Σᵢₖ ∬ Wᵢₖ(x − y) ρᵢ(x) ρₖ(y)`.
//!
//! States hold densities (mass per unit length) laid out as `[c·n + i]`.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamic::GridConfig;
use crate::error::{ensure_len, Error, Result};
use crate::graph::{Interpolation, WeightedGraph};

const LOG_FLOOR: f64 = 1e-300;
const MAX_HALVINGS: usize = 20;
/// Clipped mass tolerated per unit of time step.
const CLIP_RATE: f64 = 1e-12;

/// Porous-medium part `(1/m)(Σ bᵢρᵢ)^m` of the internal energy density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Porous {
    pub exponent: f64,
    pub coefficients: Vec<f64>,
}

/// Problem data. `potentials[i]` has one value per cell; `kernels[i][k]` is
/// either empty (no interaction) or a stencil of length `2·cells − 1` holding
/// `Wᵢₖ(jΔx)` at index `j + cells − 1`.
#[derive(Debug, Clone)]
pub struct PdeConfig {
    pub grid: GridConfig,
    pub graph: WeightedGraph,
    pub theta: Interpolation,
    pub entropy: Vec<f64>,
    pub porous: Option<Porous>,
    pub potentials: Vec<Vec<f64>>,
    pub kernels: Vec<Vec<Vec<f64>>>,
    pub dt: f64,
    pub t_end: f64,
}

impl PdeConfig {
    /// Entropy-only configuration with no potentials or interactions.
    pub fn new(grid: GridConfig, graph: WeightedGraph, theta: Interpolation, dt: f64, t_end: f64) -> Self {
        let n = graph.n();
        Self {
            grid,
            graph,
            theta,
            entropy: vec![1.0; n],
            porous: None,
            potentials: vec![vec![0.0; grid.cells]; n],
            kernels: vec![vec![Vec::new(); n]; n],
            dt,
            t_end,
        }
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Samples `Vᵢ` at the cell centers.
    pub fn with_potential(mut self, i: usize, v: impl Fn(f64) -> f64) -> Self {
        self.potentials[i] = (0..self.grid.cells).map(|c| v(self.grid.center(c))).collect();
        self
    }

    /// Samples an even kernel `W(z)` into the stencil for the pair `(i, k)` and
    /// its mirror `(k, i)`.
    pub fn with_kernel(mut self, i: usize, k: usize, w: impl Fn(f64) -> f64) -> Self {
        let cc = self.grid.cells as isize;
        let dx = self.grid.dx();
        let stencil: Vec<f64> = (-(cc - 1)..cc).map(|j| w(j as f64 * dx)).collect();
        self.kernels[i][k] = stencil.clone();
        self.kernels[k][i] = stencil;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (n, cc) = (self.n(), self.grid.cells);
        ensure_len(n, self.entropy.len())?;
        ensure_len(n, self.potentials.len())?;
        ensure_len(n, self.kernels.len())?;
        for v in &self.potentials {
            ensure_len(cc, v.len())?;
        }
        for (i, row) in self.kernels.iter().enumerate() {
            ensure_len(n, row.len())?;
            for (k, w) in row.iter().enumerate() {
                if w.is_empty() {
                    if !self.kernels[k][i].is_empty() {
                        return Err(Error::Domain(format!("kernel ({i}, {k}) set but ({k}, {i}) missing")));
                    }
                    continue;
                }
                ensure_len(2 * cc - 1, w.len())?;
                if w != &self.kernels[k][i] {
                    return Err(Error::Domain(format!("kernels ({i}, {k}) and ({k}, {i}) differ")));
                }
                if (0..w.len()).any(|j| w[j] != w[w.len() - 1 - j]) {
                    return Err(Error::Domain(format!("kernel ({i}, {k}) is not even")));
                }
            }
        }
        if let Some(p) = &self.porous {
            ensure_len(n, p.coefficients.len())?;
            if p.exponent < 2.0 {
                return Err(Error::Domain(format!("porous exponent {} below 2", p.exponent)));
            }
        }
        if !(self.dt > 0.0) || !(self.t_end >= 0.0) {
            return Err(Error::Domain(format!("need dt > 0 and t_end ≥ 0, got {} and {}", self.dt, self.t_end)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeState {
    pub rho: Vec<f64>,
    pub time: f64,
}

impl PdeState {
    pub fn new(rho: Vec<f64>, cfg: &PdeConfig) -> Result<Self> {
        ensure_len(cfg.grid.cells * cfg.n(), rho.len())?;
        if let Some(v) = rho.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!("density {v} is not finite and nonnegative")));
        }
        Ok(Self { rho, time: 0.0 })
    }

    /// Species `i` constant at `masses[i] / |Ω|`.
    pub fn uniform(masses: &[f64], cfg: &PdeConfig) -> Result<Self> {
        ensure_len(cfg.n(), masses.len())?;
        let len = cfg.grid.x_max - cfg.grid.x_min;
        let rho = (0..cfg.grid.cells).flat_map(|_| masses.iter().map(move |m| m / len)).collect();
        Self::new(rho, cfg)
    }

    pub fn species_masses(&self, cfg: &PdeConfig) -> Vec<f64> {
        let n = cfg.n();
        let dx = cfg.grid.dx();
        (0..n).map(|i| self.rho.iter().skip(i).step_by(n).sum::<f64>() * dx).collect()
    }

    pub fn total_mass(&self, cfg: &PdeConfig) -> f64 {
        self.rho.iter().sum::<f64>() * cfg.grid.dx()
    }

    pub fn min_density(&self) -> f64 {
        self.rho.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

fn porous_pressure<'a>(cfg: &'a PdeConfig, rho: &[f64], c: usize) -> Option<(f64, &'a Porous)> {
    let n = cfg.n();
    cfg.porous.as_ref().map(|p| {
        let s: f64 = (0..n).map(|i| p.coefficients[i] * rho[c * n + i]).sum();
        (s.max(0.0), p)
    })
}

/// `Σ_l Δx Wᵢₖ(x_c − x_l) ρₖ(l)` for every cell and species `i`.
fn interaction_field(cfg: &PdeConfig, rho: &[f64]) -> Vec<f64> {
    let (n, cc, dx) = (cfg.n(), cfg.grid.cells, cfg.grid.dx());
    let mut out = vec![0.0; cc * n];
    for i in 0..n {
        for k in 0..n {
            let w = &cfg.kernels[i][k];
            if w.is_empty() {
                continue;
            }
            for c in 0..cc {
                let acc: f64 = (0..cc).map(|l| w[c + cc - 1 - l] * rho[l * n + k]).sum();
                out[c * n + i] += dx * acc;
            }
        }
    }
    out
}

/// `E(ρ)` by the midpoint rule, with `0 log 0 = 0`.
pub fn energy(state: &PdeState, cfg: &PdeConfig) -> f64 {
    let (n, cc, dx) = (cfg.n(), cfg.grid.cells, cfg.grid.dx());
    let rho = &state.rho;
    let conv = interaction_field(cfg, rho);
    let mut total = 0.0;
    for c in 0..cc {
        let mut cell = 0.0;
        for i in 0..n {
            let r = rho[c * n + i];
            if r > 0.0 {
                cell += cfg.entropy[i] * r * r.ln();
            }
            cell += cfg.potentials[i][c] * r;
            cell += 0.5 * conv[c * n + i] * r;
        }
        if let Some((s, p)) = porous_pressure(cfg, rho, c) {
            cell += s.powf(p.exponent) / p.exponent;
        }
        total += dx * cell;
    }
    total
}

/// `ξᵢ(c) = aᵢ(log ρᵢ + 1) + bᵢ P + Vᵢ + Σₖ Wᵢₖ ∗ ρₖ`.
pub fn chemical_potential(state: &PdeState, cfg: &PdeConfig) -> Result<Vec<f64>> {
    let (n, cc) = (cfg.n(), cfg.grid.cells);
    let rho = &state.rho;
    let mut xi = interaction_field(cfg, rho);
    for c in 0..cc {
        let pressure = porous_pressure(cfg, rho, c);
        for i in 0..n {
            let k = c * n + i;
            let mut v = cfg.potentials[i][c];
            if cfg.entropy[i] != 0.0 {
                v += cfg.entropy[i] * (rho[k].max(LOG_FLOOR).ln() + 1.0);
            }
            if let Some((s, p)) = pressure {
                v += p.coefficients[i] * s.powf(p.exponent - 1.0);
            }
            xi[k] += v;
            if !xi[k].is_finite() {
                return Err(Error::Domain(format!("non-finite driver at cell {c}, species {i}")));
            }
        }
    }
    Ok(xi)
}

/// Transport and mutation parts of the right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    pub transport: Vec<f64>,
    pub mutation: Vec<f64>,
}

impl Rates {
    pub fn total(&self) -> Vec<f64> {
        self.transport.iter().zip(&self.mutation).map(|(a, b)| a + b).collect()
    }
}

/// Upwind fluxes with velocity `−∂ₓξᵢ` on interior faces and no flux through
/// the ends, plus the graph exchange `−Σⱼ (ξᵢ − ξⱼ) θ(ρᵢ, ρⱼ) qᵢⱼ`.
pub fn rhs(state: &PdeState, cfg: &PdeConfig) -> Result<Rates> {
    let (n, cc, dx) = (cfg.n(), cfg.grid.cells, cfg.grid.dx());
    let rho = &state.rho;
    let xi = chemical_potential(state, cfg)?;
    let mut transport = vec![0.0; cc * n];
    for i in 0..n {
        for f in 1..cc {
            let (l, r) = ((f - 1) * n + i, f * n + i);
            let v = -(xi[r] - xi[l]) / dx;
            let up = if v > 0.0 { rho[l] } else { rho[r] };
            let flux = if up > 0.0 { v * up } else { 0.0 };
            transport[l] -= flux / dx;
            transport[r] += flux / dx;
        }
    }
    let mut mutation = vec![0.0; cc * n];
    let edges = cfg.graph.edges();
    for c in 0..cc {
        for &(a, b, q) in &edges {
            let (ka, kb) = (c * n + a, c * n + b);
            let flow = (xi[ka] - xi[kb]) * cfg.theta.value(rho[ka], rho[kb]) * q;
            mutation[ka] -= flow;
            mutation[kb] += flow;
        }
    }
    Ok(Rates { transport, mutation })
}

/// Largest step keeping the explicit update positive to first order: outflow
/// from each cell over one step stays below its content.
pub fn cfl_bound(state: &PdeState, cfg: &PdeConfig) -> Result<f64> {
    let (n, cc, dx) = (cfg.n(), cfg.grid.cells, cfg.grid.dx());
    let xi = chemical_potential(state, cfg)?;
    let edges = cfg.graph.edges();
    let mut rate: f64 = 0.0;
    for c in 0..cc {
        for i in 0..n {
            let k = c * n + i;
            let mut out = 0.0;
            if c > 0 {
                out += ((xi[k] - xi[k - n]) / dx).max(0.0) / dx;
            }
            if c + 1 < cc {
                out += ((xi[k] - xi[k + n]) / dx).max(0.0) / dx;
            }
            let r = state.rho[k];
            if r > 0.0 {
                for &(a, b, q) in &edges {
                    let other = if a == i { b } else if b == i { a } else { continue };
                    let h = xi[k] - xi[c * n + other];
                    if h > 0.0 {
                        out += h * cfg.theta.value(r, state.rho[c * n + other]) * q / r;
                    }
                }
            }
            rate = rate.max(out);
        }
    }
    Ok(if rate > 0.0 { 1.0 / rate } else { f64::INFINITY })
}

/// What one accepted step did.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StepInfo {
    pub dt: f64,
    pub rejections: usize,
    pub clipped_mass: f64,
}

/// One forward Euler step of size `min(cfg.dt, cfl_bound)`. Negative cells are
/// clipped to zero; a step that clips more than `1e-12·Δt` of mass is rejected
/// and retried at half the size.
pub fn step(state: &PdeState, cfg: &PdeConfig) -> Result<(PdeState, StepInfo)> {
    step_capped(state, cfg, f64::INFINITY)
}

fn step_capped(state: &PdeState, cfg: &PdeConfig, cap: f64) -> Result<(PdeState, StepInfo)> {
    let rates = rhs(state, cfg)?.total();
    let dx = cfg.grid.dx();
    let mut dt = cfg.dt.min(cfl_bound(state, cfg)?).min(cap);
    for rejections in 0..=MAX_HALVINGS {
        let mut rho: Vec<f64> = state.rho.iter().zip(&rates).map(|(r, v)| r + dt * v).collect();
        let clipped: f64 = rho.iter().filter(|v| **v < 0.0).map(|v| -v).sum::<f64>() * dx;
        if clipped <= CLIP_RATE * dt {
            rho.iter_mut().for_each(|v| *v = v.max(0.0));
            let info = StepInfo { dt, rejections, clipped_mass: clipped };
            return Ok((PdeState { rho, time: state.time + dt }, info));
        }
        dt *= 0.5;
    }
    Err(Error::Diverged(MAX_HALVINGS))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub time: f64,
    pub energy: f64,
    pub masses: Vec<f64>,
    pub min_rho: f64,
}

impl Diagnostics {
    pub fn of(state: &PdeState, cfg: &PdeConfig) -> Self {
        Self {
            time: state.time,
            energy: energy(state, cfg),
            masses: state.species_masses(cfg),
            min_rho: state.min_density(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeRun {
    /// States at the requested output times, in order.
    pub trajectory: Vec<PdeState>,
    /// One row for the initial state and one per accepted step.
    pub diagnostics: Vec<Diagnostics>,
    pub steps: Vec<StepInfo>,
}

/// Integrates from `init` to `cfg.t_end`, landing exactly on every output time
/// in `[init.time, t_end]`. The observer sees each accepted state.
pub fn run(
    init: &PdeState,
    cfg: &PdeConfig,
    output_times: &[f64],
    mut observer: impl FnMut(&PdeState, &Diagnostics),
) -> Result<PdeRun> {
    cfg.validate()?;
    let mut targets: Vec<f64> = output_times
        .iter()
        .cloned()
        .filter(|t| *t >= init.time && *t <= cfg.t_end)
        .collect();
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    let mut state = init.clone();
    let first = Diagnostics::of(&state, cfg);
    observer(&state, &first);
    let mut out = PdeRun { trajectory: Vec::new(), diagnostics: vec![first], steps: Vec::new() };
    let mut next = 0;
    let eps = 1e-12 * cfg.t_end.max(1.0);
    loop {
        while next < targets.len() && (targets[next] - state.time).abs() <= eps {
            out.trajectory.push(state.clone());
            next += 1;
        }
        if state.time >= cfg.t_end - eps {
            break;
        }
        let horizon = targets.get(next).copied().unwrap_or(cfg.t_end).min(cfg.t_end);
        let (s, info) = step_capped(&state, cfg, horizon - state.time)?;
        state = s;
        if (horizon - state.time).abs() <= eps {
            state.time = horizon;
        }
        let d = Diagnostics::of(&state, cfg);
        observer(&state, &d);
        out.diagnostics.push(d);
        out.steps.push(info);
    }
    Ok(out)
}

/// Entropy plus quadratic confinement `Vᵢ(x) = (x − 0.3i)² + 0.3i` on
/// `[−1, 1]` with 40 cells, a complete graph of weight `q` and logarithmic
/// interpolation; `Δt = 2·10⁻⁴` up to `t = 0.2`.
pub fn confinement_case(n: usize, q: f64) -> PdeConfig {
    let g = WeightedGraph::new_unchecked(DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { q }));
    let grid = GridConfig { x_min: -1.0, x_max: 1.0, cells: 40 };
    let mut cfg = PdeConfig::new(grid, g, Interpolation::Logarithmic, 2e-4, 0.2);
    for i in 0..n {
        let shift = 0.3 * i as f64;
        cfg = cfg.with_potential(i, move |x| (x - shift).powi(2) + shift);
    }
    cfg
}

/// Offset Gaussian bumps over a positive floor, one per species.
pub fn bump_state(cfg: &PdeConfig) -> PdeState {
    let n = cfg.n();
    let rho = (0..cfg.grid.cells)
        .flat_map(|c| {
            let x = cfg.grid.center(c);
            (0..n).map(move |i| 0.05 + (-(x - 0.4 * (i as f64 - 0.5)).powi(2) / 0.08).exp())
        })
        .collect();
    PdeState { rho, time: 0.0 }
}

/// Rows `t, cell, species, rho`.
pub fn write_trajectory_csv(w: impl Write, trajectory: &[PdeState], n: usize) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "cell", "species", "rho"])?;
    for s in trajectory {
        for (k, r) in s.rho.iter().enumerate() {
            wr.write_record([s.time.to_string(), (k / n).to_string(), (k % n).to_string(), r.to_string()])?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Rows `t, E, mass_1 … mass_n, min_rho`.
pub fn write_diagnostics_csv(w: impl Write, diagnostics: &[Diagnostics], n: usize) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string(), "E".to_string()];
    header.extend((1..=n).map(|i| format!("mass_{i}")));
    header.push("min_rho".into());
    wr.write_record(&header)?;
    for d in diagnostics {
        let mut row = vec![d.time.to_string(), d.energy.to_string()];
        row.extend(d.masses.iter().map(|m| m.to_string()));
        row.push(d.min_rho.to_string());
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}
