//! Static (Kantorovich) metrics: `W_{2,𝒲}`, the grid upper bound on the lifted
//! semimetric `D`, two-node closed forms and the comparison chain.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bl::d_bl;
use crate::dynamic::{w_dynamic, GridConfig, SolverConfig};
use crate::error::{Error, Result};
use crate::graph::{Interpolation, WeightedGraph};
use crate::graph_wasserstein::{simplex_distance, wg_two_node, SimplexPoint};
use crate::lifted::{LiftedAtom, LiftedMeasure};
use crate::lp::LinearProgram;
use crate::measure::{Atom, DiscreteVectorMeasure, MASS_TOL};

const PLAN_EPS: f64 = 1e-14;

/// `d_𝒲(i, j) = W_𝒢(δᵢ, δⱼ)` for all node pairs. Two-node graphs use the
/// closed form, larger graphs the dynamic solver with `t_steps` steps.
pub fn d_w_matrix(g: &WeightedGraph, f: &Interpolation, t_steps: usize, cfg: &SolverConfig) -> Result<DMatrix<f64>> {
    let n = g.n();
    let corners: Vec<SimplexPoint> = (0..n).map(|j| SimplexPoint::corner(n, j)).collect();
    simplex_distance_matrix(g, f, &corners, t_steps, cfg)
}

/// Pairwise `d_{Δⁿ⁻¹}` on a list of simplex points.
pub fn simplex_distance_matrix(
    g: &WeightedGraph,
    f: &Interpolation,
    points: &[SimplexPoint],
    t_steps: usize,
    cfg: &SolverConfig,
) -> Result<DMatrix<f64>> {
    let k = points.len();
    let mut out = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a + 1..k {
            let v = simplex_distance(g, f, &points[a], &points[b], t_steps, cfg)?;
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(out)
}

/// Barycentric grid `{k/N}` on the simplex with `N = subdivisions`, corners included.
pub fn simplex_grid(n: usize, subdivisions: usize) -> Vec<SimplexPoint> {
    let s = subdivisions.max(1);
    let mut out = Vec::new();
    let mut counts = vec![0usize; n - 1];
    loop {
        let used: usize = counts.iter().sum();
        if used <= s {
            let r = counts.iter().map(|&c| c as f64 / s as f64).collect();
            out.push(SimplexPoint::new(r).expect("grid point lies in the simplex"));
        }
        // odometer over (n−1) digits in 0..=s
        let mut k = 0;
        loop {
            if k == n - 1 {
                return out;
            }
            counts[k] += 1;
            if counts[k] <= s {
                break;
            }
            counts[k] = 0;
            k += 1;
        }
    }
}

/// Adds points not already present (exact comparison).
pub fn extend_grid(grid: &mut Vec<SimplexPoint>, extra: impl IntoIterator<Item = SimplexPoint>) {
    for p in extra {
        if !grid.contains(&p) {
            grid.push(p);
        }
    }
}

/// One entry `Γ_ij(x, y)` of a coupling between vector-valued measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingEntry {
    /// Atom of the source measure.
    pub source: usize,
    pub i: usize,
    /// Atom of the target measure.
    pub target: usize,
    pub j: usize,
    pub mass: f64,
}

/// A coupling in `Π(μ, ν)`: marginals `Σ_{y,j} Γ = μᵢ(x)` and `Σ_{x,i} Γ = νⱼ(y)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VectorCoupling {
    pub entries: Vec<CouplingEntry>,
}

impl VectorCoupling {
    /// Largest violation of the two marginal constraints.
    pub fn marginal_error(&self, mu: &DiscreteVectorMeasure, nu: &DiscreteVectorMeasure) -> f64 {
        let n = mu.n_species();
        let mut src: Vec<Vec<f64>> = mu.atoms().iter().map(|a| a.w.clone()).collect();
        let mut dst: Vec<Vec<f64>> = nu.atoms().iter().map(|a| a.w.clone()).collect();
        for e in &self.entries {
            src[e.source][e.i] -= e.mass;
            dst[e.target][e.j] -= e.mass;
        }
        src.iter().chain(&dst).flat_map(|w| w.iter().take(n)).fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn cost(&self, mu: &DiscreteVectorMeasure, nu: &DiscreteVectorMeasure, d_w: &DMatrix<f64>) -> f64 {
        self.entries
            .iter()
            .map(|e| e.mass * ground_cost(&mu.atoms()[e.source].x, &nu.atoms()[e.target].x, d_w[(e.i, e.j)]))
            .sum()
    }
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

fn ground_cost(x: &[f64], y: &[f64], d: f64) -> f64 {
    sq(x, y) + d * d
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct W2wResult {
    pub distance: f64,
    pub coupling: VectorCoupling,
}

/// Positive-mass `(atom, species)` pairs.
fn support(mu: &DiscreteVectorMeasure) -> Vec<(usize, usize, f64)> {
    mu.atoms()
        .iter()
        .enumerate()
        .flat_map(|(k, a)| a.w.iter().enumerate().filter(|(_, &w)| w > 0.0).map(move |(i, &w)| (k, i, w)))
        .collect()
}

fn check_pair(mu: &DiscreteVectorMeasure, nu: &DiscreteVectorMeasure, n: usize) -> Result<()> {
    crate::error::ensure_len(n, mu.n_species())?;
    crate::error::ensure_len(n, nu.n_species())?;
    crate::error::ensure_len(mu.dim(), nu.dim())?;
    let (a, b) = (mu.total_mass(), nu.total_mass());
    if (a - b).abs() > MASS_TOL * (2 + mu.atoms().len() + nu.atoms().len()) as f64 * n as f64 {
        return Err(Error::MassMismatch(a, b));
    }
    Ok(())
}

/// `W_{2,𝒲}(μ, ν)`: the transport problem between the supports of `μ` and `ν`
/// (one node per atom and species) with cost `|x − y|² + d_𝒲(i, j)²`.
pub fn w2w(mu: &DiscreteVectorMeasure, nu: &DiscreteVectorMeasure, d_w: &DMatrix<f64>) -> Result<W2wResult> {
    check_pair(mu, nu, d_w.nrows())?;
    let (s, t) = (support(mu), support(nu));
    let mut rhs: Vec<f64> = s.iter().map(|e| e.2).collect();
    rhs.extend(t.iter().map(|e| e.2));
    let mut lp = LinearProgram::new(rhs);
    for (a, &(ka, i, _)) in s.iter().enumerate() {
        for (b, &(kb, j, _)) in t.iter().enumerate() {
            let c = ground_cost(&mu.atoms()[ka].x, &nu.atoms()[kb].x, d_w[(i, j)]);
            lp.add_column(c, vec![(a, 1.0), (s.len() + b, 1.0)]);
        }
    }
    let sol = lp.solve()?;
    let mut entries = Vec::new();
    for (col, &v) in sol.x.iter().enumerate() {
        if v > PLAN_EPS {
            let (a, b) = (col / t.len(), col % t.len());
            entries.push(CouplingEntry { source: s[a].0, i: s[a].1, target: t[b].0, j: t[b].1, mass: v });
        }
    }
    let coupling = VectorCoupling { entries };
    Ok(W2wResult { distance: coupling.cost(mu, nu, d_w).sqrt(), coupling })
}

/// `W_{2,𝒲}` by enumerating every basic solution of the transport problem
/// (spanning forests of the bipartite support graph). Exponential; meant for
/// at most a handful of support points per side.
pub fn w2w_enumerate(mu: &DiscreteVectorMeasure, nu: &DiscreteVectorMeasure, d_w: &DMatrix<f64>) -> Result<f64> {
    check_pair(mu, nu, d_w.nrows())?;
    let (s, t) = (support(mu), support(nu));
    if s.len() * t.len() > 25 {
        return Err(Error::Domain(format!("{}×{} support is too large to enumerate", s.len(), t.len())));
    }
    let cells: Vec<(usize, usize, f64)> = (0..s.len())
        .flat_map(|a| (0..t.len()).map(move |b| (a, b)))
        .map(|(a, b)| (a, b, ground_cost(&mu.atoms()[s[a].0].x, &nu.atoms()[t[b].0].x, d_w[(s[a].1, t[b].1)])))
        .collect();
    let rank = s.len() + t.len() - 1;
    let supply: Vec<f64> = s.iter().map(|e| e.2).collect();
    let demand: Vec<f64> = t.iter().map(|e| e.2).collect();
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(rank);
    enumerate_subsets(cells.len(), rank, 0, &mut chosen, &mut |subset| {
        if let Some(x) = solve_forest(subset, &cells, &supply, &demand) {
            let cost: f64 = subset.iter().zip(&x).map(|(&c, v)| cells[c].2 * v).sum();
            best = best.min(cost);
        }
    });
    if best.is_finite() {
        Ok(best.max(0.0).sqrt())
    } else {
        Err(Error::Infeasible)
    }
}

fn enumerate_subsets(total: usize, k: usize, start: usize, chosen: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    if chosen.len() == k {
        visit(chosen);
        return;
    }
    for c in start..total {
        if total - c < k - chosen.len() {
            break;
        }
        chosen.push(c);
        enumerate_subsets(total, k, c + 1, chosen, visit);
        chosen.pop();
    }
}

/// Unique flows on a spanning tree of cells by leaf elimination; `None` if the
/// cells do not form a spanning tree or a flow is negative.
fn solve_forest(subset: &[usize], cells: &[(usize, usize, f64)], supply: &[f64], demand: &[f64]) -> Option<Vec<f64>> {
    let (ns, nt) = (supply.len(), demand.len());
    let mut rem: Vec<f64> = supply.iter().chain(demand).cloned().collect();
    let mut deg = vec![0usize; ns + nt];
    for &c in subset {
        deg[cells[c].0] += 1;
        deg[ns + cells[c].1] += 1;
    }
    if deg.contains(&0) {
        return None;
    }
    let mut flow = vec![f64::NAN; subset.len()];
    let mut done = vec![false; subset.len()];
    for _ in 0..subset.len() {
        let (pos, leaf) = subset.iter().enumerate().filter(|(p, _)| !done[*p]).find_map(|(p, &c)| {
            let (u, v) = (cells[c].0, ns + cells[c].1);
            if deg[u] == 1 {
                Some((p, u))
            } else if deg[v] == 1 {
                Some((p, v))
            } else {
                None
            }
        })?;
        let c = subset[pos];
        let (u, v) = (cells[c].0, ns + cells[c].1);
        let other = if leaf == u { v } else { u };
        let x = rem[leaf];
        flow[pos] = x;
        rem[leaf] = 0.0;
        rem[other] -= x;
        deg[u] -= 1;
        deg[v] -= 1;
        done[pos] = true;
    }
    let scale = supply.iter().sum::<f64>().max(1.0);
    if flow.iter().any(|&x| x < -1e-12 * scale) || rem.iter().any(|r| r.abs() > 1e-12 * scale) {
        return None;
    }
    Some(flow)
}

/// Upper bound on `D(μ, ν)` from lifts supported on a finite simplex grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftedUpper {
    pub upper_bound: f64,
    pub lift_mu: LiftedMeasure,
    pub lift_nu: LiftedMeasure,
    /// `(atom of lift_mu, atom of lift_nu, mass)`.
    pub plan: Vec<(usize, usize, f64)>,
}

/// Solves for a joint plan `γ` on `(X_μ × S) × (X_ν × S)` whose marginals
/// project to `μ` and `ν`, minimizing `Σ (|x − y|² + d_S(r, r')²) γ`.
///
/// `grid` must contain every corner; `d_simplex` holds the simplex distances
/// between grid points.
pub fn lifted_semimetric_upper(
    mu: &DiscreteVectorMeasure,
    nu: &DiscreteVectorMeasure,
    grid: &[SimplexPoint],
    d_simplex: &DMatrix<f64>,
) -> Result<LiftedUpper> {
    let n = mu.n_species();
    check_pair(mu, nu, n)?;
    if d_simplex.nrows() != grid.len() || d_simplex.ncols() != grid.len() {
        return Err(Error::LengthMismatch { expected: grid.len(), got: d_simplex.nrows() });
    }
    for j in 0..n {
        if !grid.contains(&SimplexPoint::corner(n, j)) {
            return Err(Error::Domain(format!("simplex grid is missing corner {j}")));
        }
    }
    let probs: Vec<Vec<f64>> = grid.iter().map(SimplexPoint::probabilities).collect();
    let km = mu.atoms().len();
    let mut rhs: Vec<f64> = mu.atoms().iter().flat_map(|a| a.w.clone()).collect();
    rhs.extend(nu.atoms().iter().flat_map(|a| a.w.clone()));
    let mut lp = LinearProgram::new(rhs);
    let mut cols = Vec::new();
    for (a, xa) in mu.atoms().iter().enumerate() {
        for (r, pr) in probs.iter().enumerate() {
            // a lift may only place mass where every species it carries is present
            if pr.iter().zip(&xa.w).any(|(&p, &w)| p > 0.0 && w == 0.0) {
                continue;
            }
            for (b, yb) in nu.atoms().iter().enumerate() {
                let dx = sq(&xa.x, &yb.x);
                for (s, ps) in probs.iter().enumerate() {
                    if ps.iter().zip(&yb.w).any(|(&p, &w)| p > 0.0 && w == 0.0) {
                        continue;
                    }
                    let mut entries = Vec::with_capacity(2 * n);
                    for j in 0..n {
                        if pr[j] > 0.0 {
                            entries.push((a * n + j, pr[j]));
                        }
                    }
                    for j in 0..n {
                        if ps[j] > 0.0 {
                            entries.push((km * n + b * n + j, ps[j]));
                        }
                    }
                    let cost = dx + d_simplex[(r, s)].powi(2);
                    lp.add_column(cost, entries);
                    cols.push((a, r, b, s, cost));
                }
            }
        }
    }
    let sol = lp.solve()?;
    let mut lift_mu: Vec<LiftedAtom> = Vec::new();
    let mut lift_nu: Vec<LiftedAtom> = Vec::new();
    let mut plan = Vec::new();
    let slot = |lift: &mut Vec<LiftedAtom>, x: &[f64], r: usize, m: f64| -> usize {
        match lift.iter().position(|t| t.x == x && t.r == grid[r]) {
            Some(p) => {
                lift[p].mass += m;
                p
            }
            None => {
                lift.push(LiftedAtom { x: x.to_vec(), r: grid[r].clone(), mass: m });
                lift.len() - 1
            }
        }
    };
    let mut total = 0.0;
    for (&(a, r, b, s, cost), &v) in cols.iter().zip(&sol.x) {
        if v > PLAN_EPS {
            total += cost * v;
            let p = slot(&mut lift_mu, &mu.atoms()[a].x, r, v);
            let q = slot(&mut lift_nu, &nu.atoms()[b].x, s, v);
            plan.push((p, q, v));
        }
    }
    Ok(LiftedUpper {
        upper_bound: total.sqrt(),
        lift_mu: LiftedMeasure { atoms: lift_mu },
        lift_nu: LiftedMeasure { atoms: lift_nu },
        plan,
    })
}

/// Closed-form values for `μ¹ = [½δ₀, ½δ₀]`, `μ² = [½δ₋ₐ, ½δₐ]`, `μ³ = [bδ₀, (1−b)δ₀]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoNodeExamples {
    pub a: f64,
    pub b: f64,
    pub w12: f64,
    pub w13: f64,
    pub w23_upper: f64,
    pub d12: f64,
    pub d13: f64,
    pub d23: f64,
}

/// The three measures of the two-node example family.
pub fn example_measures(a: f64, b: f64) -> Result<[DiscreteVectorMeasure; 3]> {
    Ok([
        DiscreteVectorMeasure::on_line(&[(0.0, &[0.5, 0.5])])?,
        DiscreteVectorMeasure::new(vec![Atom::new(vec![-a], vec![0.5, 0.0]), Atom::new(vec![a], vec![0.0, 0.5])])?,
        DiscreteVectorMeasure::on_line(&[(0.0, &[b, 1.0 - b])])?,
    ])
}

/// Evaluates the closed forms; requires `θ(1, 0) = 0`.
pub fn two_node_examples(f: &Interpolation, q: f64, a: f64, b: f64) -> Result<TwoNodeExamples> {
    let edge = f.value(1.0, 0.0);
    if edge != 0.0 {
        return Err(Error::ThetaNotVanishing(edge));
    }
    if !(a >= 0.0) || !(0.5..=1.0).contains(&b) {
        return Err(Error::Domain(format!("need a ≥ 0 and b ∈ [½, 1], got a = {a}, b = {b}")));
    }
    let d_half = wg_two_node(f, q, 0.5, b)?;
    let d_edge = wg_two_node(f, q, 0.0, 2.0 * b - 1.0)?;
    Ok(TwoNodeExamples {
        a,
        b,
        w12: a,
        w13: d_half,
        w23_upper: a + d_half,
        d12: a,
        d13: d_half,
        d23: (a * a + 0.5 * d_edge * d_edge).sqrt(),
    })
}

/// Search box and resolution for [`triangle_failure_witness`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessSearch {
    pub a_max: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub a_steps: usize,
    pub b_steps: usize,
    pub margin: f64,
}

impl Default for WitnessSearch {
    fn default() -> Self {
        Self { a_max: 0.2, b_min: 0.5, b_max: 0.7, a_steps: 40, b_steps: 40, margin: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriangleWitness {
    pub a: f64,
    pub b: f64,
    /// `D(μ², μ³)`.
    pub lhs: f64,
    /// `D(μ¹, μ²) + D(μ¹, μ³)`.
    pub rhs: f64,
}

/// Scans `(a, b) ∈ (0, a_max] × (b_min, b_max]`, `b` outermost, for
/// `D(μ², μ³) > D(μ¹, μ²) + D(μ¹, μ³)` by at least `search.margin`.
pub fn triangle_failure_witness(f: &Interpolation, q: f64, search: &WitnessSearch) -> Result<TriangleWitness> {
    let edge = f.value(1.0, 0.0);
    if edge != 0.0 {
        return Err(Error::ThetaNotVanishing(edge));
    }
    for jb in 1..=search.b_steps {
        let b = search.b_min + (search.b_max - search.b_min) * jb as f64 / search.b_steps as f64;
        for ja in 1..=search.a_steps {
            let a = search.a_max * ja as f64 / search.a_steps as f64;
            let e = two_node_examples(f, q, a, b)?;
            let (lhs, rhs) = (e.d23, e.d12 + e.d13);
            if lhs > rhs + search.margin {
                return Ok(TriangleWitness { a, b, lhs, rhs });
            }
        }
    }
    Err(Error::NotFound)
}

/// Discretization and tolerances for [`check_chain`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub cells: usize,
    pub t_steps: usize,
    /// Time steps of the graph solver behind `d_𝒲` and the simplex table.
    pub graph_t_steps: usize,
    pub solver: SolverConfig,
    /// Slack on links involving the dynamic solver.
    pub chain_tol: f64,
    /// Slack between the two linear programs.
    pub lp_tol: f64,
    /// Slack on the `√d_BL` upper bound.
    pub bound_tol: f64,
    /// Subdivisions of the simplex grid for two and for more nodes.
    pub subdivisions_two: usize,
    pub subdivisions_many: usize,
    /// Margin added on each side of the instance when building the spatial grid.
    pub padding: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            cells: 32,
            t_steps: 16,
            graph_t_steps: 16,
            solver: SolverConfig { max_iter: 8000, tol: 1e-6, ..SolverConfig::default() },
            chain_tol: 3e-2,
            lp_tol: 1e-8,
            bound_tol: 1e-6,
            subdivisions_two: 32,
            subdivisions_many: 4,
            padding: 0.25,
        }
    }
}

/// Graph-dependent data shared by every instance checked on the same graph.
#[derive(Debug, Clone)]
pub struct ChainContext {
    pub d_w: DMatrix<f64>,
    pub grid: Vec<SimplexPoint>,
    pub d_simplex: DMatrix<f64>,
    /// `max_i Σ_j q_ij`.
    pub q_max: f64,
}

impl ChainContext {
    pub fn new(g: &WeightedGraph, f: &Interpolation, cfg: &ChainConfig) -> Result<Self> {
        let n = g.n();
        let subdivisions = if n == 2 { cfg.subdivisions_two } else { cfg.subdivisions_many };
        let grid = simplex_grid(n, subdivisions);
        let d_simplex = simplex_distance_matrix(g, f, &grid, cfg.graph_t_steps, &cfg.solver)?;
        let corner_idx: Vec<usize> = (0..n)
            .map(|j| grid.iter().position(|p| *p == SimplexPoint::corner(n, j)).expect("grid holds the corners"))
            .collect();
        // the same numbers on both sides keeps the two LPs comparable
        let d_w = DMatrix::from_fn(n, n, |i, j| d_simplex[(corner_idx[i], corner_idx[j])]);
        Ok(Self { d_w, grid, d_simplex, q_max: g.max_degree() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainViolation {
    pub link: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
}

/// All quantities of the chain `c·d_BL ≤ W ≤ D ≤ W_{2,𝒲} ≤ C'·√d_BL` for one pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    pub d_bl: f64,
    pub w_dyn: f64,
    pub d_upper: f64,
    pub w2w: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub w_dyn_converged: bool,
    pub ok: bool,
    pub violations: Vec<ChainViolation>,
}

/// Computes every metric of the chain and checks each link with its slack.
pub fn check_chain(
    g: &WeightedGraph,
    f: &Interpolation,
    mu: &DiscreteVectorMeasure,
    nu: &DiscreteVectorMeasure,
    cfg: &ChainConfig,
) -> Result<ChainReport> {
    let ctx = ChainContext::new(g, f, cfg)?;
    check_chain_with(&ctx, g, f, mu, nu, cfg)
}

/// [`check_chain`] with precomputed graph data.
pub fn check_chain_with(
    ctx: &ChainContext,
    g: &WeightedGraph,
    f: &Interpolation,
    mu: &DiscreteVectorMeasure,
    nu: &DiscreteVectorMeasure,
    cfg: &ChainConfig,
) -> Result<ChainReport> {
    let n = g.n();
    check_pair(mu, nu, n)?;
    let bl = d_bl(mu, nu)?;
    let w = w2w(mu, nu, &ctx.d_w)?.distance;
    let d_up = lifted_semimetric_upper(mu, nu, &ctx.grid, &ctx.d_simplex)?.upper_bound;

    let (bm, bn) = (mu.bounding_box(), nu.bounding_box());
    let bbox: Vec<(f64, f64)> = bm.iter().zip(&bn).map(|(a, b)| (a.0.min(b.0), a.1.max(b.1))).collect();
    let (lo, hi) = bbox[0];
    let grid = GridConfig::new(lo - cfg.padding, hi + cfg.padding, cfg.cells)?;
    let dynamic = w_dynamic(g, f, mu, nu, &grid, cfg.t_steps, &cfg.solver)?;
    let w_dyn = dynamic.distance;

    let diam_x2: f64 = bbox.iter().map(|(a, b)| (b - a) * (b - a)).sum();
    let diam_s = ctx.d_w.iter().cloned().fold(0.0, f64::max);
    let c = (diam_x2 + diam_s * diam_s).sqrt();
    let lower = (1.0f64).min(ctx.q_max.powf(-0.5)) * bl;
    let upper = (n as f64).powf(0.25) * c * (1.0 + c * c).powf(0.25) * bl.sqrt();

    let mut violations = Vec::new();
    let mut link = |name: &str, lhs: f64, rhs: f64, tol: f64| {
        if lhs > rhs + tol {
            violations.push(ChainViolation { link: name.to_string(), lhs, rhs, tol });
        }
    };
    link("lower_bound <= w_dyn", lower, w_dyn, cfg.chain_tol);
    link("w_dyn <= d_upper", w_dyn, d_up, cfg.chain_tol);
    link("d_upper <= w2w", d_up, w, cfg.lp_tol);
    link("w2w <= upper_bound", w, upper, cfg.bound_tol);
    Ok(ChainReport {
        d_bl: bl,
        w_dyn,
        d_upper: d_up,
        w2w: w,
        lower_bound: lower,
        upper_bound: upper,
        w_dyn_converged: dynamic.convergence.converged,
        ok: violations.is_empty(),
        violations,
    })
}

/// A seeded random pair on `[−1, 1]` with `n ∈ {2, 3}` species and up to
/// `max_atoms` atoms per measure; odd seeds use three species.
pub fn random_instance(seed: u64, max_atoms: usize) -> Result<(usize, DiscreteVectorMeasure, DiscreteVectorMeasure)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = if seed.is_multiple_of(2) { 2 } else { 3 };
    let draw = |rng: &mut ChaCha8Rng| -> Result<DiscreteVectorMeasure> {
        let k = rng.random_range(1..=max_atoms.max(1));
        let mut atoms = Vec::with_capacity(k);
        for _ in 0..k {
            // grid-aligned locations keep atoms distinct and away from cell edges
            let x = (rng.random_range(-8i32..=8) as f64) / 8.0;
            let w: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.7) { rng.random_range(0.05..1.0) } else { 0.0 }).collect();
            atoms.push(Atom::new(vec![x], w));
        }
        if atoms.iter().all(|a| a.mass() == 0.0) {
            atoms[0].w[0] = 1.0;
        }
        let total: f64 = atoms.iter().map(Atom::mass).sum();
        atoms.iter_mut().for_each(|a| a.w.iter_mut().for_each(|v| *v /= total));
        DiscreteVectorMeasure::new(atoms)
    };
    let mu = draw(&mut rng)?;
    let nu = draw(&mut rng)?;
    Ok((n, mu, nu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line(atoms: &[(f64, &[f64])]) -> DiscreteVectorMeasure {
        DiscreteVectorMeasure::on_line(atoms).unwrap()
    }

    fn two_node_dw(f: &Interpolation) -> DMatrix<f64> {
        d_w_matrix(&WeightedGraph::two_node(1.0).unwrap(), f, 16, &SolverConfig::default()).unwrap()
    }

    #[test]
    fn grid_sizes_and_corners() {
        assert_eq!(simplex_grid(2, 32).len(), 33);
        let g3 = simplex_grid(3, 15);
        assert_eq!(g3.len(), 136);
        for j in 0..3 {
            assert!(g3.contains(&SimplexPoint::corner(3, j)));
        }
        let mut g = simplex_grid(2, 4);
        extend_grid(&mut g, [SimplexPoint::new(vec![0.2]).unwrap(), SimplexPoint::new(vec![0.5]).unwrap()]);
        assert_eq!(g.len(), 6);
    }

    #[test]
    fn d_w_two_node_arithmetic() {
        let d = two_node_dw(&Interpolation::Arithmetic);
        assert_eq!(d[(0, 0)], 0.0);
        assert_abs_diff_eq!(d[(0, 1)], std::f64::consts::SQRT_2, epsilon = 1e-9);
        assert_eq!(d[(0, 1)], d[(1, 0)]);
    }

    #[test]
    fn w2w_basic_identities() {
        let d = two_node_dw(&Interpolation::Geometric);
        let mu = line(&[(0.0, &[0.5, 0.5])]);
        let r = w2w(&mu, &mu, &d).unwrap();
        assert_abs_diff_eq!(r.distance, 0.0, epsilon = 1e-12);
        assert!(r.coupling.entries.iter().all(|e| e.i == e.j));
        let b = 0.75;
        let nu = line(&[(0.0, &[b, 1.0 - b])]);
        let r = w2w(&mu, &nu, &d).unwrap();
        assert_abs_diff_eq!(r.distance, (b - 0.5f64).sqrt() * d[(0, 1)], epsilon = 1e-12);
        assert!(r.coupling.marginal_error(&mu, &nu) < 1e-14);
        assert_abs_diff_eq!(r.coupling.cost(&mu, &nu, &d), r.distance.powi(2), epsilon = 1e-12);
        let one = DMatrix::zeros(1, 1);
        let shift = w2w(&line(&[(0.0, &[1.0])]), &line(&[(1.0, &[1.0])]), &one).unwrap();
        assert_abs_diff_eq!(shift.distance, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn w2w_matches_enumeration() {
        let d = two_node_dw(&Interpolation::Logarithmic);
        let mu = line(&[(-0.5, &[0.3, 0.0]), (0.2, &[0.0, 0.7])]);
        let nu = line(&[(0.1, &[0.4, 0.2]), (0.9, &[0.0, 0.4])]);
        assert_abs_diff_eq!(w2w(&mu, &nu, &d).unwrap().distance, w2w_enumerate(&mu, &nu, &d).unwrap(), epsilon = 1e-10);
    }

    #[test]
    fn upper_bound_with_corner_grid_is_w2w() {
        let g = WeightedGraph::two_node(1.0).unwrap();
        let f = Interpolation::Geometric;
        let grid = simplex_grid(2, 1);
        let ds = simplex_distance_matrix(&g, &f, &grid, 16, &SolverConfig::default()).unwrap();
        let d = two_node_dw(&f);
        let mu = line(&[(-0.5, &[0.3, 0.1]), (0.2, &[0.0, 0.6])]);
        let nu = line(&[(0.1, &[0.4, 0.2]), (0.9, &[0.0, 0.4])]);
        let up = lifted_semimetric_upper(&mu, &nu, &grid, &ds).unwrap();
        assert_abs_diff_eq!(up.upper_bound, w2w(&mu, &nu, &d).unwrap().distance, epsilon = 1e-10);
        let fine = simplex_grid(2, 8);
        let dsf = simplex_distance_matrix(&g, &f, &fine, 16, &SolverConfig::default()).unwrap();
        assert!(lifted_semimetric_upper(&mu, &nu, &fine, &dsf).unwrap().upper_bound <= up.upper_bound + 1e-12);
        let same = lifted_semimetric_upper(&mu, &mu, &fine, &dsf).unwrap();
        assert_abs_diff_eq!(same.upper_bound, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn example_closed_forms() {
        let f = Interpolation::Geometric;
        let zero = two_node_examples(&f, 1.0, 0.0, 0.5).unwrap();
        for v in [zero.w12, zero.w13, zero.d12, zero.d13, zero.d23] {
            assert_eq!(v, 0.0);
        }
        let e = two_node_examples(&f, 1.0, 0.3, 0.6).unwrap();
        assert_eq!(e.w12, 0.3);
        assert_abs_diff_eq!(e.d13, 0.141_899_987_288_760_3, epsilon = 1e-12);
        assert!(matches!(two_node_examples(&Interpolation::Arithmetic, 1.0, 0.3, 0.6), Err(Error::ThetaNotVanishing(_))));
    }

    #[test]
    fn grid_lp_reaches_closed_form_d23() {
        let f = Interpolation::Geometric;
        let g = WeightedGraph::two_node(1.0).unwrap();
        let (a, b) = (0.3, 0.6);
        let [m1, m2, m3] = example_measures(a, b).unwrap();
        let grid: Vec<SimplexPoint> = [0.0, 2.0 * b - 1.0, 0.5, 1.0].iter().map(|&r| SimplexPoint::new(vec![r]).unwrap()).collect();
        let ds = simplex_distance_matrix(&g, &f, &grid, 16, &SolverConfig::default()).unwrap();
        let e = two_node_examples(&f, 1.0, a, b).unwrap();
        let up = lifted_semimetric_upper(&m2, &m3, &grid, &ds).unwrap();
        assert!(up.upper_bound <= e.d23 + 1e-8);
        assert_abs_diff_eq!(up.upper_bound, e.d23, epsilon = 1e-6);
        let up12 = lifted_semimetric_upper(&m1, &m2, &grid, &ds).unwrap();
        assert_abs_diff_eq!(up12.upper_bound, a, epsilon = 1e-6);
    }

    #[test]
    fn witness_for_geometric() {
        let w = triangle_failure_witness(&Interpolation::Geometric, 1.0, &WitnessSearch::default()).unwrap();
        let e = two_node_examples(&Interpolation::Geometric, 1.0, w.a, w.b).unwrap();
        assert!(e.d23 > e.d12 + e.d13 + 1e-6);
        assert!(matches!(
            triangle_failure_witness(&Interpolation::Arithmetic, 1.0, &WitnessSearch::default()),
            Err(Error::ThetaNotVanishing(_))
        ));
    }

    #[test]
    fn chain_on_identical_measures() {
        let g = WeightedGraph::two_node(1.0).unwrap();
        let f = Interpolation::Geometric;
        let mu = line(&[(-0.25, &[0.3, 0.2]), (0.5, &[0.1, 0.4])]);
        let r = check_chain(&g, &f, &mu, &mu, &ChainConfig::default()).unwrap();
        assert!(r.ok, "{r:?}");
        assert_abs_diff_eq!(r.w2w, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.w_dyn, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn random_instances_are_normalized() {
        for seed in 0..10 {
            let (n, mu, nu) = random_instance(seed, 4).unwrap();
            assert_eq!(mu.n_species(), n);
            assert!(mu.atoms().len() <= 4 && nu.atoms().len() <= 4);
            assert_abs_diff_eq!(nu.total_mass(), 1.0, epsilon = 1e-12);
        }
    }
}
