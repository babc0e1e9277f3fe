//! The graph Wasserstein distance on probability vectors, the induced distance
//! on the simplex, two-node closed forms and geodesics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamic::{solve_fields, Convergence, GridConfig, SolverConfig};
use crate::error::{Error, Result};
use crate::graph::{EdgeField, GraphDistribution, Interpolation, WeightedGraph};
use crate::ode::{rk45, Rk45Config};
use crate::quadrature::{integrate, integrate_singular_left};

/// A point `r` of the simplex `{r ∈ ℝⁿ⁻¹ : rᵢ ≥ 0, Σ rᵢ ≤ 1}`, identified with the
/// probability vector `p(r) = (r₁, …, rₙ₋₁, 1 − Σ r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(r: Vec<f64>) -> Result<Self> {
        let sum: f64 = r.iter().sum();
        if r.iter().any(|&v| v < 0.0 || !v.is_finite()) || sum > 1.0 + 1e-12 {
            return Err(Error::Domain(format!("{r:?} is not in the simplex")));
        }
        Ok(Self(r))
    }

    /// Corner `e_j` of the simplex in `ℝⁿ⁻¹`; the last species maps to the origin.
    pub fn corner(n: usize, j: usize) -> Self {
        let mut r = vec![0.0; n - 1];
        if j + 1 < n {
            r[j] = 1.0;
        }
        Self(r)
    }

    pub fn barycenter(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n - 1])
    }

    pub fn from_distribution(p: &[f64]) -> Result<Self> {
        Self::new(p[..p.len() - 1].to_vec())
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// Number of graph nodes `n` (one more than the coordinate dimension).
    pub fn n(&self) -> usize {
        self.0.len() + 1
    }

    /// `p(r)` as a plain vector.
    pub fn probabilities(&self) -> Vec<f64> {
        let mut p = self.0.clone();
        p.push((1.0 - self.0.iter().sum::<f64>()).max(0.0));
        p
    }

    pub fn to_distribution(&self) -> GraphDistribution {
        GraphDistribution::new(self.probabilities()).expect("simplex point maps to a distribution")
    }

    /// Smallest entry of `p(r)`.
    pub fn min_barycentric(&self) -> f64 {
        self.probabilities().into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// `Ξ f = (f, −Σ f)`, lifting a tangent vector of the simplex to a mean-zero node function.
pub fn xi(f: &[f64]) -> Vec<f64> {
    let mut v = f.to_vec();
    v.push(-f.iter().sum::<f64>());
    v
}

/// A discrete path of graph distributions with momenta between consecutive levels.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPath {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Antisymmetric momentum `σ_t` on step `t`, so that
    /// `p_{t+1} − p_t = −Δt ∇·σ_t`.
    pub momenta: Vec<EdgeField>,
}

impl GraphPath {
    /// `Σ_t Δt ½ Σ_ij α(σ_ij, p̄ᵢ, p̄ⱼ) q_ij` with `p̄` the average of the two levels.
    pub fn action(&self, g: &WeightedGraph, f: &Interpolation) -> f64 {
        let n = g.n();
        let mut total = 0.0;
        for (t, s) in self.momenta.iter().enumerate() {
            let dt = self.times[t + 1] - self.times[t];
            let pb: Vec<f64> = (0..n).map(|i| 0.5 * (self.states[t][i] + self.states[t + 1][i])).collect();
            for i in 0..n {
                for j in 0..n {
                    if i != j && g.q(i, j) > 0.0 {
                        total += dt * 0.5 * g.q(i, j) * crate::graph::alpha(&[s[(i, j)]], pb[i], pb[j], f);
                    }
                }
            }
        }
        total
    }
}

#[derive(Debug, Clone)]
pub struct WgResult {
    pub distance: f64,
    pub path: GraphPath,
    pub convergence: Convergence,
}

/// `W_𝒢(p0, p1)` by the primal–dual solver on `t_steps` uniform steps.
pub fn wg_dynamic(
    g: &WeightedGraph,
    f: &Interpolation,
    p0: &[f64],
    p1: &[f64],
    t_steps: usize,
    cfg: &SolverConfig,
) -> Result<WgResult> {
    let n = g.n();
    if t_steps < 2 {
        return Err(Error::Domain(format!("need at least 2 time steps, got {t_steps}")));
    }
    GraphDistribution::new(p0.to_vec())?;
    GraphDistribution::new(p1.to_vec())?;
    crate::error::ensure_len(n, p0.len())?;
    crate::error::ensure_len(n, p1.len())?;
    let grid = GridConfig::new(0.0, 1.0, 1)?;
    let res = solve_fields(g, f, &grid, t_steps, p0.to_vec(), p1.to_vec(), false, cfg)?;
    let sol = &res.solution;
    let times = (0..=t_steps).map(|t| t as f64 / t_steps as f64).collect();
    let states = (0..=t_steps).map(|t| sol.level(t).to_vec()).collect();
    let momenta = (0..t_steps).map(|t| sol.sigma_matrix(t, 0)).collect();
    Ok(WgResult {
        distance: res.distance,
        path: GraphPath { times, states, momenta },
        convergence: res.convergence,
    })
}

/// Two-node distance `(1/√q) |∫_{a0}^{a1} θ(a, 1−a)^{−1/2} da|`, where `a` is the
/// mass on the first node.
pub fn wg_two_node(f: &Interpolation, q: f64, a0: f64, a1: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::Domain(format!("edge weight must be positive, got {q}")));
    }
    for a in [a0, a1] {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::Domain(format!("{a} outside [0, 1]")));
        }
    }
    if a0 == a1 {
        return Ok(0.0);
    }
    let (lo, hi) = if a0 < a1 { (a0, a1) } else { (a1, a0) };
    Ok(speed_integral(f, lo, hi)? / q.sqrt())
}

/// `∫_lo^hi θ(a, 1−a)^{−1/2} da` for `0 ≤ lo < hi ≤ 1`.
fn speed_integral(f: &Interpolation, lo: f64, hi: f64) -> Result<f64> {
    const REL: f64 = 1e-12;
    let left = |a: f64| 1.0 / f.value(a, 1.0 - a).sqrt();
    // evaluated with the small coordinate exact to keep precision near a = 1
    let right = |b: f64| 1.0 / f.value(1.0 - b, b).sqrt();
    let sing_lo = lo == 0.0 && f.value(0.0, 1.0) == 0.0;
    let sing_hi = hi == 1.0 && f.value(1.0, 0.0) == 0.0;
    let span = hi - lo;
    let delta = (0.25 * span).min(0.125);
    let mut total = 0.0;
    let (mut a, mut b) = (lo, hi);
    if sing_lo {
        total += integrate_singular_left(left, delta, REL).map_err(|_| Error::DivergentIntegral { endpoint: 0.0 })?;
        a = delta;
    }
    if sing_hi {
        total += integrate_singular_left(right, delta, REL).map_err(|_| Error::DivergentIntegral { endpoint: 1.0 })?;
        b = 1.0 - delta;
    }
    let mid = 0.5 * (a + b);
    total += integrate(left, a, mid, REL, 0.0).0;
    total += integrate(right, 1.0 - b, 1.0 - mid, REL, 0.0).0;
    if !total.is_finite() {
        return Err(Error::DivergentIntegral { endpoint: if lo == 0.0 { 0.0 } else { 1.0 } });
    }
    Ok(total)
}

/// The induced distance `d(r0, r1) = W_𝒢(p(r0), p(r1))` on the simplex; for two
/// nodes the closed form is used.
pub fn simplex_distance(
    g: &WeightedGraph,
    f: &Interpolation,
    r0: &SimplexPoint,
    r1: &SimplexPoint,
    t_steps: usize,
    cfg: &SolverConfig,
) -> Result<f64> {
    crate::error::ensure_len(g.n(), r0.n())?;
    crate::error::ensure_len(g.n(), r1.n())?;
    if r0 == r1 {
        return Ok(0.0);
    }
    if g.n() == 2 {
        return wg_two_node(f, g.q(0, 1), r0.coords()[0], r1.coords()[0]);
    }
    Ok(wg_dynamic(g, f, &r0.probabilities(), &r1.probabilities(), t_steps, cfg)?.distance)
}

/// Constant-speed two-node geodesic from `r_start` to `r_end` (mass on the first
/// node), sampled at `steps + 1` uniform times.
///
/// Integrates `ṙ = ±√q d √θ(r, 1−r)` with Dormand–Prince; if that stalls at a
/// boundary where `θ` vanishes, the path is recovered by inverting the arclength.
pub fn two_node_geodesic(f: &Interpolation, q: f64, r_start: f64, r_end: f64, steps: usize) -> Result<GraphPath> {
    let steps = steps.max(1);
    let d = wg_two_node(f, q, r_start, r_end)?;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let rs: Vec<f64> = if d == 0.0 {
        vec![r_start; steps + 1]
    } else {
        let sign = if r_end > r_start { 1.0 } else { -1.0 };
        let rhs = |_: f64, r: f64| sign * q.sqrt() * d * f.value(r.clamp(0.0, 1.0), (1.0 - r).clamp(0.0, 1.0)).sqrt();
        let ode = rk45(rhs, 0.0, r_start, &times[1..], &Rk45Config::default());
        match ode {
            Ok(mut v) if (v[v.len() - 1] - r_end).abs() <= 1e-9 => {
                v.insert(0, r_start);
                v
            }
            _ => arclength_inverse(f, q, r_start, r_end, d, &times)?,
        }
    };
    let states: Vec<Vec<f64>> = rs.iter().map(|&r| vec![r, 1.0 - r]).collect();
    let dt = 1.0 / steps as f64;
    let momenta = rs
        .windows(2)
        .map(|w| {
            let s = (w[1] - w[0]) / (dt * q);
            DMatrix::from_row_slice(2, 2, &[0.0, s, -s, 0.0])
        })
        .collect();
    Ok(GraphPath { times, states, momenta })
}

fn arclength_inverse(f: &Interpolation, q: f64, r0: f64, r1: f64, d: f64, times: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t == 0.0 {
            out.push(r0);
            continue;
        }
        if t == 1.0 {
            out.push(r1);
            continue;
        }
        let target = t * d;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let r = r0 + mid * (r1 - r0);
            if wg_two_node(f, q, r0, r)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        out.push(r0 + 0.5 * (lo + hi) * (r1 - r0));
    }
    Ok(out)
}

/// Largest deviation of the average speed on each step from the path length:
/// `max_k |d(r_k, r_{k+1})/Δt − d(r_0, r_T)|`.
pub fn constant_speed_deviation(f: &Interpolation, q: f64, path: &GraphPath) -> Result<f64> {
    let r: Vec<f64> = path.states.iter().map(|p| p[0]).collect();
    let total = wg_two_node(f, q, r[0], r[r.len() - 1])?;
    let mut worst: f64 = 0.0;
    for (k, w) in r.windows(2).enumerate() {
        let dt = path.times[k + 1] - path.times[k];
        worst = worst.max((wg_two_node(f, q, w[0], w[1])? / dt - total).abs());
    }
    Ok(worst)
}

/// Pulls a simplex path towards the segment between two interior anchors:
/// `γᵃ(t) = (1 − a)γ(t) + a((1 − t)s0 + t s1)`.
pub fn regularized_geodesic(
    path: &[SimplexPoint],
    a: f64,
    s0: &SimplexPoint,
    s1: &SimplexPoint,
) -> Result<Vec<SimplexPoint>> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::Domain(format!("blend parameter {a} outside [0, 1]")));
    }
    if s0.min_barycentric() <= 0.0 || s1.min_barycentric() <= 0.0 {
        return Err(Error::BoundaryAnchors);
    }
    let len = path.len();
    path.iter()
        .enumerate()
        .map(|(k, g)| {
            crate::error::ensure_len(s0.coords().len(), g.coords().len())?;
            let t = if len > 1 { k as f64 / (len - 1) as f64 } else { 0.0 };
            let r = g
                .coords()
                .iter()
                .zip(s0.coords().iter().zip(s1.coords()))
                .map(|(&gv, (&u, &v))| (1.0 - a) * gv + a * ((1.0 - t) * u + t * v))
                .collect();
            Ok(SimplexPoint(r))
        })
        .collect()
}
