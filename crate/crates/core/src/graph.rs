//! Weighted label graphs, interpolation functions and the tangent-space algebra
//! on probability vectors over the graph.
//!
//! Conventions: the gradient of a node function is `(∇φ)_ij = φ_j - φ_i`, the
//! divergence of an edge field is `(∇·v)_i = -½ Σ_j (v_ij - v_ji) q_ij`, and the
//! tangent inner product at `p` is `½ Σ_ij u_ij v_ij θ(p_i, p_j) q_ij`.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};

/// Tolerance used when checking that probability vectors sum to one.
pub const MASS_TOL: f64 = 1e-12;

/// Eigenvalues below this threshold are treated as zero by the pseudo-inverse.
pub const PINV_THRESHOLD: f64 = 1e-12;

/// Symmetric, nonnegative, connected edge weights on `n` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    q: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    q: Vec<Vec<f64>>,
}

impl WeightedGraph {
    /// Builds and validates a graph from a dense weight matrix.
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        let g = Self { q };
        g.validate()?;
        Ok(g)
    }

    /// Builds a graph without validating it. `validate` can be called later.
    pub fn new_unchecked(q: DMatrix<f64>) -> Self {
        Self { q }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            ensure_len(n, r.len())?;
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Two nodes joined by a single edge of weight `q`.
    pub fn two_node(q: f64) -> Result<Self> {
        Self::from_rows(&[vec![0.0, q], vec![q, 0.0]])
    }

    /// Complete graph with every off-diagonal weight equal to `q`.
    pub fn complete(n: usize, q: f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { q }))
    }

    /// Path graph `0 - 1 - ... - n-1` with unit weights.
    pub fn path(n: usize) -> Result<Self> {
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            if i.abs_diff(j) == 1 {
                1.0
            } else {
                0.0
            }
        }))
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.q[(i, j)]
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Undirected edges `(i, j, q_ij)` with `i < j` and `q_ij > 0`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.q[(i, j)] > 0.0 {
                    out.push((i, j, self.q[(i, j)]));
                }
            }
        }
        out
    }

    /// `Q = max_i Σ_{j≠i} q_ij`.
    pub fn max_degree(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).filter(|&j| j != i).map(|j| self.q[(i, j)]).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Checks symmetry, nonnegativity and connectivity of the positive edges.
    pub fn validate(&self) -> Result<()> {
        let n = self.q.nrows();
        if self.q.ncols() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: self.q.ncols(),
            });
        }
        if n == 0 {
            return Err(Error::TooFewNodes { min: 1, got: 0 });
        }
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (self.q[(i, j)], self.q[(j, i)]);
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::NegativeWeight { i, j, q: a });
                }
                if a != b {
                    return Err(Error::Asymmetric {
                        i,
                        j,
                        qij: a,
                        qji: b,
                    });
                }
            }
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if j != i && !seen[j] && self.q[(i, j)] > 0.0 {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::Disconnected(k));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: GraphJson = serde_json::from_str(s)?;
        ensure_len(raw.n, raw.q.len())?;
        Self::from_rows(&raw.q)
    }

    pub fn to_json(&self) -> String {
        let n = self.n();
        let raw = GraphJson {
            n,
            q: (0..n).map(|i| (0..n).map(|j| self.q[(i, j)]).collect()).collect(),
        };
        serde_json::to_string(&raw).expect("graph serializes")
    }
}

/// Which family an interpolation function belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpolationKind {
    Arithmetic,
    Geometric,
    Logarithmic,
    Custom,
}

type CustomFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// The mean `θ(s, t)` assigning an edge density to a pair of node densities.
#[derive(Clone)]
pub enum Interpolation {
    Arithmetic,
    Geometric,
    Logarithmic,
    Custom { name: String, f: CustomFn },
}

impl fmt::Debug for Interpolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interpolation::Custom { name, .. } => write!(f, "Custom({name})"),
            other => write!(f, "{:?}", other.kind()),
        }
    }
}

impl std::str::FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "arithmetic" => Ok(Interpolation::Arithmetic),
            "geometric" => Ok(Interpolation::Geometric),
            "logarithmic" => Ok(Interpolation::Logarithmic),
            other => Err(Error::Parse(format!(
                "unknown interpolation '{other}' (expected arithmetic | geometric | logarithmic)"
            ))),
        }
    }
}

impl Interpolation {
    pub fn custom(name: &str, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Interpolation::Custom {
            name: name.to_string(),
            f: Arc::new(f),
        }
    }

    pub fn kind(&self) -> InterpolationKind {
        match self {
            Interpolation::Arithmetic => InterpolationKind::Arithmetic,
            Interpolation::Geometric => InterpolationKind::Geometric,
            Interpolation::Logarithmic => InterpolationKind::Logarithmic,
            Interpolation::Custom { .. } => InterpolationKind::Custom,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Interpolation::Custom { name, .. } => name.clone(),
            Interpolation::Arithmetic => "arithmetic".into(),
            Interpolation::Geometric => "geometric".into(),
            Interpolation::Logarithmic => "logarithmic".into(),
        }
    }

    /// `θ(s, t)` for `s, t ≥ 0`, returning a domain error on negative input.
    pub fn eval(&self, s: f64, t: f64) -> Result<f64> {
        if s < 0.0 || t < 0.0 || s.is_nan() || t.is_nan() {
            return Err(Error::Domain(format!("theta({s}, {t}) needs nonnegative arguments")));
        }
        Ok(self.value(s, t))
    }

    /// `θ(s, t)` without the sign check; negative arguments are clamped to 0.
    pub fn value(&self, s: f64, t: f64) -> f64 {
        let (s, t) = (s.max(0.0), t.max(0.0));
        match self {
            Interpolation::Arithmetic => 0.5 * (s + t),
            Interpolation::Geometric => (s * t).sqrt(),
            Interpolation::Logarithmic => log_mean(s, t),
            Interpolation::Custom { f, .. } => f(s, t),
        }
    }

    /// Partial derivatives `(∂θ/∂s, ∂θ/∂t)` at a point of the open quadrant.
    pub fn partials(&self, s: f64, t: f64) -> (f64, f64) {
        match self {
            Interpolation::Arithmetic => (0.5, 0.5),
            Interpolation::Geometric => {
                if s <= 0.0 || t <= 0.0 {
                    let inf = f64::INFINITY;
                    return (if t > 0.0 { inf } else { 0.0 }, if s > 0.0 { inf } else { 0.0 });
                }
                (0.5 * (t / s).sqrt(), 0.5 * (s / t).sqrt())
            }
            Interpolation::Logarithmic => {
                if s <= 0.0 || t <= 0.0 {
                    let inf = f64::INFINITY;
                    return (if t > 0.0 { inf } else { 0.0 }, if s > 0.0 { inf } else { 0.0 });
                }
                let u = t.ln() - s.ln();
                let (g, dg) = expm1_ratio(u);
                (g - dg, s * dg / t)
            }
            Interpolation::Custom { f, .. } => {
                let hs = 1e-7 * s.max(1e-3);
                let ht = 1e-7 * t.max(1e-3);
                let ds = (f(s + hs, t) - f((s - hs).max(0.0), t)) / (s + hs - (s - hs).max(0.0));
                let dt = (f(s, t + ht) - f(s, (t - ht).max(0.0))) / (t + ht - (t - ht).max(0.0));
                (ds, dt)
            }
        }
    }

    /// Whether `θ(1, 0) = 0`, i.e. the mean vanishes at the boundary.
    pub fn vanishes_at_boundary(&self) -> bool {
        self.value(1.0, 0.0) == 0.0
    }
}

/// Logarithmic mean with continuous extension: `s` on the diagonal, 0 on the axes.
fn log_mean(s: f64, t: f64) -> f64 {
    if s == 0.0 || t == 0.0 {
        return 0.0;
    }
    if s == t {
        return s;
    }
    let u = t.ln() - s.ln();
    s * expm1_ratio(u).0
}

/// `g(u) = (e^u - 1)/u` and its derivative, accurate near `u = 0`.
fn expm1_ratio(u: f64) -> (f64, f64) {
    if u.abs() < 1e-3 {
        let g = 1.0 + u / 2.0 + u * u / 6.0 + u * u * u / 24.0;
        let dg = 0.5 + u / 3.0 + u * u / 8.0 + u * u * u / 30.0;
        (g, dg)
    } else {
        let g = u.exp_m1() / u;
        let dg = (u * u.exp() - u.exp_m1()) / (u * u);
        (g, dg)
    }
}

/// Property of an interpolation function checked by [`validate_interpolation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterpolationProperty {
    Symmetry,
    Positivity,
    Normalization,
    Monotonicity,
    Homogeneity,
    Concavity,
    ArithmeticBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyViolation {
    pub property: InterpolationProperty,
    /// Sample point(s) at which the property failed.
    pub witness: Vec<f64>,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    pub samples: usize,
    pub violations: Vec<PropertyViolation>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, p: InterpolationProperty) -> bool {
        self.violations.iter().any(|v| v.property == p)
    }
}

/// Sample-based check of the interpolation axioms on `[0, 10]²` with a fixed seed.
///
/// Only the first violation per property is recorded.
pub fn validate_interpolation(f: &Interpolation, n_samples: usize, seed: u64) -> PropertyReport {
    const TOL: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations: Vec<PropertyViolation> = Vec::new();
    let mut record = |property, witness: Vec<f64>, gap: f64| {
        if !violations.iter().any(|v: &PropertyViolation| v.property == property) {
            violations.push(PropertyViolation {
                property,
                witness,
                gap,
            });
        }
    };
    let th = |s: f64, t: f64| f.value(s, t);
    let rel = |x: f64| TOL * (1.0 + x.abs());

    let one = th(1.0, 1.0);
    if (one - 1.0).abs() > TOL {
        record(InterpolationProperty::Normalization, vec![1.0, 1.0], (one - 1.0).abs());
    }

    for _ in 0..n_samples.max(1) {
        let s: f64 = rng.random_range(0.0..10.0);
        let t: f64 = rng.random_range(0.0..10.0);
        let v = th(s, t);

        let sym = (v - th(t, s)).abs();
        if sym > rel(v) {
            record(InterpolationProperty::Symmetry, vec![s, t], sym);
        }
        if s > 0.0 && t > 0.0 && v <= 0.0 {
            record(InterpolationProperty::Positivity, vec![s, t], -v);
        }
        let lam: f64 = rng.random_range(0.1..5.0);
        let hom = (th(lam * s, lam * t) - lam * v).abs();
        if hom > rel(lam * v) {
            record(InterpolationProperty::Homogeneity, vec![s, t, lam], hom);
        }
        let r: f64 = rng.random_range(0.0..=s);
        let mono = th(r, t) - v;
        if mono > rel(v) {
            record(InterpolationProperty::Monotonicity, vec![r, s, t], mono);
        }
        let arith = v - 0.5 * (s + t);
        if arith > rel(s + t) {
            record(InterpolationProperty::ArithmeticBound, vec![s, t], arith);
        }
        let s2: f64 = rng.random_range(0.0..10.0);
        let t2: f64 = rng.random_range(0.0..10.0);
        let mid = th(0.5 * (s + s2), 0.5 * (t + t2));
        let chord = 0.5 * (v + th(s2, t2));
        if chord - mid > rel(mid) {
            record(InterpolationProperty::Concavity, vec![s, t, s2, t2], chord - mid);
        }
    }

    PropertyReport {
        name: f.name(),
        samples: n_samples,
        violations,
    }
}

/// Probability vector on the graph nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDistribution(Vec<f64>);

impl GraphDistribution {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some(&x) = p.iter().find(|&&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::Domain(format!("negative or non-finite probability {x}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > MASS_TOL * (p.len() as f64).max(1.0) {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self(p))
    }

    /// One-hot vector `δ_i`.
    pub fn dirac(n: usize, i: usize) -> Self {
        let mut p = vec![0.0; n];
        p[i] = 1.0;
        Self(p)
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&x| x > 0.0)
    }
}

/// A function on directed edges, stored as a dense `n × n` matrix.
pub type EdgeField = DMatrix<f64>;

/// `(∇φ)_ij = φ_j − φ_i`.
pub fn graph_gradient(g: &WeightedGraph, phi: &[f64]) -> Result<EdgeField> {
    let n = g.n();
    ensure_len(n, phi.len())?;
    Ok(DMatrix::from_fn(n, n, |i, j| phi[j] - phi[i]))
}

/// `(∇·v)_i = −½ Σ_j (v_ij − v_ji) q_ij`.
pub fn graph_divergence(g: &WeightedGraph, v: &EdgeField) -> Result<Vec<f64>> {
    let n = g.n();
    ensure_len(n, v.nrows())?;
    ensure_len(n, v.ncols())?;
    Ok((0..n)
        .map(|i| {
            -0.5 * (0..n)
                .map(|j| (v[(i, j)] - v[(j, i)]) * g.q(i, j))
                .sum::<f64>()
        })
        .collect())
}

/// The `p`-weighted graph Laplacian `B(p)`.
pub fn weighted_laplacian(g: &WeightedGraph, f: &Interpolation, p: &[f64]) -> Result<DMatrix<f64>> {
    let n = g.n();
    ensure_len(n, p.len())?;
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let w = f.value(p[i], p[j]) * g.q(i, j);
                b[(i, j)] = -w;
                b[(i, i)] += w;
            }
        }
    }
    Ok(b)
}

/// Solves `B ψ = rhs` with `Σ ψ = 0` for a Laplacian with one-dimensional kernel.
pub fn laplacian_pinv_apply(b: &DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = b.nrows();
    ensure_len(n, rhs.len())?;
    let sum: f64 = rhs.iter().sum();
    let scale = rhs.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    if sum.abs() > 1e-10 * scale {
        return Err(Error::NotInRange { sum });
    }
    let eig = SymmetricEigen::new(b.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[c]));
    if n >= 2 && eig.eigenvalues[order[1]] < PINV_THRESHOLD {
        return Err(Error::RankDeficient(eig.eigenvalues[order[1]]));
    }
    let mut psi = vec![0.0; n];
    for k in 0..n {
        let lam = eig.eigenvalues[k];
        if lam < PINV_THRESHOLD {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let coef: f64 = v.iter().zip(rhs).map(|(a, b)| a * b).sum::<f64>() / lam;
        for (o, vi) in psi.iter_mut().zip(v.iter()) {
            *o += coef * vi;
        }
    }
    let mean = psi.iter().sum::<f64>() / n as f64;
    psi.iter_mut().for_each(|x| *x -= mean);
    Ok(psi)
}

/// `⟨u, v⟩_p = ½ Σ_ij u_ij v_ij θ(p_i, p_j) q_ij`.
pub fn tangent_inner_product(
    g: &WeightedGraph,
    f: &Interpolation,
    p: &[f64],
    u: &EdgeField,
    v: &EdgeField,
) -> Result<f64> {
    let n = g.n();
    ensure_len(n, p.len())?;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += u[(i, j)] * v[(i, j)] * f.value(p[i], p[j]) * g.q(i, j);
            }
        }
    }
    Ok(0.5 * acc)
}

/// Perspective function `α(m, s, t) = ‖m‖² / θ(s, t)` with its closure conventions.
pub fn alpha(m: &[f64], s: f64, t: f64, f: &Interpolation) -> f64 {
    let norm2: f64 = m.iter().map(|x| x * x).sum();
    if s < 0.0 || t < 0.0 {
        return f64::INFINITY;
    }
    let th = f.value(s, t);
    if th > 0.0 {
        norm2 / th
    } else if norm2 == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Number of directions on the unit simplex scanned by [`beta_membership`].
pub const BETA_DIRECTIONS: usize = 4001;

/// Whether `(a, b, c)` lies in the cone `K` where the conjugate of `α` vanishes,
/// i.e. `sup_{t,s ≥ 0} a t + b s + ¼‖c‖² θ(t, s) ≤ tol`.
pub fn beta_membership(a: f64, b: f64, c: &[f64], f: &Interpolation, tol: f64) -> bool {
    let c2: f64 = c.iter().map(|x| x * x).sum();
    (0..BETA_DIRECTIONS).all(|k| {
        let t = k as f64 / (BETA_DIRECTIONS - 1) as f64;
        let s = 1.0 - t;
        a * t + b * s + 0.25 * c2 * f.value(t, s) <= tol
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two() -> WeightedGraph {
        WeightedGraph::two_node(1.0).unwrap()
    }

    #[test]
    fn theta_examples() {
        assert_eq!(Interpolation::Arithmetic.eval(1.0, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(Interpolation::Geometric.eval(4.0, 1.0).unwrap(), 2.0);
        let e = std::f64::consts::E;
        // log mean of (1, e) is e - 1.
        assert_abs_diff_eq!(Interpolation::Logarithmic.eval(1.0, e).unwrap(), e - 1.0, epsilon = 1e-14);
        assert_eq!(Interpolation::Logarithmic.eval(2.0, 2.0).unwrap(), 2.0);
        assert_eq!(Interpolation::Logarithmic.eval(0.0, 2.0).unwrap(), 0.0);
        assert!(Interpolation::Geometric.eval(-1.0, 1.0).is_err());
    }

    #[test]
    fn log_mean_matches_quadrature_of_power_mean() {
        // θ(s,t) = ∫₀¹ s^{1-a} t^a da, midpoint rule with many nodes.
        let (s, t): (f64, f64) = (0.3, 7.0);
        let n = 200_000;
        let quad: f64 = (0..n)
            .map(|k| {
                let a = (k as f64 + 0.5) / n as f64;
                s.powf(1.0 - a) * t.powf(a)
            })
            .sum::<f64>()
            / n as f64;
        assert_abs_diff_eq!(Interpolation::Logarithmic.value(s, t), quad, epsilon = 1e-8);
        // near the diagonal the series branch is used
        let v = Interpolation::Logarithmic.value(1.0, 1.0 + 1e-9);
        assert_abs_diff_eq!(v, 1.0 + 0.5e-9, epsilon = 1e-15);
    }

    #[test]
    fn partials_match_finite_differences() {
        for f in [Interpolation::Arithmetic, Interpolation::Geometric, Interpolation::Logarithmic] {
            for &(s, t) in &[(0.3, 0.7), (1.0, 1.0), (2.0, 0.01), (0.5, 0.5000001)] {
                let (ds, dt) = f.partials(s, t);
                let h = 1e-6;
                let fds = (f.value(s + h, t) - f.value(s - h, t)) / (2.0 * h);
                let fdt = (f.value(s, t + h) - f.value(s, t - h)) / (2.0 * h);
                assert_abs_diff_eq!(ds, fds, epsilon = 1e-5);
                assert_abs_diff_eq!(dt, fdt, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn interpolation_axioms() {
        for f in [Interpolation::Arithmetic, Interpolation::Geometric, Interpolation::Logarithmic] {
            let rep = validate_interpolation(&f, 1000, 1);
            assert!(rep.passed(), "{:?}", rep);
        }
        let max = Interpolation::custom("max", f64::max);
        let rep = validate_interpolation(&max, 1000, 1);
        assert!(rep.violates(InterpolationProperty::Concavity));
        let w = rep
            .violations
            .iter()
            .find(|v| v.property == InterpolationProperty::Concavity)
            .unwrap();
        assert_eq!(w.witness.len(), 4);
    }

    #[test]
    fn graph_validation() {
        assert!(WeightedGraph::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
        let e = WeightedGraph::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ]);
        assert_eq!(e, Err(Error::Disconnected(2)));
        let e = WeightedGraph::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]]);
        assert!(matches!(e, Err(Error::Asymmetric { .. })));
        let e = WeightedGraph::from_rows(&[vec![0.0, -1.0], vec![-1.0, 0.0]]);
        assert!(matches!(e, Err(Error::NegativeWeight { .. })));
    }

    #[test]
    fn graph_json_roundtrip() {
        let g = WeightedGraph::from_json(r#"{"n": 3, "q": [[0,1,0],[1,0,2],[0,2,0]]}"#).unwrap();
        assert_eq!(g.q(1, 2), 2.0);
        assert_eq!(WeightedGraph::from_json(&g.to_json()).unwrap(), g);
        assert_eq!(g.max_degree(), 3.0);
    }

    #[test]
    fn gradient_examples() {
        let g = two();
        let d = graph_gradient(&g, &[0.0, 1.0]).unwrap();
        assert_eq!(d, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        let d = graph_gradient(&g, &[3.0, 3.0]).unwrap();
        assert!(d.iter().all(|&x| x == 0.0));
        let g3 = WeightedGraph::path(3).unwrap();
        assert_eq!(graph_gradient(&g3, &[1.0, 2.0, 4.0]).unwrap()[(0, 2)], 3.0);
        assert!(graph_gradient(&g3, &[1.0]).is_err());
    }

    #[test]
    fn divergence_examples() {
        let g = two();
        let sym = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]);
        assert_eq!(graph_divergence(&g, &sym).unwrap(), vec![0.0, 0.0]);
        let v = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert_eq!(graph_divergence(&g, &v).unwrap(), vec![-1.0, 1.0]);
        let g3 = WeightedGraph::complete(3, 0.7).unwrap();
        let v = DMatrix::from_row_slice(3, 3, &[0.1, 2.0, -1.0, 0.3, 0.0, 5.0, 1.5, -2.0, 0.0]);
        let div = graph_divergence(&g3, &v).unwrap();
        assert_abs_diff_eq!(div.iter().sum::<f64>(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn laplacian_examples() {
        let g = two();
        let b = weighted_laplacian(&g, &Interpolation::Arithmetic, &[0.5, 0.5]).unwrap();
        assert_eq!(b, DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]));
        let g3 = WeightedGraph::path(3).unwrap();
        let b = weighted_laplacian(&g3, &Interpolation::Geometric, &[0.25, 0.25, 0.5]).unwrap();
        // node 0 only touches node 1: θ(¼,¼) = ¼
        assert_abs_diff_eq!(b[(0, 0)], 0.25);
        let row_sums = b.column_sum();
        assert!(row_sums.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn pinv_examples() {
        let b = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert_eq!(laplacian_pinv_apply(&b, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let psi = laplacian_pinv_apply(&b, &[1.0, -1.0]).unwrap();
        assert_abs_diff_eq!(psi[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(psi[1], -1.0, epsilon = 1e-12);
        assert!(matches!(laplacian_pinv_apply(&b, &[1.0, 0.0]), Err(Error::NotInRange { .. })));
        let z = DMatrix::zeros(2, 2);
        assert!(matches!(laplacian_pinv_apply(&z, &[1.0, -1.0]), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn inner_product_examples() {
        let g = two();
        let p = [0.5, 0.5];
        let z = DMatrix::zeros(2, 2);
        assert_eq!(tangent_inner_product(&g, &Interpolation::Arithmetic, &p, &z, &z).unwrap(), 0.0);
        let u = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert_abs_diff_eq!(
            tangent_inner_product(&g, &Interpolation::Arithmetic, &p, &u, &u).unwrap(),
            0.5
        );
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha(&[0.0], 0.0, 0.0, &Interpolation::Arithmetic), 0.0);
        assert_eq!(alpha(&[2.0], 1.0, 1.0, &Interpolation::Arithmetic), 4.0);
        assert_eq!(alpha(&[1.0], 0.0, 0.0, &Interpolation::Geometric), f64::INFINITY);
        assert_eq!(alpha(&[1.0], 1.0, 0.0, &Interpolation::Geometric), f64::INFINITY);
        assert_eq!(alpha(&[0.0], 1.0, 0.0, &Interpolation::Geometric), 0.0);
    }

    #[test]
    fn beta_examples() {
        let f = Interpolation::Arithmetic;
        assert!(beta_membership(-1.0, -1.0, &[0.0], &f, 0.0));
        assert!(!beta_membership(1.0, 0.0, &[0.0], &f, 0.0));
        for c in [0.3, 1.0, 4.0] {
            let a = -c * c / 8.0;
            assert!(beta_membership(a, a, &[c], &f, 1e-12));
            assert!(beta_membership(a, a, &[c], &Interpolation::Geometric, 1e-12));
        }
    }
}
