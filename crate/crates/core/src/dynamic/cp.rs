//! Chambolle–Pock iteration for the discretized least-action problem on
//! `[0,1] × cells × species`.
//!
//! Unknowns are cell masses `ρ` on `T+1` time levels, face momenta `m` and one
//! antisymmetric edge momentum `s` per graph edge, cell and time step. The
//! continuity equation
//! `(ρ_{t+1} − ρ_t)/Δt + (m_{c+1} − m_c)/Δx − Σ_e ±q_e s_e = 0`
//! together with the endpoints defines an affine set, projected onto exactly
//! via fast transforms. The action is a sum of perspective terms on time and
//! face averages, each handled by its own prox.

use nalgebra::{DMatrix, SymmetricEigen};

use super::prox::{prox_graph_term, prox_perspective_scalar};
use super::SolverConfig;
use crate::error::{Error, Result};
use crate::graph::{alpha, Interpolation, WeightedGraph};

const INITIAL_RATIO: f64 = 0.1;
const BALANCE: f64 = 1.5;
const REPAIR_MAX_ITER: usize = 2000;
const REPAIR_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct Convergence {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    /// Number of graph-prox evaluations whose inner Newton solve hit its cap.
    pub newton_failures: usize,
}

pub(crate) struct Problem<'a> {
    pub g: &'a WeightedGraph,
    pub f: &'a Interpolation,
    pub t_steps: usize,
    pub cells: usize,
    pub dx: f64,
    pub transport: bool,
    pub rho0: Vec<f64>,
    pub rho1: Vec<f64>,
}

/// Primal fields. Layouts: `rho[(t·C + c)·n + i]`, `m[(t·(C+1) + f)·n + i]`,
/// `s[(t·C + c)·E + e]`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Fields {
    pub rho: Vec<f64>,
    pub m: Vec<f64>,
    pub s: Vec<f64>,
}

impl Fields {
    fn axpy(&mut self, a: f64, o: &Fields) {
        for (x, y) in self.rho.iter_mut().zip(&o.rho) {
            *x += a * y;
        }
        for (x, y) in self.m.iter_mut().zip(&o.m) {
            *x += a * y;
        }
        for (x, y) in self.s.iter_mut().zip(&o.s) {
            *x += a * y;
        }
    }

    fn norm2(&self) -> f64 {
        self.rho.iter().chain(&self.m).chain(&self.s).map(|v| v * v).sum()
    }

    fn len(&self) -> usize {
        self.rho.len() + self.m.len() + self.s.len()
    }
}

/// Dual variables: transport copies `(m̄, ρ̄)` and edge copies `(s, ρ̄_a, ρ̄_b)`.
#[derive(Debug, Clone, PartialEq)]
struct Dual {
    tr: Vec<[f64; 2]>,
    ed: Vec<[f64; 3]>,
    pos: Vec<f64>,
}

impl Dual {
    fn values(&self) -> impl Iterator<Item = &f64> {
        self.tr.iter().flatten().chain(self.ed.iter().flatten()).chain(self.pos.iter())
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.tr.iter_mut().flatten().chain(self.ed.iter_mut().flatten()).chain(self.pos.iter_mut())
    }

    fn combine(&mut self, other: &Dual, f: impl Fn(f64, f64) -> f64) {
        for (a, &b) in self.values_mut().zip(other.values()) {
            *a = f(*a, b);
        }
    }

    fn norm2(&self) -> f64 {
        self.values().map(|v| v * v).sum()
    }

    fn len(&self) -> usize {
        2 * self.tr.len() + 3 * self.ed.len() + self.pos.len()
    }
}

pub(crate) struct Solver<'a> {
    p: &'a Problem<'a>,
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    dt: f64,
    ut: DMatrix<f64>,
    uc: DMatrix<f64>,
    vg: DMatrix<f64>,
    eig: Vec<f64>,
}

fn dct_basis(n: usize) -> (DMatrix<f64>, Vec<f64>) {
    let u = DMatrix::from_fn(n, n, |k, j| {
        let c = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        c * (std::f64::consts::PI * k as f64 * (2 * j + 1) as f64 / (2 * n) as f64).cos()
    });
    let lam = (0..n)
        .map(|k| 2.0 - 2.0 * (std::f64::consts::PI * k as f64 / n as f64).cos())
        .collect();
    (u, lam)
}

impl<'a> Solver<'a> {
    pub fn new(p: &'a Problem<'a>) -> Result<Self> {
        let n = p.g.n();
        let (tt, cc) = (p.t_steps, p.cells);
        if p.rho0.len() != cc * n || p.rho1.len() != cc * n {
            return Err(Error::LengthMismatch {
                expected: cc * n,
                got: p.rho0.len().min(p.rho1.len()),
            });
        }
        let m0: f64 = p.rho0.iter().sum();
        let m1: f64 = p.rho1.iter().sum();
        if (m0 - m1).abs() > 1e-10 * m0.abs().max(1.0) {
            return Err(Error::MassMismatch(m0, m1));
        }
        let edges = p.g.edges();
        let dt = 1.0 / tt as f64;
        let (ut, lt) = dct_basis(tt);
        let (uc, lc) = dct_basis(cc);
        let mut gm = DMatrix::<f64>::zeros(n, n);
        for &(a, b, q) in &edges {
            let w = q * q;
            gm[(a, a)] += w;
            gm[(b, b)] += w;
            gm[(a, b)] -= w;
            gm[(b, a)] -= w;
        }
        let se = SymmetricEigen::new(gm);
        let mut eig = Vec::with_capacity(tt * cc * n);
        for k in 0..tt {
            for l in 0..cc {
                for j in 0..n {
                    let mut v = lt[k] / (dt * dt) + se.eigenvalues[j].max(0.0);
                    if p.transport {
                        v += lc[l] / (p.dx * p.dx);
                    }
                    eig.push(v);
                }
            }
        }
        let top = eig.iter().cloned().fold(0.0, f64::max);
        for v in eig.iter_mut() {
            *v = if *v > 1e-12 * top { 1.0 / *v } else { 0.0 };
        }
        Ok(Self {
            p,
            n,
            edges,
            dt,
            ut,
            uc,
            vg: se.eigenvectors,
            eig,
        })
    }

    fn e(&self) -> usize {
        self.edges.len()
    }

    fn zeros(&self) -> Fields {
        let (tt, cc, n) = (self.p.t_steps, self.p.cells, self.n);
        Fields {
            rho: vec![0.0; (tt + 1) * cc * n],
            m: vec![0.0; tt * (cc + 1) * n],
            s: vec![0.0; tt * cc * self.e()],
        }
    }

    fn ri(&self, t: usize, c: usize, i: usize) -> usize {
        (t * self.p.cells + c) * self.n + i
    }

    fn mi(&self, t: usize, f: usize, i: usize) -> usize {
        (t * (self.p.cells + 1) + f) * self.n + i
    }

    fn si(&self, t: usize, c: usize, e: usize) -> usize {
        (t * self.p.cells + c) * self.e() + e
    }

    /// Continuity residual `A x`, indexed like `ρ` without the last level.
    pub fn apply_a(&self, x: &Fields) -> Vec<f64> {
        let (tt, cc, n) = (self.p.t_steps, self.p.cells, self.n);
        let mut r = vec![0.0; tt * cc * n];
        for t in 0..tt {
            for c in 0..cc {
                for i in 0..n {
                    let k = self.ri(t, c, i);
                    let mut v = (x.rho[self.ri(t + 1, c, i)] - x.rho[k]) / self.dt;
                    v += (x.m[self.mi(t, c + 1, i)] - x.m[self.mi(t, c, i)]) / self.p.dx;
                    r[k] = v;
                }
                for (e, &(a, b, q)) in self.edges.iter().enumerate() {
                    let s = x.s[self.si(t, c, e)];
                    r[self.ri(t, c, a)] -= q * s;
                    r[self.ri(t, c, b)] += q * s;
                }
            }
        }
        r
    }

    fn apply_at(&self, lam: &[f64]) -> Fields {
        let (tt, cc, n) = (self.p.t_steps, self.p.cells, self.n);
        let mut out = self.zeros();
        for t in 0..tt {
            for c in 0..cc {
                for i in 0..n {
                    let l = lam[self.ri(t, c, i)];
                    out.rho[self.ri(t + 1, c, i)] += l / self.dt;
                    out.rho[self.ri(t, c, i)] -= l / self.dt;
                    out.m[self.mi(t, c + 1, i)] += l / self.p.dx;
                    out.m[self.mi(t, c, i)] -= l / self.p.dx;
                }
                for (e, &(a, b, q)) in self.edges.iter().enumerate() {
                    out.s[self.si(t, c, e)] += q * (lam[self.ri(t, c, b)] - lam[self.ri(t, c, a)]);
                }
            }
        }
        out
    }

    /// Applies `(A_free A_freeᵀ)^†` by diagonalizing along each axis.
    fn solve_normal(&self, r: &[f64]) -> Vec<f64> {
        let (tt, cc, n) = (self.p.t_steps, self.p.cells, self.n);
        let mut a = r.to_vec();
        self.transform(&mut a, false);
        for (v, w) in a.iter_mut().zip(&self.eig) {
            *v *= w;
        }
        self.transform(&mut a, true);
        debug_assert_eq!(a.len(), tt * cc * n);
        a
    }

    fn transform(&self, a: &mut [f64], inverse: bool) {
        let (tt, cc, n) = (self.p.t_steps, self.p.cells, self.n);
        let apply = |m: &DMatrix<f64>, v: &[f64], out: &mut [f64]| {
            let dim = v.len();
            for k in 0..dim {
                let mut acc = 0.0;
                for j in 0..dim {
                    let coef = if inverse { m[(j, k)] } else { m[(k, j)] };
                    acc += coef * v[j];
                }
                out[k] = acc;
            }
        };
        let mut buf_in = vec![0.0; tt.max(cc).max(n)];
        let mut buf_out = buf_in.clone();
        // time axis
        for c in 0..cc {
            for i in 0..n {
                for t in 0..tt {
                    buf_in[t] = a[(t * cc + c) * n + i];
                }
                apply(&self.ut, &buf_in[..tt], &mut buf_out[..tt]);
                for t in 0..tt {
                    a[(t * cc + c) * n + i] = buf_out[t];
                }
            }
        }
        if self.p.transport && cc > 1 {
            for t in 0..tt {
                for i in 0..n {
                    for c in 0..cc {
                        buf_in[c] = a[(t * cc + c) * n + i];
                    }
                    apply(&self.uc, &buf_in[..cc], &mut buf_out[..cc]);
                    for c in 0..cc {
                        a[(t * cc + c) * n + i] = buf_out[c];
                    }
                }
            }
        }
        // graph axis: eigenvector matrix V, forward is Vᵀ
        let vt = self.vg.transpose();
        for t in 0..tt {
            for c in 0..cc {
                let base = (t * cc + c) * n;
                buf_in[..n].copy_from_slice(&a[base..base + n]);
                apply(&vt, &buf_in[..n], &mut buf_out[..n]);
                a[base..base + n].copy_from_slice(&buf_out[..n]);
            }
        }
    }

    fn set_fixed(&self, x: &mut Fields, homogeneous: bool) {
        let (tt, cc, n) = (self.p.t_steps, self.p.cells, self.n);
        for c in 0..cc {
            for i in 0..n {
                let (a, b) = (self.ri(0, c, i), self.ri(tt, c, i));
                if homogeneous {
                    x.rho[a] = 0.0;
                    x.rho[b] = 0.0;
                } else {
                    x.rho[a] = self.p.rho0[c * n + i];
                    x.rho[b] = self.p.rho1[c * n + i];
                }
            }
        }
        for t in 0..tt {
            for i in 0..n {
                let (a, b) = (self.mi(t, 0, i), self.mi(t, cc, i));
                x.m[a] = 0.0;
                x.m[b] = 0.0;
            }
            if !self.p.transport {
                for f in 0..=cc {
                    for i in 0..n {
                        let k = self.mi(t, f, i);
                        x.m[k] = 0.0;
                    }
                }
            }
        }
    }

    /// Orthogonal projection onto the continuity set (or its tangent space when
    /// `homogeneous`), acting on free coordinates only.
    pub fn project(&self, x: &mut Fields, homogeneous: bool) {
        self.set_fixed(x, homogeneous);
        let r = self.apply_a(x);
        let lam = self.solve_normal(&r);
        let corr = self.apply_at(&lam);
        x.axpy(-1.0, &corr);
        self.set_fixed(x, homogeneous);
    }

    fn k(&self, x: &Fields) -> Dual {
        let (tt, cc, n) = (self.p.t_steps, self.p.cells, self.n);
        let tr_len = if self.p.transport { tt * cc * n } else { 0 };
        let mut tr = Vec::with_capacity(tr_len);
        let mut ed = Vec::with_capacity(tt * cc * self.e());
        for t in 0..tt {
            for c in 0..cc {
                let rb = |i: usize| 0.5 * (x.rho[self.ri(t, c, i)] + x.rho[self.ri(t + 1, c, i)]);
                if self.p.transport {
                    for i in 0..n {
                        let mb = 0.5 * (x.m[self.mi(t, c, i)] + x.m[self.mi(t, c + 1, i)]);
                        tr.push([mb, rb(i)]);
                    }
                }
                for (e, &(a, b, _)) in self.edges.iter().enumerate() {
                    ed.push([x.s[self.si(t, c, e)], rb(a), rb(b)]);
                }
            }
        }
        let interior = self.ri(1, 0, 0)..self.ri(tt, 0, 0);
        let pos = x.rho[interior].to_vec();
        Dual { tr, ed, pos }
    }

    fn kt(&self, y: &Dual) -> Fields {
        let (tt, cc, n) = (self.p.t_steps, self.p.cells, self.n);
        let mut out = self.zeros();
        let mut ti = 0;
        let mut ei = 0;
        for t in 0..tt {
            for c in 0..cc {
                if self.p.transport {
                    for i in 0..n {
                        let [ym, yr] = y.tr[ti];
                        ti += 1;
                        out.m[self.mi(t, c, i)] += 0.5 * ym;
                        out.m[self.mi(t, c + 1, i)] += 0.5 * ym;
                        out.rho[self.ri(t, c, i)] += 0.5 * yr;
                        out.rho[self.ri(t + 1, c, i)] += 0.5 * yr;
                    }
                }
                for (e, &(a, b, _)) in self.edges.iter().enumerate() {
                    let [ys, ya, yb] = y.ed[ei];
                    ei += 1;
                    out.s[self.si(t, c, e)] += ys;
                    out.rho[self.ri(t, c, a)] += 0.5 * ya;
                    out.rho[self.ri(t + 1, c, a)] += 0.5 * ya;
                    out.rho[self.ri(t, c, b)] += 0.5 * yb;
                    out.rho[self.ri(t + 1, c, b)] += 0.5 * yb;
                }
            }
        }
        let start = self.ri(1, 0, 0);
        for (k, v) in y.pos.iter().enumerate() {
            out.rho[start + k] += v;
        }
        out
    }

    fn operator_norm(&self) -> f64 {
        let mut x = self.zeros();
        for (k, v) in x.rho.iter_mut().chain(x.m.iter_mut()).chain(x.s.iter_mut()).enumerate() {
            *v = 1.0 + ((k * 7919) % 13) as f64 / 13.0;
        }
        let mut est = 0.0;
        for _ in 0..60 {
            let nrm = x.norm2().sqrt();
            if nrm == 0.0 {
                return 1.0;
            }
            let scale = 1.0 / nrm;
            x.rho.iter_mut().chain(x.m.iter_mut()).chain(x.s.iter_mut()).for_each(|v| *v *= scale);
            let y = self.kt(&self.k(&x));
            est = y.norm2().sqrt();
            x = y;
        }
        est.sqrt().max(1e-12)
    }

    /// `prox_{σF*}(v) = v − σ prox_{F/σ}(v/σ)`, applied block by block.
    fn dual_prox(&self, v: &mut Dual, sigma: f64) -> usize {
        let step = 1.0 / sigma;
        for b in v.tr.iter_mut() {
            let (pm, pr) = prox_perspective_scalar(b[0] / sigma, b[1] / sigma, step);
            b[0] -= sigma * pm;
            b[1] -= sigma * pr;
        }
        let e = self.e();
        let mut failures = 0;
        for (k, b) in v.ed.iter_mut().enumerate() {
            let q = self.edges[k % e].2;
            let out = prox_graph_term(b[0] / sigma, b[1] / sigma, b[2] / sigma, step * q, self.p.f);
            if out.newton_failed {
                failures += 1;
            }
            b[0] -= sigma * out.sigma;
            b[1] -= sigma * out.rho_i;
            b[2] -= sigma * out.rho_j;
        }
        v.pos.iter_mut().for_each(|b| *b = b.min(0.0));
        failures
    }

    /// Linear interpolation between the endpoints, projected onto the constraints.
    fn initial(&self) -> Fields {
        let (tt, cc, n) = (self.p.t_steps, self.p.cells, self.n);
        let mut x = self.zeros();
        for t in 0..=tt {
            let w = t as f64 / tt as f64;
            for c in 0..cc {
                for i in 0..n {
                    let k = c * n + i;
                    x.rho[self.ri(t, c, i)] = (1.0 - w) * self.p.rho0[k] + w * self.p.rho1[k];
                }
            }
        }
        self.project(&mut x, false);
        x
    }

    pub fn solve(&self, cfg: &SolverConfig) -> (Fields, Convergence) {
        let norm = self.operator_norm();
        let base = 0.95 / norm;
        let mut tau = cfg.tau.unwrap_or(base * INITIAL_RATIO);
        let mut sigma = cfg.sigma.unwrap_or(base / INITIAL_RATIO);
        let adaptive = cfg.tau.is_none() && cfg.sigma.is_none();
        let mut adapt = 0.5;
        let mut x = self.initial();
        let mut x_bar = x.clone();
        let mut y = self.k(&x);
        y.values_mut().for_each(|v| *v = 0.0);
        let mut conv = Convergence::default();
        let mut best = (f64::INFINITY, x.clone(), conv);
        let check = cfg.check_every.max(1);
        for it in 1..=cfg.max_iter {
            let y_old = y.clone();
            let kx = self.k(&x_bar);
            y.combine(&kx, |b, kb| b + sigma * kb);
            conv.newton_failures += self.dual_prox(&mut y, sigma);
            let x_old = x.clone();
            let kty = self.kt(&y);
            x.axpy(-tau, &kty);
            self.project(&mut x, false);
            let x_bar_used = std::mem::replace(&mut x_bar, x.clone());
            x_bar.axpy(1.0, &x);
            x_bar.axpy(-1.0, &x_old);

            if it % check == 0 || it == cfg.max_iter {
                // primal: ((x_old − x)/τ − Kᵀ(y_old − y)) restricted to the tangent space
                let mut dy = y_old.clone();
                dy.combine(&y, |a, b| a - b);
                let mut pr = x_old.clone();
                pr.axpy(-1.0, &x);
                pr.rho.iter_mut().chain(pr.m.iter_mut()).chain(pr.s.iter_mut()).for_each(|v| *v /= tau);
                pr.axpy(-1.0, &self.kt(&dy));
                self.project(&mut pr, true);
                let primal = (pr.norm2() / pr.len() as f64).sqrt();

                let mut dx = x_bar_used;
                dx.axpy(-1.0, &x);
                let kdx = self.k(&dx);
                let mut dr = dy;
                dr.combine(&kdx, |a, b| a / sigma - b);
                let dual = (dr.norm2() / dr.len().max(1) as f64).sqrt();
                conv.iterations = it;
                conv.primal_residual = primal;
                conv.dual_residual = dual;
                if adaptive {
                    // residual balancing keeps τσ fixed
                    if primal > BALANCE * dual {
                        tau /= 1.0 - adapt;
                        sigma *= 1.0 - adapt;
                        adapt *= 0.95;
                    } else if dual > BALANCE * primal {
                        tau *= 1.0 - adapt;
                        sigma /= 1.0 - adapt;
                        adapt *= 0.95;
                    }
                }
                let score = primal.max(dual);
                if score < best.0 {
                    best = (score, x.clone(), conv);
                }
                if score <= cfg.tol {
                    conv.converged = true;
                    return (x, conv);
                }
            }
        }
        let (_, xb, mut cb) = best;
        cb.newton_failures = conv.newton_failures;
        (xb, cb)
    }

    /// Makes an iterate admissible: densities become nonnegative, momenta vanish
    /// wherever the density they move does, and a weighted least-squares
    /// correction of the momenta restores continuity up to the mass the clamp
    /// created.
    pub fn clean(&self, x: &mut Fields) {
        self.clamp(x);
        self.repair(x);
    }

    fn clamp(&self, x: &mut Fields) {
        let (tt, cc, n) = (self.p.t_steps, self.p.cells, self.n);
        x.rho.iter_mut().for_each(|v| *v = v.max(0.0));
        for t in 0..tt {
            for c in 0..cc {
                let rb = |x: &Fields, i: usize| 0.5 * (x.rho[self.ri(t, c, i)] + x.rho[self.ri(t + 1, c, i)]);
                for i in 0..n {
                    if rb(x, i) <= 0.0 {
                        let (a, b) = (self.mi(t, c, i), self.mi(t, c + 1, i));
                        x.m[a] = 0.0;
                        x.m[b] = 0.0;
                    }
                }
                for (e, &(a, b, _)) in self.edges.iter().enumerate() {
                    if self.p.f.value(rb(x, a), rb(x, b)) <= 0.0 {
                        let k = self.si(t, c, e);
                        x.s[k] = 0.0;
                    }
                }
            }
        }
    }

    /// Weights of the correction `δ = W Aᵀλ`. Densities stay fixed; face and
    /// edge momenta move in proportion to the mass they carry, so vacuum stays
    /// momentum-free.
    fn repair_weights(&self, x: &Fields) -> Fields {
        let (tt, cc, n) = (self.p.t_steps, self.p.cells, self.n);
        let mut w = self.zeros();
        for t in 0..tt {
            let rb = |c: usize, i: usize| 0.5 * (x.rho[self.ri(t, c, i)] + x.rho[self.ri(t + 1, c, i)]);
            if self.p.transport {
                for f in 1..cc {
                    for i in 0..n {
                        let (l, r) = (rb(f - 1, i), rb(f, i));
                        if l > 0.0 && r > 0.0 {
                            w.m[self.mi(t, f, i)] = 2.0 * l * r / (l + r);
                        }
                    }
                }
            }
            for c in 0..cc {
                for (e, &(a, b, q)) in self.edges.iter().enumerate() {
                    w.s[self.si(t, c, e)] = self.p.f.value(rb(c, a), rb(c, b)).max(0.0) / q;
                }
            }
        }
        w
    }

    /// One weighted projection onto the continuity constraint, solved as
    /// `A W Aᵀ λ = −A x` by Jacobi-preconditioned conjugate gradients after
    /// removing the part of the residual no admissible correction can reach.
    fn repair(&self, x: &mut Fields) {
        let (tt, cc, n) = (self.p.t_steps, self.p.cells, self.n);
        let size = cc * n;
        let nodes = tt * size;
        let w = self.repair_weights(x);
        let mut r: Vec<f64> = self.apply_a(x).iter().map(|v| -v).collect();

        let mut parent: Vec<usize> = (0..nodes).collect();
        fn find(p: &mut [usize], mut k: usize) -> usize {
            while p[k] != k {
                p[k] = p[p[k]];
                k = p[k];
            }
            k
        }
        let mut join = |a: usize, b: usize| {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        };
        let mut diag = vec![0.0; nodes];
        let (dt2, dx2) = (self.dt * self.dt, self.p.dx * self.p.dx);
        for t in 0..tt {
            for c in 0..cc {
                for i in 0..n {
                    let k = self.ri(t, c, i);
                    let up = w.rho[self.ri(t + 1, c, i)];
                    diag[k] += (w.rho[k] + up) / dt2;
                    if t + 1 < tt && up > 0.0 {
                        join(k, self.ri(t + 1, c, i));
                    }
                    if c > 0 {
                        let wf = w.m[self.mi(t, c, i)];
                        if wf > 0.0 {
                            diag[k] += wf / dx2;
                            diag[self.ri(t, c - 1, i)] += wf / dx2;
                            join(k, self.ri(t, c - 1, i));
                        }
                    }
                }
                for (e, &(a, b, q)) in self.edges.iter().enumerate() {
                    let we = w.s[self.si(t, c, e)];
                    if we > 0.0 {
                        let (ka, kb) = (self.ri(t, c, a), self.ri(t, c, b));
                        diag[ka] += we * q * q;
                        diag[kb] += we * q * q;
                        join(ka, kb);
                    }
                }
            }
        }
        let roots: Vec<usize> = (0..nodes).map(|k| find(&mut parent, k)).collect();
        let mut sum = vec![0.0; nodes];
        let mut count = vec![0usize; nodes];
        for k in 0..nodes {
            sum[roots[k]] += r[k];
            count[roots[k]] += 1;
        }
        for k in 0..nodes {
            r[k] = if diag[k] > 0.0 { r[k] - sum[roots[k]] / count[roots[k]] as f64 } else { 0.0 };
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm == 0.0 {
            return;
        }

        let op = |lam: &[f64]| -> Vec<f64> {
            let mut d = self.apply_at(lam);
            d.rho.iter_mut().zip(&w.rho).for_each(|(v, w)| *v *= w);
            d.m.iter_mut().zip(&w.m).for_each(|(v, w)| *v *= w);
            d.s.iter_mut().zip(&w.s).for_each(|(v, w)| *v *= w);
            self.apply_a(&d)
        };
        let precond = |v: &[f64]| -> Vec<f64> {
            v.iter().zip(&diag).map(|(a, &d)| if d > 0.0 { a / d } else { 0.0 }).collect()
        };
        let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(u, v)| u * v).sum() };
        let mut lam = vec![0.0; nodes];
        let mut best = (rnorm, lam.clone());
        let mut res = r;
        let mut z = precond(&res);
        let mut p = z.clone();
        let mut rz = dot(&res, &z);
        for _ in 0..REPAIR_MAX_ITER {
            let ap = op(&p);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let step = rz / pap;
            lam.iter_mut().zip(&p).for_each(|(l, v)| *l += step * v);
            res.iter_mut().zip(&ap).for_each(|(v, a)| *v -= step * a);
            let now = dot(&res, &res).sqrt();
            if now < best.0 {
                best = (now, lam.clone());
            }
            if now <= REPAIR_TOL * rnorm {
                break;
            }
            z = precond(&res);
            let rz_new = dot(&res, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.iter_mut().zip(&z).for_each(|(pv, zv)| *pv = zv + beta * *pv);
        }
        let mut d = self.apply_at(&best.1);
        d.rho.iter_mut().zip(&w.rho).for_each(|(v, w)| *v *= w);
        d.m.iter_mut().zip(&w.m).for_each(|(v, w)| *v *= w);
        d.s.iter_mut().zip(&w.s).for_each(|(v, w)| *v *= w);
        let mut y = x.clone();
        y.axpy(1.0, &d);
        let worst = |f: &Fields| self.apply_a(f).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if worst(&y) < worst(x) {
            *x = y;
        }
    }

    /// `Σ_t Δt Σ_c [Σ_i m̄²/ρ̄ + Σ_e q_e s²/θ(ρ̄_a, ρ̄_b)]`.
    pub fn action(&self, x: &Fields) -> f64 {
        let (tt, cc, n) = (self.p.t_steps, self.p.cells, self.n);
        let arith = Interpolation::Arithmetic;
        let mut total = 0.0;
        for t in 0..tt {
            for c in 0..cc {
                let rb = |i: usize| 0.5 * (x.rho[self.ri(t, c, i)] + x.rho[self.ri(t + 1, c, i)]);
                for i in 0..n {
                    let mb = 0.5 * (x.m[self.mi(t, c, i)] + x.m[self.mi(t, c + 1, i)]);
                    total += alpha(&[mb], rb(i), rb(i), &arith);
                }
                for (e, &(a, b, q)) in self.edges.iter().enumerate() {
                    total += q * alpha(&[x.s[self.si(t, c, e)]], rb(a), rb(b), self.p.f);
                }
            }
        }
        total * self.dt
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }
}
