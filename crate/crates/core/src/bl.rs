//! The bounded-Lipschitz norm on signed discrete measures and the aggregate
//! metric `d_BL` on vector-valued measures.

use crate::error::{Error, Result};
use crate::lp::LinearProgram;
use crate::measure::DiscreteVectorMeasure;
use crate::optim::golden_max;

const GOLDEN_ITERS: usize = 60;

/// `‖μ‖_BL = sup ∫η dμ` over `η` with `(‖η‖²_∞ + Lip(η)²)^{1/2} ≤ 1`, for the
/// signed measure `Σ_k c_k δ_{x_k}`.
///
/// With `(‖η‖_∞, Lip η) = (cos φ, sin φ)` the inner problem is an LP in the
/// values of `η` at the support (McShane extension makes this exact); the
/// outer maximization over `φ ∈ [0, π/2]` is a golden-section search.
pub fn bl_norm_component(points: &[Vec<f64>], weights: &[f64]) -> Result<f64> {
    crate::error::ensure_len(points.len(), weights.len())?;
    if weights.iter().all(|&w| w == 0.0) {
        return Ok(0.0);
    }
    let dist = pairwise(points);
    let mut failure = None;
    let (_, best) = golden_max(
        |phi| match inner_value(&dist, weights, phi.cos().max(0.0), phi.sin().max(0.0)) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        0.0,
        std::f64::consts::FRAC_PI_2,
        GOLDEN_ITERS,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(best),
    }
}

/// Dense scan of the outer objective on `samples + 1` angles, used to validate
/// the unimodality the golden-section search relies on.
pub fn bl_norm_scan(points: &[Vec<f64>], weights: &[f64], samples: usize) -> Result<f64> {
    let dist = pairwise(points);
    let mut best: f64 = 0.0;
    for k in 0..=samples {
        let phi = std::f64::consts::FRAC_PI_2 * k as f64 / samples as f64;
        best = best.max(inner_value(&dist, weights, phi.cos().max(0.0), phi.sin().max(0.0))?);
    }
    Ok(best)
}

fn pairwise(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|a| {
            points
                .iter()
                .map(|b| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
                .collect()
        })
        .collect()
}

/// `max Σ c_k η_k` subject to `|η_k| ≤ s`, `η_k − η_l ≤ L |x_k − x_l|`.
fn inner_value(dist: &[Vec<f64>], c: &[f64], s: f64, lip: f64) -> Result<f64> {
    let k = c.len();
    // shift e = η + s ≥ 0; rows: e_k + slack = 2s, then e_k − e_l + slack = L d_kl
    let mut rhs = vec![2.0 * s; k];
    let mut pairs = Vec::new();
    for a in 0..k {
        for b in 0..k {
            if a != b {
                pairs.push((a, b));
                rhs.push(lip * dist[a][b]);
            }
        }
    }
    let mut lp = LinearProgram::new(rhs);
    for (a, &ca) in c.iter().enumerate() {
        let mut col = vec![(a, 1.0)];
        for (row, &(u, v)) in pairs.iter().enumerate() {
            if u == a {
                col.push((k + row, 1.0));
            } else if v == a {
                col.push((k + row, -1.0));
            }
        }
        lp.add_column(-ca, col);
    }
    for row in 0..k + pairs.len() {
        lp.add_column(0.0, vec![(row, 1.0)]);
    }
    let sol = lp.solve()?;
    let total: f64 = c.iter().sum();
    Ok(-sol.objective - s * total)
}

/// `‖μᵢ − νᵢ‖_BL` for each species, over the union of both supports.
pub fn bl_components(mu: &DiscreteVectorMeasure, nu: &DiscreteVectorMeasure) -> Result<Vec<f64>> {
    if mu.n_species() != nu.n_species() {
        return Err(Error::LengthMismatch { expected: mu.n_species(), got: nu.n_species() });
    }
    if mu.dim() != nu.dim() {
        return Err(Error::LengthMismatch { expected: mu.dim(), got: nu.dim() });
    }
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut w: Vec<Vec<f64>> = Vec::new();
    for (m, sign) in [(mu, 1.0), (nu, -1.0)] {
        for a in m.atoms() {
            let slot = match points.iter().position(|p| *p == a.x) {
                Some(s) => s,
                None => {
                    points.push(a.x.clone());
                    w.push(vec![0.0; m.n_species()]);
                    points.len() - 1
                }
            };
            w[slot].iter_mut().zip(&a.w).for_each(|(o, v)| *o += sign * v);
        }
    }
    (0..mu.n_species())
        .map(|i| {
            let c: Vec<f64> = w.iter().map(|row| row[i]).collect();
            bl_norm_component(&points, &c)
        })
        .collect()
}

/// `d_BL(μ, ν) = (Σᵢ ‖μᵢ − νᵢ‖²_BL)^{1/2}`.
pub fn d_bl(mu: &DiscreteVectorMeasure, nu: &DiscreteVectorMeasure) -> Result<f64> {
    Ok(bl_components(mu, nu)?.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Closed form `‖δ₀ − δ_a‖_BL = 2a/√(4 + a²)` on the line.
pub fn bl_two_dirac(a: f64) -> f64 {
    let a = a.abs();
    2.0 * a / (4.0 + a * a).sqrt()
}
