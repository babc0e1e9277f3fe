//! Pushing a lifted path on `ℝᵈ × Δ` down to vector-valued velocities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{alpha, graph_gradient, laplacian_pinv_apply, weighted_laplacian, Interpolation, WeightedGraph};
use crate::graph_wasserstein::{xi, SimplexPoint};

/// One atom of a lifted measure with its velocity `(w₁, w₂)`, where `w₁ ∈ ℝᵈ`
/// moves the location and `w₂ ∈ ℝⁿ⁻¹` moves the simplex coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedAtomVelocity {
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub mass: f64,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

/// A lifted measure with velocities at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedSnapshot {
    pub atoms: Vec<LiftedAtomVelocity>,
}

/// Vector-valued fields at one instant, grouped by spatial location.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectedSnapshot {
    pub locations: Vec<Vec<f64>>,
    /// `ρᵢ(x)` per location.
    pub rho: Vec<Vec<f64>>,
    /// `uᵢ(x) ∈ ℝᵈ` per location and species.
    pub u: Vec<Vec<Vec<f64>>>,
    /// `v_ij(x)` per location, row-major `n × n`.
    pub v: Vec<Vec<f64>>,
    pub action_before: f64,
    pub action_after: f64,
}

/// Projection of a whole lifted path; actions are averaged over snapshots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectedDynamics {
    pub snapshots: Vec<ProjectedSnapshot>,
    pub action_before: f64,
    pub action_after: f64,
}

/// Smallest admissible simplex coordinate of a lifted atom.
pub const INTERIOR_MARGIN: f64 = 1e-6;

/// Computes `ρ`, `u` and `v` from a lifted path together with the kinetic energy
/// before and after the projection; the second never exceeds the first.
pub fn project_lifted_dynamics(
    path: &[LiftedSnapshot],
    g: &WeightedGraph,
    f: &Interpolation,
) -> Result<ProjectedDynamics> {
    let snapshots = path.iter().map(|s| project_snapshot(s, g, f)).collect::<Result<Vec<_>>>()?;
    let k = snapshots.len().max(1) as f64;
    Ok(ProjectedDynamics {
        action_before: snapshots.iter().map(|s| s.action_before).sum::<f64>() / k,
        action_after: snapshots.iter().map(|s| s.action_after).sum::<f64>() / k,
        snapshots,
    })
}

fn project_snapshot(snap: &LiftedSnapshot, g: &WeightedGraph, f: &Interpolation) -> Result<ProjectedSnapshot> {
    let n = g.n();
    let mut locations: Vec<Vec<f64>> = Vec::new();
    let mut rho: Vec<Vec<f64>> = Vec::new();
    let mut mom: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut sig: Vec<Vec<f64>> = Vec::new();
    let mut before = 0.0;
    for (idx, a) in snap.atoms.iter().enumerate() {
        let point = SimplexPoint::new(a.r.clone())?;
        crate::error::ensure_len(n, point.n())?;
        crate::error::ensure_len(n - 1, a.w2.len())?;
        crate::error::ensure_len(a.x.len(), a.w1.len())?;
        if point.min_barycentric() < INTERIOR_MARGIN {
            return Err(Error::BoundaryAtom(idx));
        }
        if !(a.mass >= 0.0) {
            return Err(Error::Domain(format!("atom {idx} has negative mass")));
        }
        let p = point.probabilities();
        let pdot = xi(&a.w2);
        let psi = laplacian_pinv_apply(&weighted_laplacian(g, f, &p)?, &pdot)?;
        let grad = graph_gradient(g, &psi)?;
        let w1sq: f64 = a.w1.iter().map(|v| v * v).sum();
        let graph_energy: f64 = pdot.iter().zip(&psi).map(|(u, v)| u * v).sum();
        before += a.mass * (w1sq + graph_energy);

        let slot = match locations.iter().position(|x| *x == a.x) {
            Some(s) => s,
            None => {
                locations.push(a.x.clone());
                rho.push(vec![0.0; n]);
                mom.push(vec![vec![0.0; a.x.len()]; n]);
                sig.push(vec![0.0; n * n]);
                locations.len() - 1
            }
        };
        for i in 0..n {
            rho[slot][i] += a.mass * p[i];
            for (k, w) in a.w1.iter().enumerate() {
                mom[slot][i][k] += a.mass * p[i] * w;
            }
            for j in 0..n {
                if i != j && g.q(i, j) > 0.0 {
                    // v = −∇ψ so that ṗ = −∇·(θ v)
                    sig[slot][i * n + j] -= a.mass * f.value(p[i], p[j]) * grad[(i, j)];
                }
            }
        }
    }

    let mut after = 0.0;
    let mut u = Vec::with_capacity(locations.len());
    let mut v = Vec::with_capacity(locations.len());
    for slot in 0..locations.len() {
        let r = &rho[slot];
        let us: Vec<Vec<f64>> = (0..n)
            .map(|i| mom[slot][i].iter().map(|m| if r[i] > 0.0 { m / r[i] } else { 0.0 }).collect())
            .collect();
        for i in 0..n {
            after += alpha(&mom[slot][i], r[i], r[i], &Interpolation::Arithmetic);
        }
        let mut vs = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j && g.q(i, j) > 0.0 {
                    let s = sig[slot][i * n + j];
                    after += 0.5 * g.q(i, j) * alpha(&[s], r[i], r[j], f);
                    let th = f.value(r[i], r[j]);
                    vs[i * n + j] = if th > 0.0 { s / th } else { 0.0 };
                }
            }
        }
        u.push(us);
        v.push(vs);
    }
    Ok(ProjectedSnapshot {
        locations,
        rho,
        u,
        v,
        action_before: before,
        action_after: after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn atom(x: f64, r: f64, mass: f64, w1: f64, w2: f64) -> LiftedAtomVelocity {
        LiftedAtomVelocity { x: vec![x], r: vec![r], mass, w1: vec![w1], w2: vec![w2] }
    }

    #[test]
    fn single_atom_per_location_is_lossless() {
        let g = WeightedGraph::two_node(1.5).unwrap();
        let f = Interpolation::Logarithmic;
        let snap = LiftedSnapshot { atoms: vec![atom(0.0, 0.3, 0.4, 1.0, 0.2), atom(1.0, 0.6, 0.6, -0.5, -0.1)] };
        let p = project_lifted_dynamics(&[snap], &g, &f).unwrap();
        assert_abs_diff_eq!(p.action_before, p.action_after, epsilon = 1e-12);
    }

    #[test]
    fn merging_atoms_loses_energy() {
        let g = WeightedGraph::two_node(1.0).unwrap();
        let f = Interpolation::Geometric;
        let snap = LiftedSnapshot { atoms: vec![atom(0.0, 0.2, 0.5, 1.0, 0.3), atom(0.0, 0.7, 0.5, -1.0, -0.2)] };
        let p = project_lifted_dynamics(&[snap], &g, &f).unwrap();
        assert!(p.action_after <= p.action_before);
        assert!(p.action_after < p.action_before - 1e-3);
        assert_eq!(p.snapshots[0].locations.len(), 1);
    }

    #[test]
    fn two_node_energy_matches_metric() {
        // a single atom with ṙ = w has graph energy w²/(q θ)
        let g = WeightedGraph::two_node(2.0).unwrap();
        let f = Interpolation::Arithmetic;
        let snap = LiftedSnapshot { atoms: vec![atom(0.0, 0.25, 1.0, 0.0, 0.3)] };
        let p = project_lifted_dynamics(&[snap], &g, &f).unwrap();
        assert_abs_diff_eq!(p.action_before, 0.09 / (2.0 * 0.5), epsilon = 1e-12);
    }

    #[test]
    fn boundary_atom_rejected() {
        let g = WeightedGraph::two_node(1.0).unwrap();
        let snap = LiftedSnapshot { atoms: vec![atom(0.0, 0.5, 0.5, 0.0, 0.0), atom(1.0, 0.0, 0.5, 0.0, 0.0)] };
        assert_eq!(
            project_lifted_dynamics(&[snap], &g, &Interpolation::Geometric),
            Err(Error::BoundaryAtom(1))
        );
    }
}
