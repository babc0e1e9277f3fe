//! Transport-then-mutate competitor between `[½δ₋ₐ, ½δₐ]` and `[bδ₀, (1−b)δ₀]`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Interpolation;
use crate::graph_wasserstein::wg_two_node;

/// A piecewise path: on `[0, t0]` the two atoms slide to the origin at constant
/// speed; on `[t0, 1]` the species split at the origin follows the two-node
/// geodesic from `½` to `b`.
#[derive(Debug, Clone, Serialize)]
pub struct CandidatePath {
    pub t0: f64,
    pub times: Vec<f64>,
    /// Position of the first-species atom (starts at `−a`).
    pub x1: Vec<f64>,
    /// Position of the second-species atom (starts at `a`).
    pub x2: Vec<f64>,
    /// First-species mass.
    pub r: Vec<f64>,
    /// Instantaneous kinetic energy at each time.
    pub lagrangian: Vec<f64>,
    pub action: f64,
}

/// Splitting time minimizing `a²/t0 + d²/(1−t0)`, kept inside the open interval.
pub fn optimal_split(a: f64, d: f64) -> f64 {
    if a + d == 0.0 {
        return 0.5;
    }
    (a / (a + d)).clamp(1e-9, 1.0 - 1e-9)
}

/// Builds the candidate path on `t_steps` uniform steps with switching time `t0`.
pub fn two_node_candidate_path(
    f: &Interpolation,
    q: f64,
    a: f64,
    b: f64,
    t0: f64,
    t_steps: usize,
) -> Result<CandidatePath> {
    if !(t0 > 0.0 && t0 < 1.0) {
        return Err(Error::Domain(format!("switching time {t0} not in (0, 1)")));
    }
    if !(a >= 0.0) || !(0.0..=1.0).contains(&b) {
        return Err(Error::Domain(format!("need a ≥ 0 and b ∈ [0, 1], got a = {a}, b = {b}")));
    }
    let t_steps = t_steps.max(2);
    let d = wg_two_node(f, q, 0.5, b)?;
    let times: Vec<f64> = (0..=t_steps).map(|k| k as f64 / t_steps as f64).collect();
    let speed = d / (1.0 - t0);
    let mut x1 = Vec::with_capacity(times.len());
    let mut x2 = Vec::with_capacity(times.len());
    let mut r = Vec::with_capacity(times.len());
    let mut lagrangian = Vec::with_capacity(times.len());
    for &t in &times {
        if t < t0 {
            let s = 1.0 - t / t0;
            x1.push(-a * s);
            x2.push(a * s);
            r.push(0.5);
            // two half masses moving at speed a/t0
            lagrangian.push((a / t0).powi(2));
        } else {
            x1.push(0.0);
            x2.push(0.0);
            let tau = (t - t0) / (1.0 - t0);
            r.push(geodesic_point(f, q, b, tau)?);
            lagrangian.push(speed * speed);
        }
    }
    let action = a * a / t0 + d * d / (1.0 - t0);
    Ok(CandidatePath { t0, times, x1, x2, r, lagrangian, action })
}

fn geodesic_point(f: &Interpolation, q: f64, b: f64, tau: f64) -> Result<f64> {
    if tau <= 0.0 {
        return Ok(0.5);
    }
    if tau >= 1.0 {
        return Ok(b);
    }
    // arclength inversion along the segment from ½ to b
    let dist = wg_two_node(f, q, 0.5, b)?;
    let target = tau * dist;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if wg_two_node(f, q, 0.5, 0.5 + mid * (b - 0.5))? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 + 0.5 * (lo + hi) * (b - 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn action_formula_and_optimum() {
        let f = Interpolation::Geometric;
        let (a, b) = (0.1, 0.75);
        let d = wg_two_node(&f, 1.0, 0.5, b).unwrap();
        let p = two_node_candidate_path(&f, 1.0, a, b, 0.3, 20).unwrap();
        assert_abs_diff_eq!(p.action, a * a / 0.3 + d * d / 0.7, epsilon = 1e-14);
        let t = optimal_split(a, d);
        let best = two_node_candidate_path(&f, 1.0, a, b, t, 20).unwrap();
        assert_abs_diff_eq!(best.action, (a + d).powi(2), epsilon = 1e-12);
        assert!(best.action <= p.action);
        assert_abs_diff_eq!(*best.r.last().unwrap(), b, epsilon = 1e-12);
        assert_eq!(best.x1.last().copied(), Some(0.0));
    }

    #[test]
    fn rejects_bad_split() {
        let f = Interpolation::Arithmetic;
        assert!(two_node_candidate_path(&f, 1.0, 0.1, 0.75, 0.0, 10).is_err());
        assert!(two_node_candidate_path(&f, 1.0, 0.1, 0.75, 1.0, 10).is_err());
    }

    #[test]
    fn pure_mutation_limit() {
        let f = Interpolation::Arithmetic;
        let d = wg_two_node(&f, 1.0, 0.5, 0.75).unwrap();
        let p = two_node_candidate_path(&f, 1.0, 0.0, 0.75, optimal_split(0.0, d), 10).unwrap();
        assert_abs_diff_eq!(p.action, d * d, epsilon = 1e-8);
    }
}
