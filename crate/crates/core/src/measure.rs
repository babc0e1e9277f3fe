//! Finitely supported vector-valued measures on `ℝᵈ × {1, …, n}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a probability measure.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: Vec<f64>,
    /// Per-species masses at `x`.
    pub w: Vec<f64>,
}

impl Atom {
    pub fn new(x: Vec<f64>, w: Vec<f64>) -> Self {
        Self { x, w }
    }

    pub fn mass(&self) -> f64 {
        self.w.iter().sum()
    }
}

/// A probability measure `μ = [μ₁, …, μₙ]` with finitely many atoms.
///
/// Atoms at identical locations are merged on construction; atoms of zero
/// total mass are dropped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteVectorMeasure {
    atoms: Vec<Atom>,
    #[serde(skip)]
    n: usize,
    #[serde(skip)]
    d: usize,
}

#[derive(Deserialize)]
struct MeasureJson {
    atoms: Vec<Atom>,
}

impl DiscreteVectorMeasure {
    /// Builds a measure of total mass one.
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let m = Self::unnormalized(atoms)?;
        let sum = m.total_mass();
        if (sum - 1.0).abs() > MASS_TOL * (1 + m.atoms.len() * m.n) as f64 {
            return Err(Error::NotNormalized { sum });
        }
        Ok(m)
    }

    /// Builds a nonnegative measure without the unit-mass check.
    pub fn unnormalized(atoms: Vec<Atom>) -> Result<Self> {
        let first = atoms.first().ok_or_else(|| Error::Domain("measure has no atoms".into()))?;
        let (d, n) = (first.x.len(), first.w.len());
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            if a.x.len() != d {
                return Err(Error::LengthMismatch { expected: d, got: a.x.len() });
            }
            if a.w.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: a.w.len() });
            }
            if a.w.iter().any(|&v| v < 0.0 || !v.is_finite()) || a.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("atom weights must be finite and nonnegative".into()));
            }
            match merged.iter_mut().find(|b| b.x == a.x) {
                Some(b) => b.w.iter_mut().zip(&a.w).for_each(|(u, v)| *u += v),
                None => merged.push(a),
            }
        }
        merged.retain(|a| a.mass() > 0.0);
        if merged.is_empty() {
            return Err(Error::Domain("measure has zero mass".into()));
        }
        Ok(Self { atoms: merged, n, d })
    }

    /// Convenience constructor for measures on the real line.
    pub fn on_line(atoms: &[(f64, &[f64])]) -> Result<Self> {
        Self::new(atoms.iter().map(|(x, w)| Atom::new(vec![*x], w.to_vec())).collect())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn n_species(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(Atom::mass).sum()
    }

    /// `μᵢ(ℝᵈ)` for each species.
    pub fn species_masses(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for a in &self.atoms {
            out.iter_mut().zip(&a.w).for_each(|(o, w)| *o += w);
        }
        out
    }

    /// The aggregate measure `μ̄ = Σᵢ μᵢ` as `(x, mass)` pairs.
    pub fn aggregate(&self) -> Vec<(Vec<f64>, f64)> {
        self.atoms.iter().map(|a| (a.x.clone(), a.mass())).collect()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: MeasureJson = serde_json::from_str(s)?;
        Self::new(raw.atoms)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("measure serializes")
    }

    /// Whether both measures have the same atoms up to `tol` (order-insensitive).
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if self.n != other.n || self.atoms.len() != other.atoms.len() {
            return false;
        }
        self.atoms.iter().all(|a| {
            other.atoms.iter().any(|b| {
                a.x.iter().zip(&b.x).all(|(u, v)| (u - v).abs() <= tol)
                    && a.w.iter().zip(&b.w).all(|(u, v)| (u - v).abs() <= tol)
            })
        })
    }

    /// Smallest and largest coordinate along each axis.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        (0..self.d)
            .map(|k| {
                self.atoms.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| {
                    (lo.min(a.x[k]), hi.max(a.x[k]))
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_duplicates_and_drops_empty_atoms() {
        let m = DiscreteVectorMeasure::new(vec![
            Atom::new(vec![0.0], vec![0.25, 0.0]),
            Atom::new(vec![1.0], vec![0.0, 0.0]),
            Atom::new(vec![0.0], vec![0.25, 0.5]),
        ])
        .unwrap();
        assert_eq!(m.atoms().len(), 1);
        assert_eq!(m.atoms()[0].w, vec![0.5, 0.5]);
        assert_eq!(m.species_masses(), vec![0.5, 0.5]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            DiscreteVectorMeasure::new(vec![Atom::new(vec![0.0], vec![0.5])]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            DiscreteVectorMeasure::new(vec![Atom::new(vec![0.0], vec![0.5]), Atom::new(vec![1.0], vec![0.25, 0.25])]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(DiscreteVectorMeasure::new(vec![Atom::new(vec![0.0], vec![1.5, -0.5])]).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let s = r#"{"atoms": [{"x": [0.0], "w": [0.5, 0.0]}, {"x": [1.0], "w": [0.0, 0.5]}]}"#;
        let m = DiscreteVectorMeasure::from_json(s).unwrap();
        assert_eq!(DiscreteVectorMeasure::from_json(&m.to_json()).unwrap(), m);
        assert_eq!(m.bounding_box(), vec![(0.0, 1.0)]);
    }
}
