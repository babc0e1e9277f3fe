//! Measures on `ℝᵈ × Δⁿ⁻¹`: canonical lifts, the projection back to
//! vector-valued measures, and the linearized (LOT) embedding.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_wasserstein::SimplexPoint;
use crate::lp::LinearProgram;
use crate::measure::{Atom, DiscreteVectorMeasure, MASS_TOL};

/// Mass below which a transport plan entry counts as empty.
const PLAN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedAtom {
    pub x: Vec<f64>,
    pub r: SimplexPoint,
    pub mass: f64,
}

/// A probability measure with finitely many atoms on `ℝᵈ × Δⁿ⁻¹`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedMeasure {
    pub atoms: Vec<LiftedAtom>,
}

impl LiftedMeasure {
    /// Checks shapes, nonnegative masses and unit total mass.
    pub fn new(atoms: Vec<LiftedAtom>) -> Result<Self> {
        let first = atoms.first().ok_or_else(|| Error::Domain("lifted measure has no atoms".into()))?;
        let (d, n) = (first.x.len(), first.r.n());
        for a in &atoms {
            crate::error::ensure_len(d, a.x.len())?;
            crate::error::ensure_len(n, a.r.n())?;
            if !(a.mass >= 0.0) || !a.mass.is_finite() {
                return Err(Error::Domain(format!("invalid atom mass {}", a.mass)));
            }
        }
        let sum: f64 = atoms.iter().map(|a| a.mass).sum();
        if (sum - 1.0).abs() > MASS_TOL * (1 + atoms.len()) as f64 {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { atoms })
    }

    pub fn n(&self) -> usize {
        self.atoms[0].r.n()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].x.len()
    }

    /// `∫ |x|² dλ`, the spatial second moment.
    pub fn spatial_second_moment(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass * a.x.iter().map(|v| v * v).sum::<f64>()).sum()
    }
}

/// `λ_μ = Σⱼ μⱼ ⊗ δ_{e_j}`: each species sits at its own corner.
pub fn canonical_lift(mu: &DiscreteVectorMeasure) -> LiftedMeasure {
    let n = mu.n_species();
    let atoms = mu
        .atoms()
        .iter()
        .flat_map(|a| {
            a.w.iter().enumerate().filter(|(_, &w)| w > 0.0).map(move |(j, &w)| LiftedAtom {
                x: a.x.clone(),
                r: SimplexPoint::corner(n, j),
                mass: w,
            })
        })
        .collect();
    LiftedMeasure { atoms }
}

/// `𝔓λ`: species `j` at `x` receives `Σ mass · p_j(r)` over the atoms at `x`.
pub fn project(lam: &LiftedMeasure) -> Result<DiscreteVectorMeasure> {
    DiscreteVectorMeasure::new(
        lam.atoms
            .iter()
            .map(|a| Atom::new(a.x.clone(), a.r.probabilities().iter().map(|p| a.mass * p).collect()))
            .collect(),
    )
}

/// Identifies a reference measure; embeddings are comparable only under equal ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceId {
    pub seed: u64,
    pub atoms: usize,
    pub n: usize,
    pub d: usize,
}

/// `N` equal-mass atoms, uniform on the unit ball times uniform on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMeasure {
    pub id: ReferenceId,
    pub lifted: LiftedMeasure,
}

/// Samples a reference measure deterministically from `seed`.
pub fn sample_reference(atoms: usize, n: usize, d: usize, seed: u64) -> Result<ReferenceMeasure> {
    if atoms == 0 || n < 2 || d == 0 {
        return Err(Error::Domain(format!("need N ≥ 1, n ≥ 2, d ≥ 1; got N = {atoms}, n = {n}, d = {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mass = 1.0 / atoms as f64;
    let mut out = Vec::with_capacity(atoms);
    for _ in 0..atoms {
        let x = loop {
            let g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                let radius = rng.random::<f64>().powf(1.0 / d as f64);
                break g.into_iter().map(|v| v / norm * radius).collect::<Vec<f64>>();
            }
        };
        let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = e.iter().sum();
        let p: Vec<f64> = e.iter().map(|v| v / total).collect();
        out.push(LiftedAtom { x, r: SimplexPoint::from_distribution(&p)?, mass });
    }
    Ok(ReferenceMeasure {
        id: ReferenceId { seed, atoms, n, d },
        lifted: LiftedMeasure { atoms: out },
    })
}

/// Cost on the simplex factor used when embedding.
#[derive(Debug, Clone, Copy)]
pub enum SimplexCost<'a> {
    /// Euclidean distance between coordinates in `ℝⁿ⁻¹`.
    Euclidean,
    /// The graph distance, tabulated as `table[k][j]` between reference atom `k`
    /// and corner `e_j`.
    Table(&'a DMatrix<f64>),
}

/// Optimal plan from the reference to a canonical lift, summarized by its
/// barycentric projection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LotEmbedding {
    pub reference: ReferenceId,
    /// Barycentric image `T(x, r)` of each reference atom: `(x, r)` coordinates.
    pub values: Vec<(Vec<f64>, Vec<f64>)>,
    /// Canonical lift of the embedded measure.
    pub targets: LiftedMeasure,
    /// Plan rows: `(target atom, mass)` for each reference atom.
    pub plan: Vec<Vec<(usize, f64)>>,
    /// Some reference atom splits its mass across several targets.
    pub non_injective: bool,
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Solves the transport problem from `reference` to the canonical lift of `mu`
/// with cost `|x − x'|² + c(r, r')²` and returns its barycentric projection.
pub fn lot_embed(reference: &ReferenceMeasure, mu: &DiscreteVectorMeasure, cost: SimplexCost) -> Result<LotEmbedding> {
    let refs = &reference.lifted.atoms;
    if mu.n_species() != reference.id.n || mu.dim() != reference.id.d {
        return Err(Error::ReferenceMismatch);
    }
    let targets = canonical_lift(mu);
    let n = mu.n_species();
    let corner_of = |t: &LiftedAtom| {
        let p = t.r.probabilities();
        p.iter().position(|&v| v == 1.0).unwrap_or(n - 1)
    };
    let (kr, kt) = (refs.len(), targets.atoms.len());
    if let SimplexCost::Table(table) = cost {
        if table.nrows() != kr || table.ncols() != n {
            return Err(Error::LengthMismatch { expected: kr * n, got: table.nrows() * table.ncols() });
        }
    }
    let mut rhs: Vec<f64> = refs.iter().map(|a| a.mass).collect();
    rhs.extend(targets.atoms.iter().map(|t| t.mass));
    let mut lp = LinearProgram::new(rhs);
    for (k, a) in refs.iter().enumerate() {
        for (t, b) in targets.atoms.iter().enumerate() {
            let c = match cost {
                SimplexCost::Euclidean => sq(a.r.coords(), b.r.coords()),
                SimplexCost::Table(table) => table[(k, corner_of(b))].powi(2),
            };
            lp.add_column(sq(&a.x, &b.x) + c, vec![(k, 1.0), (kr + t, 1.0)]);
        }
    }
    let sol = lp.solve()?;
    let mut plan = vec![Vec::new(); kr];
    for (col, &v) in sol.x.iter().enumerate() {
        if v > PLAN_EPS {
            plan[col / kt].push((col % kt, v));
        }
    }
    let non_injective = plan.iter().any(|row| row.len() > 1);
    let dim_r = n - 1;
    let values = plan
        .iter()
        .map(|row| {
            let total: f64 = row.iter().map(|e| e.1).sum();
            let mut x = vec![0.0; mu.dim()];
            let mut r = vec![0.0; dim_r];
            for &(t, m) in row {
                let b = &targets.atoms[t];
                x.iter_mut().zip(&b.x).for_each(|(o, v)| *o += m / total * v);
                r.iter_mut().zip(b.r.coords()).for_each(|(o, v)| *o += m / total * v);
            }
            (x, clip_to_simplex(r))
        })
        .collect();
    Ok(LotEmbedding { reference: reference.id, values, targets, plan, non_injective })
}

/// Removes rounding excursions outside the simplex.
fn clip_to_simplex(mut r: Vec<f64>) -> Vec<f64> {
    r.iter_mut().for_each(|v| *v = v.max(0.0));
    let s: f64 = r.iter().sum();
    if s > 1.0 {
        r.iter_mut().for_each(|v| *v /= s);
    }
    r
}

fn check_pair(e1: &LotEmbedding, e2: &LotEmbedding, reference: &ReferenceMeasure) -> Result<()> {
    if e1.reference != reference.id || e2.reference != reference.id {
        return Err(Error::ReferenceMismatch);
    }
    Ok(())
}

/// `(∫ |T₁ − T₂|² dλ_ref)^{1/2}` in the Euclidean coordinates of `ℝᵈ × ℝⁿ⁻¹`.
pub fn d_lot(e1: &LotEmbedding, e2: &LotEmbedding, reference: &ReferenceMeasure) -> Result<f64> {
    check_pair(e1, e2, reference)?;
    let total: f64 = reference
        .lifted
        .atoms
        .iter()
        .zip(e1.values.iter().zip(&e2.values))
        .map(|(a, ((x1, r1), (x2, r2)))| a.mass * (sq(x1, x2) + sq(r1, r2)))
        .sum();
    Ok(total.sqrt())
}

/// The ground-metric variant `d̃`: both plans are glued through the reference,
/// giving a coupling of the two canonical lifts, and its cost under
/// `|x − y|² + d_W(i, j)²` is returned. When neither plan splits mass this is
/// `(∫ d(T₁, T₂)² dλ_ref)^{1/2}`; in every case it bounds `W_{2,𝒲}` from above.
pub fn d_lot_ground(
    e1: &LotEmbedding,
    e2: &LotEmbedding,
    reference: &ReferenceMeasure,
    d_w: &DMatrix<f64>,
) -> Result<f64> {
    check_pair(e1, e2, reference)?;
    let corner = |t: &LiftedAtom| {
        let p = t.r.probabilities();
        p.iter().position(|&v| v == 1.0).unwrap_or(p.len() - 1)
    };
    let mut total = 0.0;
    for (k, a) in reference.lifted.atoms.iter().enumerate() {
        if a.mass == 0.0 {
            continue;
        }
        for &(s, m1) in &e1.plan[k] {
            for &(t, m2) in &e2.plan[k] {
                let (u, v) = (&e1.targets.atoms[s], &e2.targets.atoms[t]);
                total += m1 * m2 / a.mass * (sq(&u.x, &v.x) + d_w[(corner(u), corner(v))].powi(2));
            }
        }
    }
    Ok(total.sqrt())
}

/// Embeds each measure once and fills the symmetric `d_LOT` matrix.
pub fn pairwise_matrix(
    reference: &ReferenceMeasure,
    dataset: &[DiscreteVectorMeasure],
    cost: SimplexCost,
) -> Result<(DMatrix<f64>, Vec<LotEmbedding>)> {
    let emb = dataset.iter().map(|m| lot_embed(reference, m, cost)).collect::<Result<Vec<_>>>()?;
    let k = emb.len();
    let mut out = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i + 1..k {
            let v = d_lot(&emb[i], &emb[j], reference)?;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok((out, emb))
}

/// Rows `atom, x_0…, r_0…, Tx_0…, Tr_0…`: each reference atom next to its image.
pub fn write_embedding_csv(w: impl Write, e: &LotEmbedding, reference: &ReferenceMeasure) -> Result<()> {
    check_pair(e, e, reference)?;
    let (d, k) = (reference.id.d, reference.id.n - 1);
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["atom".to_string()];
    for (prefix, len) in [("x", d), ("r", k), ("Tx", d), ("Tr", k)] {
        header.extend((0..len).map(|i| format!("{prefix}_{i}")));
    }
    out.write_record(&header)?;
    for (j, (a, (tx, tr))) in reference.lifted.atoms.iter().zip(&e.values).enumerate() {
        let mut row = vec![j.to_string()];
        row.extend(a.x.iter().chain(a.r.coords()).chain(tx).chain(tr).map(f64::to_string));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// A square matrix as headerless CSV, one row per line.
pub fn write_matrix_csv(w: impl Write, m: &DMatrix<f64>) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in m.row_iter() {
        out.write_record(row.iter().map(f64::to_string))?;
    }
    out.flush()?;
    Ok(())
}
