//! Dense-inverse revised simplex for `min cᵀx  s.t.  Ax = b, x ≥ 0` with sparse columns.
//!
//! Built for the small-row, many-column programs arising from discrete transport:
//! a dense `m × m` basis inverse, Dantzig pricing with a Bland fallback while
//! stalling on degenerate pivots, and periodic refactorization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 50;

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    rows: usize,
    rhs: Vec<f64>,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers `y` with `cⱼ − yᵀAⱼ ≥ 0` at optimality.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new(rhs: Vec<f64>) -> Self {
        Self {
            rows: rhs.len(),
            rhs,
            cols: Vec::new(),
            cost: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn num_columns(&self) -> usize {
        self.cols.len()
    }

    /// Adds a column with the given cost and `(row, coefficient)` entries; returns its index.
    pub fn add_column(&mut self, cost: f64, entries: Vec<(usize, f64)>) -> usize {
        debug_assert!(entries.iter().all(|&(r, _)| r < self.rows));
        self.cols.push(entries);
        self.cost.push(cost);
        self.cols.len() - 1
    }

    pub fn solve(&self) -> Result<LpSolution> {
        Simplex::new(self).run()
    }
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    sign: Vec<f64>,
    b: DVector<f64>,
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    xb: DVector<f64>,
    iterations: usize,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram) -> Self {
        let m = lp.rows;
        let sign: Vec<f64> = lp.rhs.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        let b = DVector::from_iterator(m, lp.rhs.iter().zip(&sign).map(|(v, s)| v * s));
        let n = lp.cols.len();
        Self {
            lp,
            sign,
            xb: b.clone(),
            b,
            basis: (n..n + m).collect(),
            binv: DMatrix::identity(m, m),
            iterations: 0,
        }
    }

    fn n_real(&self) -> usize {
        self.lp.cols.len()
    }

    /// Column `j` of the sign-normalized constraint matrix (artificials are unit vectors).
    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n_real() {
            self.lp.cols[j].iter().map(|&(r, v)| (r, v * self.sign[r])).collect()
        } else {
            vec![(j - self.n_real(), 1.0)]
        }
    }

    fn ftran(&self, j: usize) -> DVector<f64> {
        let m = self.lp.rows;
        let mut u = DVector::zeros(m);
        for (r, v) in self.column(j) {
            for i in 0..m {
                u[i] += self.binv[(i, r)] * v;
            }
        }
        u
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.lp.rows;
        let mut bm = DMatrix::zeros(m, m);
        for (k, &j) in self.basis.iter().enumerate() {
            for (r, v) in self.column(j) {
                bm[(r, k)] = v;
            }
        }
        self.binv = bm
            .try_inverse()
            .ok_or_else(|| Error::Domain("singular simplex basis".into()))?;
        self.xb = &self.binv * &self.b;
        for v in self.xb.iter_mut() {
            if *v < 0.0 && *v > -1e-11 {
                *v = 0.0;
            }
        }
        Ok(())
    }

    fn pivot(&mut self, r: usize, entering: usize, u: &DVector<f64>) {
        let m = self.lp.rows;
        let piv = u[r];
        let step = self.xb[r] / piv;
        for i in 0..m {
            if i != r {
                self.xb[i] -= step * u[i];
            }
        }
        self.xb[r] = step;
        let row_r: Vec<f64> = (0..m).map(|c| self.binv[(r, c)] / piv).collect();
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = u[i];
            if f != 0.0 {
                for (c, rv) in row_r.iter().enumerate() {
                    self.binv[(i, c)] -= f * rv;
                }
            }
        }
        for (c, rv) in row_r.into_iter().enumerate() {
            self.binv[(r, c)] = rv;
        }
        self.basis[r] = entering;
    }

    /// Runs simplex iterations for the given cost vector over real columns only.
    fn optimize(&mut self, cost: &dyn Fn(usize) -> f64) -> Result<DVector<f64>> {
        let m = self.lp.rows;
        let n = self.n_real();
        let scale = 1.0 + (0..n).map(|j| cost(j).abs()).fold(0.0, f64::max);
        let price_tol = 1e-11 * scale;
        let mut in_basis = vec![false; n + m];
        for &j in &self.basis {
            in_basis[j] = true;
        }
        let mut stall = 0usize;
        let mut since_refactor = 0usize;
        loop {
            let cb = DVector::from_iterator(m, self.basis.iter().map(|&j| if j < n { cost(j) } else { 0.0 }));
            let y = self.binv.tr_mul(&cb);
            let bland = stall > 20;
            let mut entering = None;
            let mut best = -price_tol;
            for j in 0..n {
                if in_basis[j] {
                    continue;
                }
                let d = cost(j) - self.lp.cols[j].iter().map(|&(r, v)| y[r] * v * self.sign[r]).sum::<f64>();
                if d < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(e) = entering else {
                return Ok(y);
            };
            let u = self.ftran(e);
            let mut leave: Option<usize> = None;
            let mut ratio = f64::INFINITY;
            for i in 0..m {
                // a zero-level artificial left in the basis blocks any column touching its row
                let artificial = self.basis[i] >= n && u[i].abs() > PIVOT_TOL;
                if u[i] > PIVOT_TOL || artificial {
                    let t = if artificial { 0.0 } else { self.xb[i].max(0.0) / u[i] };
                    let better = match leave {
                        None => true,
                        Some(l) => t < ratio - 1e-14 || (t <= ratio + 1e-14 && self.basis[i] < self.basis[l]),
                    };
                    if better {
                        ratio = t.min(ratio);
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else {
                return Err(Error::Unbounded);
            };
            stall = if ratio < 1e-12 { stall + 1 } else { 0 };
            in_basis[self.basis[r]] = false;
            in_basis[e] = true;
            self.pivot(r, e, &u);
            self.iterations += 1;
            since_refactor += 1;
            if since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                since_refactor = 0;
            }
            if self.iterations > 200 * (n + m) + 10_000 {
                return Err(Error::Domain("simplex iteration limit reached".into()));
            }
        }
    }

    fn run(mut self) -> Result<LpSolution> {
        let m = self.lp.rows;
        let n = self.n_real();
        let bscale = 1.0 + self.b.iter().fold(0.0_f64, |a, v| a.max(v.abs()));

        self.phase_one()?;
        let infeas: f64 = self
            .basis
            .iter()
            .zip(self.xb.iter())
            .filter(|(&j, _)| j >= n)
            .map(|(_, &v)| v)
            .sum();
        if infeas > 1e-9 * bscale {
            return Err(Error::Infeasible);
        }
        // Drive zero-level artificials out where a real column can replace them.
        for r in 0..m {
            if self.basis[r] < n {
                continue;
            }
            let mut in_basis = vec![false; n];
            for &j in &self.basis {
                if j < n {
                    in_basis[j] = true;
                }
            }
            let row: Vec<f64> = (0..m).map(|c| self.binv[(r, c)]).collect();
            let cand = (0..n).filter(|&j| !in_basis[j]).find(|&j| {
                let v: f64 = self.column(j).iter().map(|&(rr, a)| row[rr] * a).sum();
                v.abs() > 1e-7
            });
            if let Some(j) = cand {
                let u = self.ftran(j);
                self.pivot(r, j, &u);
            }
        }
        self.refactor()?;

        let cost = self.lp.cost.clone();
        let y = self.optimize(&|j| cost[j])?;
        self.refactor()?;
        let mut x = vec![0.0; n];
        for (k, &j) in self.basis.iter().enumerate() {
            if j < n {
                x[j] = self.xb[k].max(0.0);
            }
        }
        let objective = x.iter().zip(&self.lp.cost).map(|(a, c)| a * c).sum();
        let duals = (0..m).map(|r| y[r] * self.sign[r]).collect();
        Ok(LpSolution {
            x,
            objective,
            duals,
            iterations: self.iterations,
        })
    }

    /// Minimizes the total artificial mass. Artificials never re-enter.
    fn phase_one(&mut self) -> Result<()> {
        let m = self.lp.rows;
        let n = self.n_real();
        let mut in_basis = vec![false; n + m];
        for &j in &self.basis {
            in_basis[j] = true;
        }
        let mut stall = 0usize;
        let mut since_refactor = 0usize;
        loop {
            let cb = DVector::from_iterator(m, self.basis.iter().map(|&j| if j >= n { 1.0 } else { 0.0 }));
            if self.basis.iter().zip(self.xb.iter()).all(|(&j, &v)| j < n || v <= 1e-13) {
                return Ok(());
            }
            let y = self.binv.tr_mul(&cb);
            let bland = stall > 20;
            let mut entering = None;
            let mut best = -1e-11;
            for j in 0..n {
                if in_basis[j] {
                    continue;
                }
                let d = -self.lp.cols[j].iter().map(|&(r, v)| y[r] * v * self.sign[r]).sum::<f64>();
                if d < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(e) = entering else {
                return Ok(());
            };
            let u = self.ftran(e);
            let mut leave: Option<usize> = None;
            let mut ratio = f64::INFINITY;
            for i in 0..m {
                if u[i] > PIVOT_TOL {
                    let t = self.xb[i].max(0.0) / u[i];
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            t < ratio - 1e-14
                                || (t <= ratio + 1e-14 && (self.basis[i] >= n) && self.basis[l] < n)
                                || (t <= ratio + 1e-14
                                    && (self.basis[i] >= n) == (self.basis[l] >= n)
                                    && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        ratio = t.min(ratio);
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else {
                return Err(Error::Unbounded);
            };
            stall = if ratio < 1e-12 { stall + 1 } else { 0 };
            in_basis[self.basis[r]] = false;
            in_basis[e] = true;
            self.pivot(r, e, &u);
            self.iterations += 1;
            since_refactor += 1;
            if since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                since_refactor = 0;
            }
            if self.iterations > 200 * (n + m) + 10_000 {
                return Err(Error::Domain("simplex iteration limit reached".into()));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn small_textbook_problem() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 (slacks s1..s3)
        let mut lp = LinearProgram::new(vec![4.0, 12.0, 18.0]);
        lp.add_column(-3.0, vec![(0, 1.0), (2, 3.0)]);
        lp.add_column(-5.0, vec![(1, 2.0), (2, 2.0)]);
        for r in 0..3 {
            lp.add_column(0.0, vec![(r, 1.0)]);
        }
        let s = lp.solve().unwrap();
        assert_abs_diff_eq!(s.objective, -36.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 6.0, epsilon = 1e-12);
    }

    #[test]
    fn transportation_with_redundant_row() {
        let supply = [0.3, 0.7];
        let demand = [0.5, 0.25, 0.25];
        let cost = [[1.0, 2.0, 3.0], [4.0, 1.0, 0.5]];
        let mut rhs = supply.to_vec();
        rhs.extend_from_slice(&demand);
        let mut lp = LinearProgram::new(rhs);
        for i in 0..2 {
            for j in 0..3 {
                lp.add_column(cost[i][j], vec![(i, 1.0), (2 + j, 1.0)]);
            }
        }
        let s = lp.solve().unwrap();
        // brute force on the single free parameter structure via a fine grid
        let mut best = f64::INFINITY;
        let k = 200;
        for a in 0..=k {
            for b in 0..=k {
                let x00 = 0.3 * a as f64 / k as f64;
                let x01 = (0.3 - x00) * b as f64 / k as f64;
                let x02 = 0.3 - x00 - x01;
                let (x10, x11, x12) = (0.5 - x00, 0.25 - x01, 0.25 - x02);
                if x10 < -1e-12 || x11 < -1e-12 || x12 < -1e-12 {
                    continue;
                }
                let c = x00 + 2.0 * x01 + 3.0 * x02 + 4.0 * x10 + x11 + 0.5 * x12;
                best = best.min(c);
            }
        }
        assert_abs_diff_eq!(s.objective, best, epsilon = 1e-9);
        for (j, &v) in s.x.iter().enumerate() {
            let (i, k) = (j / 3, j % 3);
            let rc = cost[i][k] - s.duals[i] - s.duals[2 + k];
            assert!(rc >= -1e-9);
            assert!(v * rc.abs() < 1e-9);
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.add_column(1.0, vec![(0, 1.0), (1, 1.0)]);
        assert_eq!(lp.solve(), Err(Error::Infeasible));
        let mut lp2 = LinearProgram::new(vec![1.0]);
        lp2.add_column(0.0, vec![(0, 1.0)]);
        lp2.add_column(-1.0, vec![]);
        assert_eq!(lp2.solve(), Err(Error::Unbounded));
    }

    #[test]
    fn negative_rhs_is_normalized() {
        // x - y = -1, min x + y  ->  x = 0, y = 1
        let mut lp = LinearProgram::new(vec![-1.0]);
        lp.add_column(1.0, vec![(0, 1.0)]);
        lp.add_column(1.0, vec![(0, -1.0)]);
        let s = lp.solve().unwrap();
        assert_abs_diff_eq!(s.objective, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 1.0, epsilon = 1e-12);
    }
}
