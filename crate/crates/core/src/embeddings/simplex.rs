//! Dense two-phase simplex for small equality-form linear programs
//!
//! `minimize cᵀx  subject to  A x = b,  x ≥ 0`.
//!
//! Bland's rule is used for both entering and leaving variables so the method
//! terminates on degenerate problems. The final basic solution is recomputed
//! from the original data with an LU solve, so accumulated pivoting error
//! does not leak into the returned point.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[col];
                if f != 0.0 {
                    row.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
                }
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            self.obj.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
        }
        self.basis[r] = col;
    }

    /// Runs simplex iterations over columns `< allowed`.
    fn optimize(&mut self, allowed: usize) -> Result<()> {
        let rhs = self.width - 1;
        let max_iters = 50_000;
        for _ in 0..max_iters {
            let entering = (0..allowed).find(|&j| self.obj[j] < -PIVOT_TOL);
            let Some(col) = entering else { return Ok(()) };
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[col] > PIVOT_TOL {
                    let ratio = row[rhs] / row[col];
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-14
                                || ((ratio - br).abs() <= 1e-14 && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = best else {
                return Err(Error::Config("linear program is unbounded".into()));
            };
            self.pivot(r, col);
        }
        Err(Error::NoConvergence { residual: f64::NAN, iters: max_iters })
    }
}

/// Solve `min cᵀx, Ax = b, x ≥ 0`.
pub fn minimize(c: &[f64], a: &DMatrix<f64>, b: &[f64]) -> Result<LpSolution> {
    let (m, n) = a.shape();
    assert_eq!(c.len(), n);
    assert_eq!(b.len(), m);
    let width = n + m + 1;
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; width];
        for j in 0..n {
            row[j] = sign * a[(i, j)];
        }
        row[n + i] = 1.0;
        row[width - 1] = sign * b[i];
        rows.push(row);
    }
    // Phase one: minimize the sum of artificials.
    let mut obj = vec![0.0; width];
    for row in &rows {
        for j in 0..n {
            obj[j] -= row[j];
        }
        obj[width - 1] -= row[width - 1];
    }
    let mut t = Tableau { rows, obj, basis: (n..n + m).collect(), width };
    t.optimize(n + m)?;
    if -t.obj[width - 1] > FEAS_TOL * (1.0 + b.iter().map(|v| v.abs()).sum::<f64>()) {
        return Err(Error::Infeasible);
    }
    // Drive artificials out of the basis; drop redundant rows.
    let mut r = 0;
    while r < t.rows.len() {
        if t.basis[r] >= n {
            match (0..n).find(|&j| t.rows[r][j].abs() > 1e-9) {
                Some(col) => {
                    t.pivot(r, col);
                    r += 1;
                }
                None => {
                    t.rows.remove(r);
                    t.basis.remove(r);
                }
            }
        } else {
            r += 1;
        }
    }
    // Phase two.
    let mut obj = vec![0.0; width];
    obj[..n].copy_from_slice(c);
    for (row, &bcol) in t.rows.iter().zip(&t.basis) {
        let f = obj[bcol];
        if f != 0.0 {
            obj.iter_mut().zip(row).for_each(|(v, p)| *v -= f * p);
        }
    }
    t.obj = obj;
    t.optimize(n)?;

    // Recompute the basic solution from the original (sign-adjusted) system.
    let mut x = vec![0.0; n];
    let k = t.basis.len();
    let mut bm = DMatrix::zeros(m, k);
    for (col, &j) in t.basis.iter().enumerate() {
        bm.set_column(col, &a.column(j));
    }
    let rhs = DVector::from_column_slice(b);
    let sol = if k == m {
        bm.clone().lu().solve(&rhs)
    } else {
        // Redundant rows were removed: solve the consistent overdetermined system.
        let bt = bm.transpose();
        (&bt * &bm).lu().solve(&(&bt * &rhs))
    };
    match sol {
        Some(xb) => {
            for (col, &j) in t.basis.iter().enumerate() {
                x[j] = xb[col].max(0.0);
            }
        }
        None => {
            for (row, &j) in t.rows.iter().zip(&t.basis) {
                x[j] = row[width - 1].max(0.0);
            }
        }
    }
    let objective = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok(LpSolution { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // min -x - y  s.t. x + 2y + s1 = 4, 3x + y + s2 = 6
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 1.0, 0.0, 3.0, 1.0, 0.0, 1.0]);
        let sol = minimize(&[-1.0, -1.0, 0.0, 0.0], &a, &[4.0, 6.0]).unwrap();
        assert!((sol.objective + 2.8).abs() < 1e-12);
        assert!((sol.x[0] - 1.6).abs() < 1e-12 && (sol.x[1] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn infeasible_detected() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert!(matches!(minimize(&[1.0, 1.0], &a, &[-1.0]), Err(Error::Infeasible)));
    }

    #[test]
    fn redundant_rows_tolerated() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let sol = minimize(&[1.0, 2.0], &a, &[1.0, 2.0]).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
    }
}
