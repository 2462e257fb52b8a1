//! Small dense linear-algebra routines for the fitting code.
//!
//! Problem sizes here are tiny (tens to a few hundred unknowns), so plain
//! O(p^3) factorizations on `ndarray` storage are all that is needed.

use ndarray::{Array1, Array2};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },
    #[error("matrix is singular (pivot column {0})")]
    Singular(usize),
    #[error("dimension mismatch: matrix is {rows}x{cols}, vector has length {len}")]
    Shape { rows: usize, cols: usize, len: usize },
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    pub fn new(a: &Array2<f64>) -> Result<Self, LinalgError> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "Cholesky needs a square matrix");
        let mut l = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(LinalgError::NotPositiveDefinite {
                    column: j,
                    pivot: diag,
                });
            }
            let root = diag.sqrt();
            l[(j, j)] = root;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / root;
            }
        }
        Ok(Cholesky { l })
    }

    /// Solve `A x = b` via the stored factor.
    pub fn solve(&self, b: &Array1<f64>) -> Result<Array1<f64>, LinalgError> {
        let n = self.l.nrows();
        if b.len() != n {
            return Err(LinalgError::Shape {
                rows: n,
                cols: n,
                len: b.len(),
            });
        }
        // Forward substitution L y = b.
        let mut y = b.clone();
        for i in 0..n {
            for k in 0..i {
                let v = y[k];
                y[i] -= self.l[(i, k)] * v;
            }
            y[i] /= self.l[(i, i)];
        }
        // Back substitution L^T x = y.
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let v = y[k];
                y[i] -= self.l[(k, i)] * v;
            }
            y[i] /= self.l[(i, i)];
        }
        Ok(y)
    }

    /// log det(A) = 2 sum log L_ii.
    pub fn log_det(&self) -> f64 {
        (0..self.l.nrows()).map(|i| self.l[(i, i)].ln()).sum::<f64>() * 2.0
    }
}

/// Solve `A x = b` for SPD `A` in one call.
pub fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>, LinalgError> {
    Cholesky::new(a)?.solve(b)
}

/// Solve a general square system by LU with partial pivoting.
pub fn lu_solve(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>, LinalgError> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "lu_solve needs a square matrix");
    if b.len() != n {
        return Err(LinalgError::Shape {
            rows: n,
            cols: n,
            len: b.len(),
        });
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        // Partial pivot.
        let mut pivot_row = col;
        let mut best = lu[(col, col)].abs();
        for r in (col + 1)..n {
            let v = lu[(r, col)].abs();
            if v > best {
                best = v;
                pivot_row = r;
            }
        }
        if !(best > 0.0) || !best.is_finite() {
            return Err(LinalgError::Singular(col));
        }
        if pivot_row != col {
            for c in 0..n {
                lu.swap((col, c), (pivot_row, c));
            }
            x.swap(col, pivot_row);
        }
        for r in (col + 1)..n {
            let factor = lu[(r, col)] / lu[(col, col)];
            lu[(r, col)] = factor;
            for c in (col + 1)..n {
                let v = lu[(col, c)];
                lu[(r, c)] -= factor * v;
            }
            let xv = x[col];
            x[r] -= factor * xv;
        }
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let v = x[k];
            x[i] -= lu[(i, k)] * v;
        }
        x[i] /= lu[(i, i)];
    }
    Ok(x)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps. Used by the
/// diagnostics and tests; not a hot path.
pub fn sym_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "sym_eigenvalues needs a square matrix");
    let mut m = a.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frobenius(&m)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    eigs
}

fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        let x_true = array![1.0, -2.0, 0.5];
        let b = a.dot(&x_true);
        let x = cholesky_solve(&a, &b).unwrap();
        for i in 0..3 {
            assert!((x[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(Cholesky::new(&a).is_err());
    }

    #[test]
    fn lu_solves_general_system() {
        let a = array![[0.0, 2.0, 1.0], [1.0, -1.0, 3.0], [4.0, 0.5, -2.0]];
        let x_true = array![0.3, -1.1, 2.0];
        let b = a.dot(&x_true);
        let x = lu_solve(&a, &b).unwrap();
        for i in 0..3 {
            assert!((x[i] - x_true[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn lu_detects_singularity() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        let b = array![1.0, 2.0];
        assert!(lu_solve(&a, &b).is_err());
    }

    #[test]
    fn jacobi_eigenvalues_match_known() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let eigs = sym_eigenvalues(&a);
        assert!((eigs[0] - 1.0).abs() < 1e-10);
        assert!((eigs[1] - 3.0).abs() < 1e-10);
    }
}
