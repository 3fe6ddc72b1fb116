//! Small dense linear-algebra kernels shared across the crate.
//!
//! Matrices in this crate are at most a few dozen rows (graphs are capped at
//! 25 nodes, doubled encodings at 50), so everything here is written for
//! small dense `Array2<f64>` inputs: cyclic Jacobi for symmetric
//! eigenproblems, LU with partial pivoting for inverses and log-determinants,
//! and a compensated accumulator for long combinatorial sums.

use ndarray::{Array1, Array2};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    /// A pivot fell below 1e-14 during LU elimination.
    #[error("matrix is numerically singular (pivot {pivot:.3e} at step {step})")]
    SingularMatrix { step: usize, pivot: f64 },
    /// Jacobi sweeps did not drive the off-diagonal norm under tolerance.
    #[error("eigendecomposition did not converge after {sweeps} sweeps")]
    EigenFailure { sweeps: usize },
}

const LU_PIVOT_THRESHOLD: f64 = 1e-14;
const JACOBI_TOLERANCE: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Kahan compensated accumulator.
///
/// Combinatorial sums in this crate run over millions of same-sign terms;
/// compensation keeps the result independent of magnitude drift. Summation
/// order is fixed by the callers, so results are bitwise reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let y = value - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Frobenius norm of the strictly off-diagonal part.
fn off_diagonal_norm(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += m[(i, j)] * m[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors stored as columns,
/// so `m = V diag(w) V^T`. Eigenvalues are sorted ascending. Convergence is
/// reached when the off-diagonal norm drops under `1e-12` (relative to the
/// matrix scale for matrices with large norm, which double precision cannot
/// push to an absolute 1e-12).
pub fn jacobi_eigh(m: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>), LinalgError> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "jacobi_eigh requires a square matrix");
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }

    let mut a = m.clone();
    let mut v: Array2<f64> = Array2::eye(n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let tol = JACOBI_TOLERANCE * scale;

    let mut sweeps = 0;
    while off_diagonal_norm(&a) > tol {
        if sweeps >= JACOBI_MAX_SWEEPS {
            return Err(LinalgError::EigenFailure { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // Classic two-sided rotation zeroing a[(p, q)].
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());

    let eigenvalues = Array1::from_iter(order.iter().map(|&i| a[(i, i)]));
    let mut eigenvectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            eigenvectors[(k, dst)] = v[(k, src)];
        }
    }
    Ok((eigenvalues, eigenvectors))
}

/// Largest eigenvalue magnitude of a symmetric matrix.
pub fn spectral_radius(m: &Array2<f64>) -> Result<f64, LinalgError> {
    let (w, _) = jacobi_eigh(m)?;
    Ok(w.iter().fold(0.0f64, |acc, x| acc.max(x.abs())))
}

/// LU decomposition with partial pivoting, kept as a single packed factor.
struct LuFactors {
    lu: Array2<f64>,
    pivots: Vec<usize>,
    det_sign: f64,
    log_abs_det: f64,
}

fn lu_factor(m: &Array2<f64>) -> Result<LuFactors, LinalgError> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "lu_factor requires a square matrix");
    let mut lu = m.clone();
    let mut pivots = vec![0usize; n];
    let mut det_sign = 1.0;
    let mut log_abs_det = 0.0;

    for k in 0..n {
        let mut pivot_row = k;
        let mut pivot_val = lu[(k, k)].abs();
        for r in (k + 1)..n {
            let cand = lu[(r, k)].abs();
            if cand > pivot_val {
                pivot_val = cand;
                pivot_row = r;
            }
        }
        if pivot_val < LU_PIVOT_THRESHOLD {
            return Err(LinalgError::SingularMatrix {
                step: k,
                pivot: pivot_val,
            });
        }
        pivots[k] = pivot_row;
        if pivot_row != k {
            for c in 0..n {
                lu.swap((k, c), (pivot_row, c));
            }
            det_sign = -det_sign;
        }
        let pivot = lu[(k, k)];
        det_sign *= pivot.signum();
        log_abs_det += pivot.abs().ln();
        for r in (k + 1)..n {
            let factor = lu[(r, k)] / pivot;
            lu[(r, k)] = factor;
            for c in (k + 1)..n {
                lu[(r, c)] -= factor * lu[(k, c)];
            }
        }
    }

    Ok(LuFactors {
        lu,
        pivots,
        det_sign,
        log_abs_det,
    })
}

fn lu_solve_in_place(f: &LuFactors, b: &mut Array1<f64>) {
    let n = f.pivots.len();
    for k in 0..n {
        b.swap(k, f.pivots[k]);
    }
    for k in 0..n {
        for r in (k + 1)..n {
            b[r] -= f.lu[(r, k)] * b[k];
        }
    }
    for k in (0..n).rev() {
        for r in (k + 1)..n {
            b[k] -= f.lu[(k, r)] * b[r];
        }
        b[k] /= f.lu[(k, k)];
    }
}

/// Inverse together with the determinant as `(sign, log |det|)`.
pub fn lu_inverse(m: &Array2<f64>) -> Result<(Array2<f64>, f64, f64), LinalgError> {
    let n = m.nrows();
    let factors = lu_factor(m)?;
    let mut inverse = Array2::zeros((n, n));
    let mut column = Array1::zeros(n);
    for j in 0..n {
        column.fill(0.0);
        column[j] = 1.0;
        lu_solve_in_place(&factors, &mut column);
        for i in 0..n {
            inverse[(i, j)] = column[i];
        }
    }
    Ok((inverse, factors.det_sign, factors.log_abs_det))
}

/// Determinant as `(sign, log |det|)` without forming the inverse.
pub fn lu_log_det(m: &Array2<f64>) -> Result<(f64, f64), LinalgError> {
    let factors = lu_factor(m)?;
    Ok((factors.det_sign, factors.log_abs_det))
}

/// Builds the row/column repetition of `m`: row/column `j` appears
/// `counts[j]` times, in index order. Entries between two copies keep the
/// source entry, including the source diagonal.
pub fn repeat_rows_cols(m: &Array2<f64>, counts: &[usize]) -> Array2<f64> {
    assert_eq!(m.nrows(), counts.len(), "counts length must match matrix size");
    let size: usize = counts.iter().sum();
    let mut sources = Vec::with_capacity(size);
    for (j, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            sources.push(j);
        }
    }
    let mut out = Array2::zeros((size, size));
    for (u, &su) in sources.iter().enumerate() {
        for (v, &sv) in sources.iter().enumerate() {
            out[(u, v)] = m[(su, sv)];
        }
    }
    out
}

/// Max absolute difference from the transpose.
pub fn symmetry_deviation(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            dev = dev.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    dev
}
