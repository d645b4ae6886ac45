//! Tiny dense symmetric linear algebra for the synthetic Gaussian family.
//! Dimensions stay single digit, so cyclic Jacobi sweeps and an unblocked
//! Cholesky are plenty.

use crate::error::{CliError, Result};

pub type Matrix = Vec<Vec<f64>>;

pub fn identity(d: usize) -> Matrix {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for l in 0..k {
            let ail = a[i][l];
            for j in 0..m {
                out[i][j] += ail * b[l][j];
            }
        }
    }
    out
}

pub fn mat_vec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum()).collect()
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvector columns): A = V diag(w) V^T.
pub fn symmetric_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.len();
    let mut m: Matrix = a.clone();
    let mut v = identity(n);
    let scale: f64 = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
        .max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(m[i][j].abs());
            }
        }
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() <= 1e-300 {
                    continue;
                }
                // Classic Jacobi rotation zeroing m[p][q].
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let w: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    (w, v)
}

/// V diag(f(w)) V^T for a symmetric positive definite input.
fn symmetric_apply(a: &Matrix, f: impl Fn(f64) -> f64) -> Result<Matrix> {
    let (w, v) = symmetric_eigen(a);
    let floor = 1e-12
        * w.iter()
            .fold(0.0f64, |acc, x| acc.max(x.abs()))
            .max(1.0);
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for (k, &wk) in w.iter().enumerate() {
        if wk <= floor {
            return Err(CliError::NotPositiveDefinite { pivot: wk });
        }
        let fw = f(wk);
        for i in 0..n {
            for j in 0..n {
                out[i][j] += fw * v[i][k] * v[j][k];
            }
        }
    }
    Ok(out)
}

pub fn sqrtm(a: &Matrix) -> Result<Matrix> {
    symmetric_apply(a, f64::sqrt)
}

pub fn inv_sqrtm(a: &Matrix) -> Result<Matrix> {
    symmetric_apply(a, |w| 1.0 / w.sqrt())
}

/// Lower-triangular Cholesky factor; errors on non positive definite input.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(CliError::NotPositiveDefinite { pivot: sum });
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Ok(l)
}
