//! Cholesky factorization and SPD solves.

use super::matrix::Matrix;
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape(format!("cholesky of {:?}", a.shape())));
    }
    let scale = a.max_abs().max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::NotSpd(format!(
                    "asymmetric at ({i},{j}): {} vs {}",
                    a[(i, j)],
                    a[(j, i)]
                )));
            }
        }
    }
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::NotSpd(format!(
                        "non-positive pivot {sum} at row {i}"
                    )));
                }
                l[(i, j)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solve L y = b (forward substitution) for each column of b.
pub fn solve_lower(l: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = l.rows();
    if b.rows() != n {
        return Err(Error::Shape(format!(
            "solve_lower {:?} vs {:?}",
            l.shape(),
            b.shape()
        )));
    }
    let mut y = b.clone();
    for col in 0..b.cols() {
        for i in 0..n {
            let mut sum = y[(i, col)];
            for k in 0..i {
                sum -= l[(i, k)] * y[(k, col)];
            }
            y[(i, col)] = sum / l[(i, i)];
        }
    }
    Ok(y)
}

/// Solve L^T x = y (back substitution) for each column of y.
pub fn solve_lower_transpose(l: &Matrix, y: &Matrix) -> Result<Matrix> {
    let n = l.rows();
    if y.rows() != n {
        return Err(Error::Shape(format!(
            "solve_lower_transpose {:?} vs {:?}",
            l.shape(),
            y.shape()
        )));
    }
    let mut x = y.clone();
    for col in 0..y.cols() {
        for i in (0..n).rev() {
            let mut sum = x[(i, col)];
            for k in (i + 1)..n {
                sum -= l[(k, i)] * x[(k, col)];
            }
            x[(i, col)] = sum / l[(i, i)];
        }
    }
    Ok(x)
}

/// Solve A X = B for symmetric positive-definite A via Cholesky.
pub fn spd_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let l = cholesky(a)?;
    let y = solve_lower(&l, b)?;
    solve_lower_transpose(&l, &y)
}
