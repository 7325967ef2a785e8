//! Copula-domain similarity: rank Gaussianization per feature column,
//! shrunk covariance estimation per relation, and pairwise Mahalanobis
//! distance matrices.

use crate::error::{Error, Result};
use crate::numeric::linalg::{cholesky, solve_lower};
use crate::numeric::matrix::{gemm, Matrix};
use crate::numeric::special::inv_norm_cdf;

/// Minimum shrinkage intensity when the coefficient is auto-estimated;
/// keeps the covariance invertible even when the sample count is below
/// the feature dimension.
pub const LAMBDA_MIN: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct ShrunkCovariance {
    pub sigma: Matrix,
    pub lambda_used: f64,
}

/// Average 0-based ranks for one column; tied values share the mean of
/// their tied positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Map every column to standard-normal marginals: rank r (0-based, ties
/// averaged), u = (r+1)/(N+1), output Phi^{-1}(u). Depends only on the
/// ordering of each column, so any strictly monotone transform of a
/// column leaves the output bit-unchanged.
pub fn rank_gaussianize(x: &Matrix) -> Result<Matrix> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::DegenerateEpisode(format!(
            "rank statistics need at least 2 samples, got {n}"
        )));
    }
    let mut z = Matrix::zeros(n, x.cols());
    let mut col = vec![0.0; n];
    for j in 0..x.cols() {
        for i in 0..n {
            col[i] = x[(i, j)];
        }
        let ranks = average_ranks(&col);
        for i in 0..n {
            let u = (ranks[i] + 1.0) / (n as f64 + 1.0);
            z[(i, j)] = inv_norm_cdf(u)?;
        }
    }
    Ok(z)
}

/// Blend the sample second-moment matrix S = Z'Z/(N-1) with its
/// scaled-identity target: (1-lambda) S + lambda (tr S / d) I.
///
/// With `lambda` unset the intensity is the Ledoit-Wolf estimate — the
/// ratio of the estimated estimation-error variance of S to the dispersion
/// of S around the target — clamped to [LAMBDA_MIN, 1].
pub fn shrink_covariance(z: &Matrix, lambda: Option<f64>) -> Result<ShrunkCovariance> {
    let n = z.rows();
    let d = z.cols();
    if n < 2 {
        return Err(Error::DegenerateEpisode(format!(
            "covariance needs at least 2 samples, got {n}"
        )));
    }
    if let Some(l) = lambda {
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::Config(format!("lambda must be in [0,1], got {l}")));
        }
    }
    let s = gemm(z, true, z, false)?.scale(1.0 / (n as f64 - 1.0));
    let mu = (0..d).map(|i| s[(i, i)]).sum::<f64>() / d as f64;

    let lam = match lambda {
        Some(l) => l,
        None => estimate_lambda(z, &s, mu).clamp(LAMBDA_MIN, 1.0),
    };

    let sigma = if lam == 1.0 {
        Matrix::from_fn(d, d, |i, j| if i == j { mu } else { 0.0 })
    } else {
        Matrix::from_fn(d, d, |i, j| {
            let target = if i == j { mu } else { 0.0 };
            (1.0 - lam) * s[(i, j)] + lam * target
        })
    };
    Ok(ShrunkCovariance {
        sigma,
        lambda_used: lam,
    })
}

fn estimate_lambda(z: &Matrix, s: &Matrix, mu: f64) -> f64 {
    let n = z.rows() as f64;
    let d = s.rows();
    // Dispersion of S around its scaled-identity target.
    let mut disp = 0.0;
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { mu } else { 0.0 };
            let diff = s[(i, j)] - target;
            disp += diff * diff;
        }
    }
    if disp <= 0.0 {
        return 1.0;
    }
    // Estimation-error variance: mean squared deviation of the per-sample
    // outer products from S, divided by N.
    let mut err = 0.0;
    for k in 0..z.rows() {
        let row = z.row(k);
        for i in 0..d {
            for j in 0..d {
                let diff = row[i] * row[j] - s[(i, j)];
                err += diff * diff;
            }
        }
    }
    err /= n * n;
    (err.min(disp)) / disp
}

/// Pairwise squared Mahalanobis distances D_ij = (z_i - z_j)' Sigma^{-1}
/// (z_i - z_j), computed through the Cholesky factor (no explicit
/// inverse): with Y = L^{-1} Z' and M = Y'Y, D_ij = M_ii + M_jj - 2 M_ij.
pub fn mahalanobis_matrix(z: &Matrix, sigma: &Matrix) -> Result<Matrix> {
    if sigma.rows() != z.cols() {
        return Err(Error::Shape(format!(
            "covariance {:?} vs features {:?}",
            sigma.shape(),
            z.shape()
        )));
    }
    let l = cholesky(sigma)?;
    let y = solve_lower(&l, &z.transpose())?;
    let gram = gemm(&y, true, &y, false)?;
    let n = z.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                d[(i, j)] = (gram[(i, i)] + gram[(j, j)] - 2.0 * gram[(i, j)]).max(0.0);
            }
        }
    }
    Ok(d)
}
