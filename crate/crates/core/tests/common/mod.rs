//! Shared fixtures for the integration and acceptance suites.

#![allow(dead_code)]

use mrcgat::data::{Dataset, DiagnosisClass, ModalityPartition, SubjectRecord};
use mrcgat::numeric::matrix::Matrix;
use mrcgat::numeric::rng::RngStream;

/// Oracle task: features are the one-hot class (repeated per relation
/// block) plus Gaussian noise, so a query's nearest supports share its
/// label.
pub fn label_copy_dataset(seed: u64, n_per_class: usize, sigma: f64) -> Dataset {
    let mut stream = RngStream::new(seed, 901);
    let partition = ModalityPartition::contiguous(3, 3, 3).unwrap();
    let mut records = Vec::new();
    for (c, class) in DiagnosisClass::ALL.into_iter().enumerate() {
        for n in 0..n_per_class {
            let mut features = vec![0.0; 9];
            for chunk in features.chunks_mut(3) {
                for (j, v) in chunk.iter_mut().enumerate() {
                    *v = f64::from(u8::from(j == c)) + sigma * stream.normal();
                }
            }
            records.push(SubjectRecord {
                subject_id: format!("lc_{c}_{n:03}"),
                label: Some(class),
                features,
            });
        }
    }
    Dataset::new(records, partition, DiagnosisClass::ALL.to_vec()).unwrap()
}

/// Random symmetric nonnegative distance matrix with zero diagonal.
pub fn random_distances(n: usize, scale: f64, stream: &mut RngStream) -> Matrix {
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = stream.next_f64() * scale;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Random SPD matrix with bounded condition number.
pub fn random_spd(d: usize, stream: &mut RngStream) -> Matrix {
    let g = Matrix::from_fn(d, d, |_, _| stream.next_f64() * 2.0 - 1.0);
    let mut a = mrcgat::numeric::matrix::gemm(&g, false, &g, true).unwrap();
    for i in 0..d {
        a[(i, i)] += 0.5 * d as f64;
    }
    a
}

/// Solve A x = b by Gaussian elimination with partial pivoting.
/// Test-side oracle, independent of the library's Cholesky path.
pub fn gauss_solve(a: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = a.row(i).to_vec();
            row.push(b[i]);
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        for row in (col + 1)..n {
            let factor = m[row][col] / p;
            for k in col..=n {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = m[row][n];
        for k in (row + 1)..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    x
}

/// Smallest eigenvalue via a Jacobi sweep. Test-side oracle.
pub fn min_eigenvalue(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut m = a.clone();
    for _ in 0..200 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[(p, q)].abs() < 1e-15 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
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
    (0..n).map(|i| m[(i, i)]).fold(f64::INFINITY, f64::min)
}

/// Brute-force Mann-Whitney statistic with ties counted one half.
pub fn mann_whitney(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}
