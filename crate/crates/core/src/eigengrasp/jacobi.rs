//! Cyclic Jacobi eigendecomposition for symmetric matrices.
//!
//! Sweeps rotate away every off-diagonal entry in turn until the off-diagonal
//! Frobenius norm falls below a scale-relative threshold. Good to near machine
//! precision for the small (16x16) covariance matrices used here.

use crate::error::{Error, Result};

/// Eigendecomposition of a symmetric matrix: `values[k]` with unit
/// eigenvector `vectors[k]`, sorted by descending eigenvalue.
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

const MAX_SWEEPS: usize = 64;

/// Decompose a symmetric `n x n` matrix given in row-major order.
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> Result<SymmetricEigen> {
    if matrix.len() != n * n {
        return Err(Error::DimMismatch(format!(
            "matrix length {} is not {}x{}",
            matrix.len(),
            n,
            n
        )));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigendecomposition input".into()));
    }
    let mut a = matrix.to_vec();
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = (a[i * n + j] - a[j * n + i]).abs();
            let scale = a[i * n + j].abs().max(a[j * n + i]).max(1.0);
            if diff > 1e-9 * scale {
                return Err(Error::InvalidInput(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }

    // v starts as identity and accumulates the rotations; columns become
    // eigenvectors.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = (1e-14 * frob).max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if (2.0 * off).sqrt() <= tol {
            break;
        }

        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                // Classic stable rotation: t = s/c from the smaller root.
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[j * n + j]
            .partial_cmp(&a[i * n + i])
            .expect("eigenvalues are finite")
    });

    let values: Vec<f64> = order.iter().map(|&k| a[k * n + k]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&k| (0..n).map(|row| v[row * n + k]).collect())
        .collect();
    Ok(SymmetricEigen { values, vectors })
}
