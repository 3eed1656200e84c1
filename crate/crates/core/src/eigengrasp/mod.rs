//! Eigengrasp action subspace: PCA over a hand-pose dataset yields an
//! orthonormal basis of m joint-space directions; the policy then acts in
//! m-dim coefficient space and targets decompress back to 16 joint angles.

pub mod dataset;
pub mod jacobi;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hand::{HandPose, JOINT_COUNT};
use dataset::PoseDataset;

/// Multiple of the per-component standard deviation used for the default
/// coefficient scales, so actions in [-1, 1] cover the dataset with margin.
pub const DEFAULT_SCALE_SIGMA: f64 = 2.5;

/// Eigenvalues below this fraction of the largest are treated as zero when
/// deciding the achievable rank.
const RANK_REL_TOL: f64 = 1e-10;

/// PCA basis over hand poses: dataset mean, m orthonormal 16-d directions
/// (descending variance), the matching singular values of the centered data
/// matrix, and default coefficient scales.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigengraspBasis {
    pub version: u32,
    pub m: usize,
    pub mean: Vec<f64>,
    /// Row-major m x 16; each row is a unit eigenvector.
    pub eigvecs: Vec<Vec<f64>>,
    /// Singular values of the mean-centered pose matrix, descending.
    pub singular_values: Vec<f64>,
    /// Default per-coefficient scales (2.5 sigma of the data projection).
    pub scales: Vec<f64>,
}

impl EigengraspBasis {
    pub fn validate(&self) -> Result<()> {
        if self.m < 1 || self.m > JOINT_COUNT {
            return Err(Error::InvalidInput(format!(
                "basis needs 1 <= m <= {}, found {}",
                JOINT_COUNT, self.m
            )));
        }
        if self.mean.len() != JOINT_COUNT {
            return Err(Error::Arity {
                what: "basis mean".into(),
                expected: JOINT_COUNT,
                got: self.mean.len(),
            });
        }
        if self.eigvecs.len() != self.m
            || self.singular_values.len() != self.m
            || self.scales.len() != self.m
        {
            return Err(Error::Arity {
                what: "basis rows".into(),
                expected: self.m,
                got: self.eigvecs.len().min(self.singular_values.len()).min(self.scales.len()),
            });
        }
        for row in &self.eigvecs {
            if row.len() != JOINT_COUNT {
                return Err(Error::Arity {
                    what: "eigenvector".into(),
                    expected: JOINT_COUNT,
                    got: row.len(),
                });
            }
        }
        for i in 0..self.m {
            for j in i..self.m {
                let dot: f64 = (0..JOINT_COUNT)
                    .map(|k| self.eigvecs[i][k] * self.eigvecs[j][k])
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-9 {
                    return Err(Error::InvalidInput(format!(
                        "eigenvectors {i} and {j} are not orthonormal (dot = {dot})"
                    )));
                }
            }
        }
        for i in 1..self.m {
            if self.singular_values[i] > self.singular_values[i - 1] + 1e-12 {
                return Err(Error::InvalidInput(
                    "singular values are not sorted descending".into(),
                ));
            }
        }
        if self
            .singular_values
            .iter()
            .chain(&self.scales)
            .any(|&s| !(s > 0.0) || !s.is_finite())
        {
            return Err(Error::InvalidInput(
                "singular values and scales must be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

/// PCA over all poses in all trajectories. Errors when the centered data has
/// rank below `m`.
pub fn extract_eigengrasps(dataset: &PoseDataset, m: usize) -> Result<EigengraspBasis> {
    dataset.validate()?;
    let n = dataset.total_poses();
    if m < 1 || m > JOINT_COUNT {
        return Err(Error::InvalidInput(format!(
            "m must be in 1..={}, got {m}",
            JOINT_COUNT
        )));
    }
    if n <= m {
        return Err(Error::InvalidInput(format!(
            "need more poses ({n}) than components ({m})"
        )));
    }

    let mut mean = [0.0; JOINT_COUNT];
    for pose in dataset.all_poses() {
        for i in 0..JOINT_COUNT {
            mean[i] += pose.angles[i];
        }
    }
    for v in &mut mean {
        *v /= n as f64;
    }

    // Population covariance of the centered poses.
    let mut cov = vec![0.0; JOINT_COUNT * JOINT_COUNT];
    for pose in dataset.all_poses() {
        let c: Vec<f64> = (0..JOINT_COUNT).map(|i| pose.angles[i] - mean[i]).collect();
        for i in 0..JOINT_COUNT {
            for j in i..JOINT_COUNT {
                cov[i * JOINT_COUNT + j] += c[i] * c[j];
            }
        }
    }
    for i in 0..JOINT_COUNT {
        for j in i..JOINT_COUNT {
            cov[i * JOINT_COUNT + j] /= n as f64;
            cov[j * JOINT_COUNT + i] = cov[i * JOINT_COUNT + j];
        }
    }

    let eig = jacobi::symmetric_eigen(&cov, JOINT_COUNT)?;
    let lead = eig.values[0].max(0.0);
    let rank = eig
        .values
        .iter()
        .filter(|&&v| v > RANK_REL_TOL * lead && v > f64::EPSILON)
        .count();
    if rank < m {
        return Err(Error::RankDeficient { rank, requested: m });
    }

    let mut eigvecs = Vec::with_capacity(m);
    let mut singular_values = Vec::with_capacity(m);
    let mut scales = Vec::with_capacity(m);
    for k in 0..m {
        let mut v = eig.vectors[k].clone();
        // Deterministic sign: the largest-magnitude entry is positive, first
        // such index on ties.
        let mut pivot = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        if v[pivot] < 0.0 {
            for x in &mut v {
                *x = -*x;
            }
        }
        let lambda = eig.values[k].max(0.0);
        eigvecs.push(v);
        singular_values.push((lambda * n as f64).sqrt());
        scales.push(DEFAULT_SCALE_SIGMA * lambda.sqrt());
    }

    let basis = EigengraspBasis {
        version: 1,
        m,
        mean: mean.to_vec(),
        eigvecs,
        singular_values,
        scales,
    };
    basis.validate()?;
    Ok(basis)
}

/// mean + sum_i a_i * scale_i * e_i, unclamped; callers clamp with their
/// HandModel.
pub fn decompress(basis: &EigengraspBasis, a: &[f64], scales: &[f64]) -> Result<HandPose> {
    if a.len() != basis.m {
        return Err(Error::Arity {
            what: "coefficients".into(),
            expected: basis.m,
            got: a.len(),
        });
    }
    if scales.len() != basis.m {
        return Err(Error::Arity {
            what: "scales".into(),
            expected: basis.m,
            got: scales.len(),
        });
    }
    let mut angles = [0.0; JOINT_COUNT];
    angles.copy_from_slice(&basis.mean);
    for i in 0..basis.m {
        let w = a[i] * scales[i];
        for j in 0..JOINT_COUNT {
            angles[j] += w * basis.eigvecs[i][j];
        }
    }
    Ok(HandPose::from_angles(angles))
}

/// a_i = e_i . (pose - mean) / scale_i; the left inverse of decompress on the
/// span of the basis.
pub fn compress(basis: &EigengraspBasis, pose: &HandPose, scales: &[f64]) -> Result<Vec<f64>> {
    if scales.len() != basis.m {
        return Err(Error::Arity {
            what: "scales".into(),
            expected: basis.m,
            got: scales.len(),
        });
    }
    let centered: Vec<f64> = (0..JOINT_COUNT)
        .map(|j| pose.angles[j] - basis.mean[j])
        .collect();
    Ok((0..basis.m)
        .map(|i| {
            let dot: f64 = (0..JOINT_COUNT).map(|j| basis.eigvecs[i][j] * centered[j]).sum();
            dot / scales[i]
        })
        .collect())
}

/// Mean squared 16-d residual (rad^2) of projecting every dataset pose onto
/// the basis span and back.
pub fn reconstruction_error(dataset: &PoseDataset, basis: &EigengraspBasis) -> Result<f64> {
    dataset.validate()?;
    basis.validate()?;
    let ones = vec![1.0; basis.m];
    let mut total = 0.0;
    for pose in dataset.all_poses() {
        let a = compress(basis, pose, &ones)?;
        let rec = decompress(basis, &a, &ones)?;
        let sq: f64 = (0..JOINT_COUNT)
            .map(|j| {
                let r = pose.angles[j] - rec.angles[j];
                r * r
            })
            .sum();
        total += sq;
    }
    Ok(total / dataset.total_poses() as f64)
}

// ---------------------------------------------------------------------------
// Basis file I/O
// ---------------------------------------------------------------------------

pub fn save_basis(basis: &EigengraspBasis, path: &std::path::Path) -> Result<()> {
    basis.validate()?;
    let text = toml::to_string_pretty(basis)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_basis(path: &std::path::Path) -> Result<EigengraspBasis> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let basis: EigengraspBasis = toml::from_str(&text)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    basis.validate()?;
    Ok(basis)
}
