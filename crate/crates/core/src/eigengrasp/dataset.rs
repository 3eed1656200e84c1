//! Hand-pose dataset I/O plus a synthetic grasp-cycle generator.
//!
//! File format: one pose per line as 16 comma-separated joint angles in
//! radians; lines starting with `#` are comments; a blank line ends the
//! current trajectory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hand::{midrange_pose, HandModel, HandPose, JOINT_COUNT};

/// Hand-pose trajectories; the PCA input.
#[derive(Clone, Debug, Default)]
pub struct PoseDataset {
    pub trajectories: Vec<Vec<HandPose>>,
}

impl PoseDataset {
    pub fn total_poses(&self) -> usize {
        self.trajectories.iter().map(|t| t.len()).sum()
    }

    pub fn all_poses(&self) -> impl Iterator<Item = &HandPose> {
        self.trajectories.iter().flatten()
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_poses() < 2 {
            return Err(Error::InvalidInput(format!(
                "pose dataset needs at least 2 poses, found {}",
                self.total_poses()
            )));
        }
        for (t, traj) in self.trajectories.iter().enumerate() {
            for (i, pose) in traj.iter().enumerate() {
                if !pose.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "pose {i} of trajectory {t}"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn load_dataset(path: &std::path::Path) -> Result<PoseDataset> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let file = path.display().to_string();
    let mut dataset = PoseDataset::default();
    let mut current: Vec<HandPose> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            if !current.is_empty() {
                dataset.trajectories.push(std::mem::take(&mut current));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != JOINT_COUNT {
            return Err(Error::Parse {
                file,
                line: line_no,
                message: format!("expected {} joint angles, found {}", JOINT_COUNT, fields.len()),
            });
        }
        let mut angles = [0.0; JOINT_COUNT];
        for (i, f) in fields.iter().enumerate() {
            angles[i] = f.parse::<f64>().map_err(|_| Error::Parse {
                file: file.clone(),
                line: line_no,
                message: format!("field {}: `{}` is not a number", i + 1, f),
            })?;
            if !angles[i].is_finite() {
                return Err(Error::Parse {
                    file: file.clone(),
                    line: line_no,
                    message: format!("field {} is not finite", i + 1),
                });
            }
        }
        current.push(HandPose::from_angles(angles));
    }
    if !current.is_empty() {
        dataset.trajectories.push(current);
    }
    dataset.validate()?;
    Ok(dataset)
}

pub fn save_dataset(dataset: &PoseDataset, path: &std::path::Path) -> Result<()> {
    let mut out = String::from("# hand pose dataset: 16 comma-separated joint angles (rad) per line\n");
    for (t, traj) in dataset.trajectories.iter().enumerate() {
        if t > 0 {
            out.push('\n');
        }
        for pose in traj {
            let line: Vec<String> = pose.angles.iter().map(|a| format!("{a}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Synthesize grasp-cycle trajectories: each cycle opens, closes toward a
/// sampled grip with per-digit phase lag, then reopens. The motion is driven
/// by a handful of latent amplitudes, so the poses concentrate on a
/// low-dimensional subspace the way recorded grasping data does.
pub fn generate_synthetic(
    model: &HandModel,
    trajectories: usize,
    steps_per_trajectory: usize,
    seed: u64,
) -> PoseDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = model.limits_lo();
    let hi = model.limits_hi();
    let mid = midrange_pose(model);
    let mut out = PoseDataset::default();

    for _ in 0..trajectories {
        // Latent drivers for this grasp cycle.
        let grip = rng.gen_range(0.3..1.0);
        let spread = rng.gen_range(-0.6..0.6);
        let distal_bias = rng.gen_range(0.6..1.4);
        let thumb_gain = rng.gen_range(0.7..1.3);
        let phase_lag: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..0.25));

        let mut traj = Vec::with_capacity(steps_per_trajectory);
        for s in 0..steps_per_trajectory {
            let t = s as f64 / steps_per_trajectory.max(1) as f64;
            let mut angles = [0.0; JOINT_COUNT];
            for d in 0..4 {
                // Close/open envelope in [0, 1], delayed per digit.
                let phase = ((t - phase_lag[d]).max(0.0) * std::f64::consts::PI).sin().max(0.0);
                let gain = if d == 3 { grip * thumb_gain } else { grip };
                let j0 = d * 4;
                angles[j0] = spread * (d as f64 - 1.0) / 2.0 * phase;
                angles[j0 + 1] = gain * phase * (hi[j0 + 1] - mid.angles[j0 + 1]);
                angles[j0 + 2] = gain * phase * distal_bias * (hi[j0 + 2] - mid.angles[j0 + 2]) * 0.8;
                angles[j0 + 3] = gain * phase * distal_bias * (hi[j0 + 3] - mid.angles[j0 + 3]) * 0.6;
            }
            for i in 0..JOINT_COUNT {
                angles[i] += rng.gen_range(-0.02..0.02);
                angles[i] = angles[i].clamp(lo[i], hi[i]);
            }
            traj.push(HandPose::from_angles(angles));
        }
        out.trajectories.push(traj);
    }
    out
}
