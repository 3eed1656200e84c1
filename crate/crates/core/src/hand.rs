//! Parametric 16-dof four-digit hand: joint limits, canonical poses and the
//! forward kinematics that produce the collision spheres the simulator
//! consumes.
//!
//! Each digit is a serial chain of four joints: one abduction joint about the
//! palm normal at the digit base, then three flexion joints about the digit's
//! local x axis. One collision sphere sits at the distal end of each link, so
//! consecutive sphere centers within a digit are exactly one link length
//! apart.
//!
//! Palm frame convention: +x runs across the knuckles, +y from wrist to
//! fingertips, +z is the palm normal (the approach direction, pointing at the
//! object). Positive flexion curls a digit toward +z.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Pose;

pub const JOINT_COUNT: usize = 16;
pub const DIGIT_COUNT: usize = 4;
pub const JOINTS_PER_DIGIT: usize = 4;

/// 16 joint angles in radians, digit-major: `[abduction, flex1, flex2, flex3]`
/// for each of the three fingers, then the thumb.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HandPose {
    pub angles: [f64; JOINT_COUNT],
}

impl HandPose {
    pub fn zeros() -> Self {
        HandPose {
            angles: [0.0; JOINT_COUNT],
        }
    }

    pub fn from_angles(angles: [f64; JOINT_COUNT]) -> Self {
        HandPose { angles }
    }

    pub fn is_finite(&self) -> bool {
        self.angles.iter().all(|a| a.is_finite())
    }
}

/// Geometry of a single digit chain, expressed in the palm frame.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DigitGeometry {
    pub name: String,
    /// Digit base position on the palm.
    pub base_position: [f64; 3],
    /// Rotation of the digit frame about the palm normal. Fingers use 0,
    /// the opposing thumb uses pi.
    pub base_yaw: f64,
    /// Link lengths in meters, proximal to distal.
    pub link_lengths: [f64; JOINTS_PER_DIGIT],
    /// Collision sphere radius per link, meters.
    pub sphere_radii: [f64; JOINTS_PER_DIGIT],
    /// Per-joint lower limits, radians: `[abduction, flex1, flex2, flex3]`.
    pub limits_lo: [f64; JOINTS_PER_DIGIT],
    pub limits_hi: [f64; JOINTS_PER_DIGIT],
}

/// Full hand description: four digit chains plus the palm reference point
/// used for hand-object distances.
#[derive(Clone, Debug)]
pub struct HandModel {
    pub version: u32,
    pub digits: Vec<DigitGeometry>,
    /// Palm reference point in the palm frame.
    pub palm_point: Vector3<f64>,
}

/// Sphere produced by forward kinematics, world frame.
#[derive(Clone, Copy, Debug)]
pub struct CollisionSphere {
    pub center: Vector3<f64>,
    pub radius: f64,
}

/// Rich forward-kinematics output: collision spheres plus the joint origins
/// and axes the simulator needs to map contact forces back to joint torques.
#[derive(Clone, Debug)]
pub struct HandFrames {
    pub spheres: [CollisionSphere; JOINT_COUNT],
    pub joint_origins: [Vector3<f64>; JOINT_COUNT],
    pub joint_axes: [Vector3<f64>; JOINT_COUNT],
    pub palm_point: Vector3<f64>,
}

impl Default for HandModel {
    /// Canonical 16-dof model: three fingers along +y, an opposing thumb
    /// along -y. The first link is the short offset between the abduction
    /// pivot and the first flexion knuckle, so phalanges
    /// (0.045/0.035/0.028 m) curl from right at the knuckle row; that lets
    /// the chain fully encircle centimeter-scale cylinders placed under it.
    /// Sphere radius 8 mm, flexion limits [-0.5, 2.2] rad, abduction
    /// limits [-0.8, 0.8] rad.
    fn default() -> Self {
        let links = [0.01, 0.045, 0.035, 0.028];
        let radii = [0.008; 4];
        let lo = [-0.8, -0.5, -0.5, -0.5];
        let hi = [0.8, 2.2, 2.2, 2.2];
        let finger = |name: &str, x: f64| DigitGeometry {
            name: name.to_string(),
            base_position: [x, 0.045, 0.0],
            base_yaw: 0.0,
            link_lengths: links,
            sphere_radii: radii,
            limits_lo: lo,
            limits_hi: hi,
        };
        HandModel {
            version: 1,
            digits: vec![
                finger("index", -0.038),
                finger("middle", 0.0),
                finger("ring", 0.038),
                DigitGeometry {
                    name: "thumb".to_string(),
                    base_position: [0.0, -0.045, 0.0],
                    base_yaw: std::f64::consts::PI,
                    link_lengths: links,
                    sphere_radii: radii,
                    limits_lo: lo,
                    limits_hi: hi,
                },
            ],
            palm_point: Vector3::new(0.0, 0.0, 0.01),
        }
    }
}

impl HandModel {
    pub fn validate(&self) -> Result<()> {
        if self.digits.len() != DIGIT_COUNT {
            return Err(Error::InvalidInput(format!(
                "hand model needs {} digits, found {}",
                DIGIT_COUNT,
                self.digits.len()
            )));
        }
        for d in &self.digits {
            for k in 0..JOINTS_PER_DIGIT {
                if d.limits_lo[k] >= d.limits_hi[k] {
                    return Err(Error::InvalidInput(format!(
                        "digit {}: joint {} limits [{}, {}] are not ordered",
                        d.name, k, d.limits_lo[k], d.limits_hi[k]
                    )));
                }
                if d.link_lengths[k] <= 0.0 || d.sphere_radii[k] <= 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "digit {}: link {} needs positive length and radius",
                        d.name, k
                    )));
                }
            }
        }
        Ok(())
    }

    /// Flattened lower limits, digit-major.
    pub fn limits_lo(&self) -> [f64; JOINT_COUNT] {
        let mut out = [0.0; JOINT_COUNT];
        for (d, digit) in self.digits.iter().enumerate() {
            out[d * JOINTS_PER_DIGIT..(d + 1) * JOINTS_PER_DIGIT]
                .copy_from_slice(&digit.limits_lo);
        }
        out
    }

    pub fn limits_hi(&self) -> [f64; JOINT_COUNT] {
        let mut out = [0.0; JOINT_COUNT];
        for (d, digit) in self.digits.iter().enumerate() {
            out[d * JOINTS_PER_DIGIT..(d + 1) * JOINTS_PER_DIGIT]
                .copy_from_slice(&digit.limits_hi);
        }
        out
    }
}

/// Clamp every joint angle into its limit interval. Errors on non-finite
/// input; idempotent.
pub fn clamp_to_limits(model: &HandModel, pose: &HandPose) -> Result<HandPose> {
    if !pose.is_finite() {
        let bad = pose
            .angles
            .iter()
            .position(|a| !a.is_finite())
            .unwrap_or(0);
        return Err(Error::NonFinite(format!("hand pose angle {bad}")));
    }
    let lo = model.limits_lo();
    let hi = model.limits_hi();
    let mut out = *pose;
    for i in 0..JOINT_COUNT {
        out.angles[i] = pose.angles[i].clamp(lo[i], hi[i]);
    }
    Ok(out)
}

/// Joint positions midway between the joint limits — the finger pre-grasp
/// configuration.
pub fn midrange_pose(model: &HandModel) -> HandPose {
    let lo = model.limits_lo();
    let hi = model.limits_hi();
    let mut angles = [0.0; JOINT_COUNT];
    for i in 0..JOINT_COUNT {
        angles[i] = 0.5 * (lo[i] + hi[i]);
    }
    HandPose { angles }
}

/// Forward kinematics with joint frames, for the simulator.
pub fn fk_frames(model: &HandModel, pose: &HandPose, base: &Pose) -> HandFrames {
    let mut spheres = [CollisionSphere {
        center: Vector3::zeros(),
        radius: 0.0,
    }; JOINT_COUNT];
    let mut joint_origins = [Vector3::zeros(); JOINT_COUNT];
    let mut joint_axes = [Vector3::zeros(); JOINT_COUNT];

    for (d, digit) in model.digits.iter().enumerate() {
        let j0 = d * JOINTS_PER_DIGIT;
        let mut t = *base
            * Pose::new(
                Vector3::from(digit.base_position),
                UnitQuaternion::from_axis_angle(&Vector3::z_axis(), digit.base_yaw),
            );

        // Abduction joint: axis is the digit-frame z (palm normal).
        joint_origins[j0] = t.position;
        joint_axes[j0] = t.rotate(&Vector3::z());
        t = t * Pose::new(
            Vector3::zeros(),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), pose.angles[j0]),
        );
        t = t * Pose::new(
            Vector3::new(0.0, digit.link_lengths[0], 0.0),
            UnitQuaternion::identity(),
        );
        spheres[j0] = CollisionSphere {
            center: t.position,
            radius: digit.sphere_radii[0],
        };

        // Flexion joints sit at the preceding sphere center.
        for k in 1..JOINTS_PER_DIGIT {
            let j = j0 + k;
            joint_origins[j] = t.position;
            joint_axes[j] = t.rotate(&Vector3::x());
            t = t * Pose::new(
                Vector3::zeros(),
                UnitQuaternion::from_axis_angle(&Vector3::x_axis(), pose.angles[j]),
            );
            t = t * Pose::new(
                Vector3::new(0.0, digit.link_lengths[k], 0.0),
                UnitQuaternion::identity(),
            );
            spheres[j] = CollisionSphere {
                center: t.position,
                radius: digit.sphere_radii[k],
            };
        }
    }

    HandFrames {
        spheres,
        joint_origins,
        joint_axes,
        palm_point: base.transform_point(&model.palm_point),
    }
}

/// Collision spheres (one per link, 16 total) plus the palm reference point,
/// all in the world frame.
pub fn forward_kinematics(
    model: &HandModel,
    pose: &HandPose,
    base: &Pose,
) -> (Vec<CollisionSphere>, Vector3<f64>) {
    let frames = fk_frames(model, pose, base);
    (frames.spheres.to_vec(), frames.palm_point)
}

// ---------------------------------------------------------------------------
// Model file I/O
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct HandModelFile {
    version: u32,
    palm_point: [f64; 3],
    digits: Vec<DigitGeometry>,
}

pub fn save_model(model: &HandModel, path: &std::path::Path) -> Result<()> {
    let file = HandModelFile {
        version: model.version,
        palm_point: [model.palm_point.x, model.palm_point.y, model.palm_point.z],
        digits: model.digits.clone(),
    };
    let text = toml::to_string_pretty(&file)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_model(path: &std::path::Path) -> Result<HandModel> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let file: HandModelFile = toml::from_str(&text)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    let model = HandModel {
        version: file.version,
        digits: file.digits,
        palm_point: Vector3::from(file.palm_point),
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pose(rng: &mut impl Rng, model: &HandModel) -> HandPose {
        let lo = model.limits_lo();
        let hi = model.limits_hi();
        let mut angles = [0.0; JOINT_COUNT];
        for i in 0..JOINT_COUNT {
            angles[i] = rng.gen_range(lo[i]..hi[i]);
        }
        HandPose { angles }
    }

    fn random_base(rng: &mut impl Rng) -> Pose {
        Pose::new(
            Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ),
            UnitQuaternion::from_euler_angles(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-3.0..3.0),
            ),
        )
    }

    #[test]
    fn clamp_basics() {
        let model = HandModel::default();
        let hi = model.limits_hi();
        let lo = model.limits_lo();

        let mut pose = HandPose::zeros();
        pose.angles[3] = hi[3] + 0.5;
        let clamped = clamp_to_limits(&model, &pose).unwrap();
        assert_eq!(clamped.angles[3], hi[3]);

        let inside = midrange_pose(&model);
        let unchanged = clamp_to_limits(&model, &inside).unwrap();
        assert_eq!(unchanged, inside);

        let mut low = HandPose::zeros();
        low.angles[7] = lo[7] - 1e9;
        assert_eq!(clamp_to_limits(&model, &low).unwrap().angles[7], lo[7]);

        let mut bad = HandPose::zeros();
        bad.angles[0] = f64::NAN;
        assert!(clamp_to_limits(&model, &bad).is_err());
    }

    #[test]
    fn midrange_matches_limits() {
        let mut model = HandModel::default();
        for d in &mut model.digits {
            d.limits_lo = [0.0; 4];
            d.limits_hi = [2.0; 4];
        }
        assert!(midrange_pose(&model).angles.iter().all(|&a| a == 1.0));

        for d in &mut model.digits {
            d.limits_lo = [-1.0; 4];
            d.limits_hi = [1.0; 4];
        }
        assert!(midrange_pose(&model).angles.iter().all(|&a| a == 0.0));

        for d in &mut model.digits {
            d.limits_lo = [0.2; 4];
            d.limits_hi = [1.0; 4];
        }
        for a in midrange_pose(&model).angles {
            assert_relative_eq!(a, 0.6, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_pose_canonical_layout() {
        let model = HandModel::default();
        let (spheres, palm) = forward_kinematics(&model, &HandPose::zeros(), &Pose::identity());
        // Fingers straight along +y from their bases, thumb mirrored along -y.
        let cum = [0.01, 0.055, 0.09, 0.118];
        for (d, x) in [(0usize, -0.038), (1, 0.0), (2, 0.038)] {
            for k in 0..4 {
                let s = spheres[d * 4 + k];
                assert_relative_eq!(s.center.x, x, epsilon = 1e-12);
                assert_relative_eq!(s.center.y, 0.045 + cum[k], epsilon = 1e-12);
                assert_relative_eq!(s.center.z, 0.0, epsilon = 1e-12);
            }
        }
        for k in 0..4 {
            let s = spheres[12 + k];
            assert_relative_eq!(s.center.x, 0.0, epsilon = 1e-12);
            assert_relative_eq!(s.center.y, -0.045 - cum[k], epsilon = 1e-12);
        }
        assert_relative_eq!(palm, Vector3::new(0.0, 0.0, 0.01), epsilon = 1e-12);
    }

    #[test]
    fn fk_translation_equivariance() {
        let model = HandModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pose = random_pose(&mut rng, &model);
        let t = Vector3::new(0.3, -1.2, 0.5);
        let (s0, p0) = forward_kinematics(&model, &pose, &Pose::identity());
        let (s1, p1) = forward_kinematics(&model, &pose, &crate::geom::translation(t));
        for (a, b) in s0.iter().zip(&s1) {
            assert_relative_eq!(a.center + t, b.center, epsilon = 1e-12);
        }
        assert_relative_eq!(p0 + t, p1, epsilon = 1e-12);
    }

    /// Independent oracle: per-joint homogeneous 4x4 matrix chain, written
    /// against plain arrays rather than the Pose composition the
    /// implementation uses.
    mod mat4_oracle {
        pub type Mat4 = [[f64; 4]; 4];

        pub fn identity() -> Mat4 {
            let mut m = [[0.0; 4]; 4];
            for i in 0..4 {
                m[i][i] = 1.0;
            }
            m
        }

        pub fn mul(a: &Mat4, b: &Mat4) -> Mat4 {
            let mut out = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    let mut acc = 0.0;
                    for k in 0..4 {
                        acc += a[i][k] * b[k][j];
                    }
                    out[i][j] = acc;
                }
            }
            out
        }

        pub fn rot_z(t: f64) -> Mat4 {
            let (s, c) = t.sin_cos();
            let mut m = identity();
            m[0][0] = c;
            m[0][1] = -s;
            m[1][0] = s;
            m[1][1] = c;
            m
        }

        pub fn rot_x(t: f64) -> Mat4 {
            let (s, c) = t.sin_cos();
            let mut m = identity();
            m[1][1] = c;
            m[1][2] = -s;
            m[2][1] = s;
            m[2][2] = c;
            m
        }

        pub fn trans(x: f64, y: f64, z: f64) -> Mat4 {
            let mut m = identity();
            m[0][3] = x;
            m[1][3] = y;
            m[2][3] = z;
            m
        }

        pub fn origin(m: &Mat4) -> [f64; 3] {
            [m[0][3], m[1][3], m[2][3]]
        }
    }

    #[test]
    fn fk_matches_matrix_chain_oracle() {
        use mat4_oracle::*;
        let model = HandModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..25 {
            let pose = random_pose(&mut rng, &model);
            let base = random_base(&mut rng);
            let (spheres, _) = forward_kinematics(&model, &pose, &base);

            let rot = base.orientation.to_rotation_matrix();
            let mut base_m = identity();
            for i in 0..3 {
                for j in 0..3 {
                    base_m[i][j] = rot[(i, j)];
                }
                base_m[i][3] = base.position[i];
            }

            for (d, digit) in model.digits.iter().enumerate() {
                let mut m = mul(
                    &base_m,
                    &mul(
                        &trans(
                            digit.base_position[0],
                            digit.base_position[1],
                            digit.base_position[2],
                        ),
                        &rot_z(digit.base_yaw),
                    ),
                );
                m = mul(&m, &rot_z(pose.angles[d * 4]));
                m = mul(&m, &trans(0.0, digit.link_lengths[0], 0.0));
                let o = origin(&m);
                for i in 0..3 {
                    assert_relative_eq!(spheres[d * 4].center[i], o[i], epsilon = 1e-9);
                }
                for k in 1..4 {
                    m = mul(&m, &rot_x(pose.angles[d * 4 + k]));
                    m = mul(&m, &trans(0.0, digit.link_lengths[k], 0.0));
                    let o = origin(&m);
                    for i in 0..3 {
                        assert_relative_eq!(spheres[d * 4 + k].center[i], o[i], epsilon = 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn model_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hand.toml");
        let model = HandModel::default();
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.version, model.version);
        assert_eq!(loaded.digits.len(), 4);
        assert_eq!(loaded.digits[3].base_yaw, model.digits[3].base_yaw);
        assert_eq!(loaded.palm_point, model.palm_point);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        /// FK rigid equivariance: FK(pose, T * base) == T * FK(pose, base).
        #[test]
        fn fk_rigid_equivariance(seed in 0u64..1_000_000) {
            let model = HandModel::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pose = random_pose(&mut rng, &model);
            let base = random_base(&mut rng);
            let t = random_base(&mut rng);

            let (s_base, p_base) = forward_kinematics(&model, &pose, &base);
            let (s_moved, p_moved) = forward_kinematics(&model, &pose, &(t * base));
            for (a, b) in s_base.iter().zip(&s_moved) {
                let mapped = t.transform_point(&a.center);
                for i in 0..3 {
                    prop_assert!((mapped[i] - b.center[i]).abs() < 1e-9);
                }
            }
            let mapped_palm = t.transform_point(&p_base);
            for i in 0..3 {
                prop_assert!((mapped_palm[i] - p_moved[i]).abs() < 1e-9);
            }
        }

        /// Consecutive sphere centers in a digit are exactly one link apart.
        #[test]
        fn link_lengths_preserved(seed in 0u64..1_000_000) {
            let model = HandModel::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pose = random_pose(&mut rng, &model);
            let base = random_base(&mut rng);
            let (spheres, _) = forward_kinematics(&model, &pose, &base);
            for (d, digit) in model.digits.iter().enumerate() {
                for k in 1..4 {
                    let dist = (spheres[d * 4 + k].center - spheres[d * 4 + k - 1].center).norm();
                    prop_assert!((dist - digit.link_lengths[k]).abs() < 1e-9);
                }
            }
        }

        /// clamp_to_limits is an idempotent projection into the limit box.
        #[test]
        fn clamp_idempotent_projection(raw in proptest::array::uniform16(-10.0f64..10.0)) {
            let model = HandModel::default();
            let pose = HandPose::from_angles(raw);
            let once = clamp_to_limits(&model, &pose).unwrap();
            let twice = clamp_to_limits(&model, &once).unwrap();
            prop_assert_eq!(once, twice);
            let lo = model.limits_lo();
            let hi = model.limits_hi();
            for i in 0..JOINT_COUNT {
                prop_assert!(once.angles[i] >= lo[i] && once.angles[i] <= hi[i]);
            }
        }
    }
}
