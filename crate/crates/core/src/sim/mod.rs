//! Grasping environment: a procedurally drawn hammer on the ground, a
//! 16-dof hand on a scripted arm, penalty contacts, the step reward, and
//! per-episode domain randomization.
//!
//! Physics runs in f64 with semi-implicit Euler substeps under a 30 Hz
//! control loop. The arm base is kinematic; the object is a free rigid body;
//! hand joints are torque-driven second-order systems with PD motors and
//! contact coupling through the chain Jacobian transpose. Contact stiffness
//! scales with object mass so penetration depth and the contact frequency
//! stay bounded across the randomized mass range.

pub mod arm;
pub mod contact;
pub mod dr;
pub mod object;
pub mod reward;

use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::eigengrasp::{decompress, EigengraspBasis};
use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::hand::{clamp_to_limits, fk_frames, HandModel, HandPose, JOINTS_PER_DIGIT, JOINT_COUNT};
use dr::{sample_domain_randomization, DRSample};
use object::{procgen_hammer, ObjectSpec};
use reward::{reward_hand_obj, reward_threshold, total_reward, RewardTerms};

/// Observation layout: end-effector target pose (3 position + 4 quaternion,
/// w first) then 16 joint angles.
pub const OBS_DIM: usize = 23;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GraspEnvConfig {
    pub version: u32,
    /// Control rate, Hz.
    pub control_hz: f64,
    /// Physics substeps per control step.
    pub substeps: u32,
    /// Episode length in control steps.
    pub horizon: u32,
    /// Object lowest-point height that counts as lifted, m.
    pub lift_threshold: f64,
    /// Palm-object distance that ends the episode, m.
    pub termination_distance: f64,
    /// Pre-grasp hold phase, s.
    pub hold_duration: f64,
    /// Linear ascent phase, s.
    pub ascent_duration: f64,
    /// Ascent height, m.
    pub lift_height: f64,
    /// Spin circle radius, m.
    pub spin_radius: f64,
    /// Spin angular rate, rad/s.
    pub spin_rate: f64,
    /// Spin-up ramp to the full angular rate, s. Keeps the end-effector
    /// velocity continuous at the circle handoff; a velocity step would
    /// jerk any held object free.
    pub spin_ease_duration: f64,
    /// Gravity, m/s^2.
    pub gravity: f64,
    /// Joint PD stiffness, N m/rad (scaled per episode by the DR draw).
    pub pd_stiffness: f64,
    /// Joint PD damping, N m s/rad (scaled per episode by the DR draw).
    pub pd_damping: f64,
    /// Reflected joint inertia, kg m^2.
    pub joint_inertia: f64,
    /// Motor torque limit at a fingertip joint, N m. Joints closer to the
    /// palm get this limit times their outboard link count; the gains are
    /// sized so a digit holds posture within a few degrees under the weight
    /// of a grasped object.
    pub torque_limit: f64,
    /// Object-ground contact stiffness per kg of object mass, N/m/kg. Mass
    /// proportionality keeps the contact frequency and resting penetration
    /// constant across the randomized mass range.
    pub ground_stiffness_per_kg: f64,
    pub ground_damping_ratio: f64,
    /// Hand-object contact stiffness per kg, clamped into
    /// [hand_stiffness_min, hand_stiffness_max] to keep both light-object
    /// squeeze penetration and finger-chain feedback stable.
    pub hand_stiffness_per_kg: f64,
    pub hand_stiffness_min: f64,
    pub hand_stiffness_max: f64,
    pub hand_damping_ratio: f64,
    /// Extra palm collision sphere radius, m.
    pub palm_pad_radius: f64,
    /// Additive observation noise std (all 23 channels), rad for joints.
    pub obs_noise_std: f64,
    /// Additive action noise std before clamping.
    pub act_noise_std: f64,
    /// Palm height above the handle axis at the pre-grasp, m.
    pub pregrasp_height: f64,
    /// Uniform pre-grasp position perturbation, +-m per axis.
    pub pregrasp_pos_noise: f64,
    /// Uniform pre-grasp yaw perturbation, +-rad.
    pub pregrasp_yaw_noise: f64,
    /// Grasp point location along the handle, 0 = tail, 1 = head end.
    pub grasp_fraction: f64,
    /// Object-only settling time during reset, s.
    pub settle_duration: f64,
    /// Parallel environment count used by training.
    pub env_count: u32,
}

impl Default for GraspEnvConfig {
    fn default() -> Self {
        GraspEnvConfig {
            version: 1,
            control_hz: 30.0,
            substeps: 128,
            horizon: 300,
            lift_threshold: reward::LIFT_THRESHOLD_Z,
            termination_distance: 0.20,
            hold_duration: 1.0,
            ascent_duration: 1.0,
            lift_height: 0.30,
            spin_radius: 0.15,
            spin_rate: std::f64::consts::PI,
            spin_ease_duration: 0.5,
            gravity: 9.81,
            pd_stiffness: 5.0,
            pd_damping: 0.12,
            joint_inertia: 2e-3,
            torque_limit: 0.45,
            ground_stiffness_per_kg: 1.2e6,
            ground_damping_ratio: 1.0,
            hand_stiffness_per_kg: 12_000.0,
            hand_stiffness_min: 2_000.0,
            hand_stiffness_max: 8_000.0,
            hand_damping_ratio: 1.0,
            palm_pad_radius: 0.02,
            obs_noise_std: 0.01,
            act_noise_std: 0.02,
            pregrasp_height: 0.045,
            pregrasp_pos_noise: 0.02,
            pregrasp_yaw_noise: 0.15,
            grasp_fraction: 0.65,
            settle_duration: 0.4,
            env_count: 256,
        }
    }
}

impl GraspEnvConfig {
    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("control_hz", self.control_hz),
            ("lift_threshold", self.lift_threshold),
            ("termination_distance", self.termination_distance),
            ("hold_duration", self.hold_duration),
            ("ascent_duration", self.ascent_duration),
            ("lift_height", self.lift_height),
            ("spin_radius", self.spin_radius),
            ("spin_rate", self.spin_rate),
            ("spin_ease_duration", self.spin_ease_duration),
            ("gravity", self.gravity),
            ("joint_inertia", self.joint_inertia),
            ("torque_limit", self.torque_limit),
            ("ground_stiffness_per_kg", self.ground_stiffness_per_kg),
            ("hand_stiffness_min", self.hand_stiffness_min),
            ("hand_stiffness_max", self.hand_stiffness_max),
            ("palm_pad_radius", self.palm_pad_radius),
            ("pregrasp_height", self.pregrasp_height),
            ("settle_duration", self.settle_duration),
        ];
        for (name, v) in positives {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "config {name} must be positive, got {v}"
                )));
            }
        }
        let non_negatives = [
            ("pd_stiffness", self.pd_stiffness),
            ("pd_damping", self.pd_damping),
            ("ground_damping_ratio", self.ground_damping_ratio),
            ("hand_stiffness_per_kg", self.hand_stiffness_per_kg),
            ("hand_damping_ratio", self.hand_damping_ratio),
            ("obs_noise_std", self.obs_noise_std),
            ("act_noise_std", self.act_noise_std),
            ("pregrasp_pos_noise", self.pregrasp_pos_noise),
            ("pregrasp_yaw_noise", self.pregrasp_yaw_noise),
        ];
        for (name, v) in non_negatives {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "config {name} must be non-negative, got {v}"
                )));
            }
        }
        if self.substeps == 0 || self.horizon == 0 || self.env_count == 0 {
            return Err(Error::InvalidInput(
                "substeps, horizon and env_count must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.grasp_fraction) {
            return Err(Error::InvalidInput(format!(
                "grasp_fraction must be in [0, 1], got {}",
                self.grasp_fraction
            )));
        }
        if self.termination_distance <= self.lift_threshold {
            return Err(Error::InvalidInput(
                "termination_distance must exceed lift_threshold".into(),
            ));
        }
        Ok(())
    }

    pub fn control_dt(&self) -> f64 {
        1.0 / self.control_hz
    }

    pub fn substep_dt(&self) -> f64 {
        self.control_dt() / self.substeps as f64
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &std::path::Path) -> Result<GraspEnvConfig> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let cfg: GraspEnvConfig = toml::from_str(&text)
            .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// How policy actions become 16 joint PD targets.
#[derive(Clone)]
pub enum ActionMode {
    /// m-dim coefficients decompressed through the PCA basis.
    Eigengrasp(Arc<EigengraspBasis>),
    /// 16-dim actions mapped affinely from [-1, 1] onto the joint limits.
    Unconstrained,
}

impl ActionMode {
    pub fn action_dim(&self) -> usize {
        match self {
            ActionMode::Eigengrasp(basis) => basis.m,
            ActionMode::Unconstrained => JOINT_COUNT,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub data: [f64; OBS_DIM],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndReason {
    Horizon,
    PalmDistance,
}

#[derive(Clone, Copy, Debug)]
pub struct StepInfo {
    pub terms: RewardTerms,
    pub palm_distance: f64,
    pub object_low_z: f64,
    pub end: Option<EndReason>,
}

#[derive(Clone, Copy, Debug)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Clone, Copy, Debug)]
struct BodyState {
    pose: Pose,
    lin_vel: Vector3<f64>,
    ang_vel: Vector3<f64>,
}

pub struct GraspEnv {
    cfg: GraspEnvConfig,
    model: Arc<HandModel>,
    mode: ActionMode,
    limits_lo: [f64; JOINT_COUNT],
    limits_hi: [f64; JOINT_COUNT],
    rng: ChaCha8Rng,
    dr: DRSample,
    spec: ObjectSpec,
    obj: BodyState,
    q: [f64; JOINT_COUNT],
    qd: [f64; JOINT_COUNT],
    targets: [f64; JOINT_COUNT],
    pregrasp: Pose,
    clock: f64,
    steps: u32,
    done: bool,
    k_ground: f64,
    k_hand: f64,
}

/// Effective mass of a rigid body at a contact point along the normal:
/// 1 / (1/m + (r x n)^T I^-1 (r x n)). Feeding this into the critical
/// damping formula keeps per-contact damping stable even where a small
/// rotational inertia amplifies the response at long lever arms.
fn contact_effective_mass(
    m: f64,
    i_inv: &Matrix3<f64>,
    r: &Vector3<f64>,
    n: &Vector3<f64>,
) -> f64 {
    let rn = r.cross(n);
    1.0 / (1.0 / m + rn.dot(&(i_inv * rn)))
}

impl GraspEnv {
    pub fn new(cfg: GraspEnvConfig, model: Arc<HandModel>, mode: ActionMode) -> Result<GraspEnv> {
        cfg.validate()?;
        model.validate()?;
        if let ActionMode::Eigengrasp(basis) = &mode {
            basis.validate()?;
        }
        let spec = ObjectSpec::compose(0.3, 0.015, 500.0, [0.03, 0.08, 0.03], 1500.0)?;
        let limits_lo = model.limits_lo();
        let limits_hi = model.limits_hi();
        Ok(GraspEnv {
            cfg,
            model,
            mode,
            limits_lo,
            limits_hi,
            rng: ChaCha8Rng::seed_from_u64(0),
            dr: DRSample {
                object_scale: 1.0,
                mass_scale: 1.0,
                friction: 1.0,
                stiffness_scale: 1.0,
                damping_scale: 1.0,
                obs_noise_std: 0.0,
                act_noise_std: 0.0,
            },
            obj: BodyState {
                pose: Pose::identity(),
                lin_vel: Vector3::zeros(),
                ang_vel: Vector3::zeros(),
            },
            q: [0.0; JOINT_COUNT],
            qd: [0.0; JOINT_COUNT],
            targets: [0.0; JOINT_COUNT],
            pregrasp: Pose::identity(),
            clock: 0.0,
            steps: 0,
            done: true,
            k_ground: 0.0,
            k_hand: 0.0,
            spec,
        })
    }

    pub fn config(&self) -> &GraspEnvConfig {
        &self.cfg
    }

    pub fn action_dim(&self) -> usize {
        self.mode.action_dim()
    }

    pub fn dr(&self) -> &DRSample {
        &self.dr
    }

    pub fn object_spec(&self) -> &ObjectSpec {
        &self.spec
    }

    pub fn object_pose(&self) -> Pose {
        self.obj.pose
    }

    pub fn object_velocity(&self) -> (Vector3<f64>, Vector3<f64>) {
        (self.obj.lin_vel, self.obj.ang_vel)
    }

    pub fn joint_angles(&self) -> [f64; JOINT_COUNT] {
        self.q
    }

    pub fn pregrasp_pose(&self) -> Pose {
        self.pregrasp
    }

    pub fn base_pose(&self) -> Pose {
        arm::arm_script_pose(&self.cfg, self.clock, &self.pregrasp)
    }

    pub fn steps_taken(&self) -> u32 {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Overwrite the object state; used for free-fall and settling checks.
    pub fn set_object_state(&mut self, pose: Pose, lin_vel: Vector3<f64>, ang_vel: Vector3<f64>) {
        self.obj = BodyState {
            pose,
            lin_vel,
            ang_vel,
        };
    }

    /// Lowest surface point of the object above the ground plane.
    pub fn object_lowest_z(&self) -> f64 {
        let rot = self.obj.pose.orientation;
        let com = self.obj.pose.position;
        self.spec
            .ground_candidates()
            .iter()
            .map(|(p, offset)| (com + rot.transform_vector(p)).z - offset)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn palm_distance(&self) -> f64 {
        let frames = fk_frames(
            &self.model,
            &HandPose::from_angles(self.q),
            &self.base_pose(),
        );
        (frames.palm_point - self.obj.pose.position).norm()
    }

    /// Object mechanical energy plus the elastic energy stored in active
    /// ground contacts. Hand contact storage is excluded; passive-energy
    /// checks run with the hand away from the object.
    pub fn mechanical_energy(&self) -> f64 {
        let m = self.spec.mass;
        let v = self.obj.lin_vel;
        let w = self.obj.ang_vel;
        let i_world = self.world_inertia();
        let mut e = m * self.cfg.gravity * self.obj.pose.position.z
            + 0.5 * m * v.norm_squared()
            + 0.5 * w.dot(&(i_world * w));
        let rot = self.obj.pose.orientation;
        let com = self.obj.pose.position;
        for (p, offset) in self.spec.ground_candidates() {
            let surface = com + rot.transform_vector(&p) - Vector3::new(0.0, 0.0, offset);
            if surface.z < 0.0 {
                e += 0.5 * self.k_ground * surface.z * surface.z;
            }
        }
        e
    }

    fn world_inertia(&self) -> Matrix3<f64> {
        let r = self.obj.pose.orientation.to_rotation_matrix();
        let d = Matrix3::from_diagonal(&self.spec.inertia);
        r * d * r.transpose()
    }

    pub fn reset(&mut self, seed: u64) -> Result<Observation> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.dr = sample_domain_randomization(
            &mut self.rng,
            self.cfg.obs_noise_std,
            self.cfg.act_noise_std,
        );
        self.spec = procgen_hammer(&mut self.rng, &self.dr);

        let m = self.spec.mass;
        self.k_ground = self.cfg.ground_stiffness_per_kg * m;
        self.k_hand = (self.cfg.hand_stiffness_per_kg * m)
            .clamp(self.cfg.hand_stiffness_min, self.cfg.hand_stiffness_max);

        // Drop the hammer flat with a random yaw, lowest point exactly on the
        // ground, and let it settle alone.
        let yaw: f64 = self.rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let rot = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw);
        let low = self
            .spec
            .ground_candidates()
            .iter()
            .map(|(p, offset)| rot.transform_vector(p).z - offset)
            .fold(f64::INFINITY, f64::min);
        self.obj = BodyState {
            pose: Pose::new(Vector3::new(0.0, 0.0, -low), rot),
            lin_vel: Vector3::zeros(),
            ang_vel: Vector3::zeros(),
        };
        self.q = [0.0; JOINT_COUNT];
        self.qd = [0.0; JOINT_COUNT];
        self.targets = [0.0; JOINT_COUNT];

        // Settle with the hand parked far above so nothing touches it.
        let far = Pose::new(Vector3::new(0.0, 0.0, 10.0), UnitQuaternion::identity());
        let dt = self.cfg.substep_dt();
        let settle_steps = (self.cfg.settle_duration / dt).round() as usize;
        for _ in 0..settle_steps {
            self.substep(&far, Vector3::zeros(), Vector3::zeros(), dt);
        }

        // Pre-grasp above the handle grasp point, perturbed to mimic
        // affordance error.
        let axis_point = self.spec.handle_p0
            + self.cfg.grasp_fraction * (self.spec.handle_p1 - self.spec.handle_p0);
        let grasp_world = self.obj.pose.transform_point(&axis_point);
        let n = self.cfg.pregrasp_pos_noise;
        let noise = Vector3::new(
            self.rng.gen_range(-n..=n),
            self.rng.gen_range(-n..=n),
            self.rng.gen_range(-n..=n),
        );
        let yaw_noise = self
            .rng
            .gen_range(-self.cfg.pregrasp_yaw_noise..=self.cfg.pregrasp_yaw_noise);
        // Palm faces down: local z (palm normal) maps to world -z, local x
        // (knuckle line) runs along the handle.
        let orientation = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw + yaw_noise)
            * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI);
        // The vertical draw is clamped so the palm pad (0.01 below the base)
        // never spawns inside the handle; the planner placing the arm would
        // avoid that collision too.
        let z_min =
            grasp_world.z + self.spec.handle_radius + 0.01 + self.cfg.palm_pad_radius + 0.002;
        self.pregrasp = Pose::new(
            Vector3::new(
                grasp_world.x + noise.x,
                grasp_world.y + noise.y,
                (grasp_world.z + self.cfg.pregrasp_height + noise.z).max(z_min),
            ),
            orientation,
        );

        self.clock = 0.0;
        self.steps = 0;
        self.done = false;
        Ok(self.make_observation())
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::InvalidInput(
                "step called on a finished episode; reset first".into(),
            ));
        }
        let dim = self.action_dim();
        if action.len() != dim {
            return Err(Error::Arity {
                what: "action".into(),
                expected: dim,
                got: action.len(),
            });
        }

        // Noise, clamp, decompress into joint PD targets.
        let noise = Normal::new(0.0, self.dr.act_noise_std)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        let mut a = vec![0.0; dim];
        for (out, &raw) in a.iter_mut().zip(action) {
            if !raw.is_finite() {
                return Err(Error::NonFinite("action".into()));
            }
            *out = (raw + noise.sample(&mut self.rng)).clamp(-1.0, 1.0);
        }
        self.targets = match &self.mode {
            ActionMode::Eigengrasp(basis) => {
                let pose = decompress(basis, &a, &basis.scales)?;
                clamp_to_limits(&self.model, &pose)?.angles
            }
            ActionMode::Unconstrained => {
                let mut t = [0.0; JOINT_COUNT];
                for i in 0..JOINT_COUNT {
                    let half = 0.5 * (self.limits_hi[i] - self.limits_lo[i]);
                    t[i] = self.limits_lo[i] + (a[i] + 1.0) * half;
                }
                t
            }
        };

        let dt = self.cfg.substep_dt();
        for k in 0..self.cfg.substeps {
            let t = self.clock + k as f64 * dt;
            let base = arm::arm_script_pose(&self.cfg, t, &self.pregrasp);
            let (vb, wb) = arm::arm_script_velocity(&self.cfg, t);
            self.substep(&base, vb, wb, dt);
        }
        self.clock += self.cfg.control_dt();
        self.steps += 1;
        self.check_finite()?;

        let palm_distance = self.palm_distance();
        let object_low_z = self.object_lowest_z();
        let terms = total_reward(
            reward_hand_obj(palm_distance)?,
            reward_threshold(object_low_z),
        );

        let end = if palm_distance > self.cfg.termination_distance {
            Some(EndReason::PalmDistance)
        } else if self.steps >= self.cfg.horizon {
            Some(EndReason::Horizon)
        } else {
            None
        };
        self.done = end.is_some();

        Ok(StepOutcome {
            obs: self.make_observation(),
            reward: terms.total,
            done: self.done,
            info: StepInfo {
                terms,
                palm_distance,
                object_low_z,
                end,
            },
        })
    }

    fn check_finite(&self) -> Result<()> {
        let checks = [
            ("object position", self.obj.pose.position.iter().all(|v| v.is_finite())),
            ("object orientation", self.obj.pose.orientation.coords.iter().all(|v| v.is_finite())),
            ("object linear velocity", self.obj.lin_vel.iter().all(|v| v.is_finite())),
            ("object angular velocity", self.obj.ang_vel.iter().all(|v| v.is_finite())),
            ("joint angles", self.q.iter().all(|v| v.is_finite())),
            ("joint velocities", self.qd.iter().all(|v| v.is_finite())),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(Error::NumericalFault {
                    quantity: name.into(),
                    step: self.steps as usize,
                });
            }
        }
        Ok(())
    }

    fn make_observation(&mut self) -> Observation {
        let base = self.base_pose();
        let clean = base.to_array7();
        let mut data = [0.0; OBS_DIM];
        let noise = Normal::new(0.0, self.dr.obs_noise_std).expect("std is non-negative");
        for i in 0..7 {
            data[i] = clean[i] + noise.sample(&mut self.rng);
        }
        // Re-normalize the noisy quaternion.
        let qn = (data[3] * data[3] + data[4] * data[4] + data[5] * data[5] + data[6] * data[6])
            .sqrt();
        if qn > 1e-9 {
            for v in &mut data[3..7] {
                *v /= qn;
            }
        } else {
            data[3..7].copy_from_slice(&clean[3..7]);
        }
        for i in 0..JOINT_COUNT {
            data[7 + i] = self.q[i] + noise.sample(&mut self.rng);
        }
        Observation { data }
    }

    /// One semi-implicit Euler physics substep with the arm base at `base`
    /// moving with velocity (`vb`, `wb`).
    fn substep(&mut self, base: &Pose, vb: Vector3<f64>, wb: Vector3<f64>, dt: f64) {
        let m = self.spec.mass;
        let mu = self.dr.friction;
        let com = self.obj.pose.position;
        let rot = self.obj.pose.orientation;
        let v_obj = self.obj.lin_vel;
        let w_obj = self.obj.ang_vel;

        let mut f_obj = Vector3::new(0.0, 0.0, -self.cfg.gravity * m);
        let mut tau_obj = Vector3::zeros();
        let mut tau_j = [0.0; JOINT_COUNT];
        let i_world = self.world_inertia();
        let i_inv = i_world
            .try_inverse()
            .expect("inertia is positive-definite");

        // Motor torques: PD toward targets, gains scaled by the DR draw.
        // The clamp is proximal-dominant: each joint's limit scales with the
        // number of links outboard of it, mirroring real fingers. With a
        // uniform limit a fingertip pressing the ground back-drives the
        // knuckle through a long lever arm and the hand can never close
        // around anything resting on a surface.
        let kp = self.cfg.pd_stiffness * self.dr.stiffness_scale;
        let kd = self.cfg.pd_damping * self.dr.damping_scale;
        for i in 0..JOINT_COUNT {
            let outboard = (JOINTS_PER_DIGIT - i % JOINTS_PER_DIGIT) as f64;
            let lim = self.cfg.torque_limit * outboard;
            let t = kp * (self.targets[i] - self.q[i]) - kd * self.qd[i];
            tau_j[i] = t.clamp(-lim, lim);
        }

        // Object-ground contacts. Each carries the full impact-rated
        // stiffness, but the damping coefficient is split across the live
        // contact count: total damping stays below the explicit stability
        // bound no matter how many corners touch, and unlike stiffness a
        // redistributed damping share stores no elastic energy.
        let candidates = self.spec.ground_candidates();
        let mut ground: Vec<(Vector3<f64>, f64)> = Vec::with_capacity(6);
        for (p, offset) in &candidates {
            let surface = com + rot.transform_vector(p) - Vector3::new(0.0, 0.0, *offset);
            if surface.z < 0.0 {
                ground.push((surface, -surface.z));
            }
        }
        let n_ground = ground.len().max(1) as f64;
        for (point, depth) in ground {
            let v_point = v_obj + w_obj.cross(&(point - com));
            let m_eff = contact_effective_mass(m, &i_inv, &(point - com), &Vector3::z_axis());
            let damping = 2.0 * self.cfg.ground_damping_ratio * (self.k_ground * m_eff).sqrt()
                / n_ground;
            let normal_force =
                contact::penalty_normal_force(depth, -v_point.z, self.k_ground, damping);
            let v_t = Vector3::new(v_point.x, v_point.y, 0.0);
            let mut f = Vector3::new(0.0, 0.0, normal_force);
            if v_t.norm() > 1e-12 {
                // The friction cap must also see the rotational response at
                // this lever, or tangential impulses pump spin.
                let m_t = contact_effective_mass(
                    m,
                    &i_inv,
                    &(point - com),
                    &v_t.normalize(),
                ) / n_ground;
                f += contact::friction_force(normal_force, mu, &v_t, m_t, dt);
            }
            f_obj += f;
            tau_obj += (point - com).cross(&f);
        }

        // Hand contacts: link spheres, phalanx midpoints, and the palm pad.
        let frames = fk_frames(&self.model, &HandPose::from_angles(self.q), base);
        let p0 = com + rot.transform_vector(&self.spec.handle_p0);
        let p1 = com + rot.transform_vector(&self.spec.handle_p1);
        let head_center = com + rot.transform_vector(&self.spec.head_center);
        let head_half = Vector3::new(
            self.spec.head_extents[0] / 2.0,
            self.spec.head_extents[1] / 2.0,
            self.spec.head_extents[2] / 2.0,
        );
        // Collect hand-object hits first so the damping coefficient can be
        // split across the live contact count, as for the ground.
        struct HandHit {
            chain: (usize, usize),
            c: contact::Contact,
            v_hand: Vector3<f64>,
        }
        let mut hits: Vec<HandHit> = Vec::with_capacity(8);
        // Collision points: the 16 link-end spheres, a midpoint sphere per
        // phalanx (a thin handle fits between bare link ends and would slip
        // through the chain), and the palm pad. Midpoints ride the same
        // joint chain as their link's end sphere.
        let mut points: Vec<(Vector3<f64>, f64, (usize, usize))> =
            Vec::with_capacity(JOINT_COUNT + 13);
        for s in 0..JOINT_COUNT {
            let digit = s / JOINTS_PER_DIGIT;
            let sp = frames.spheres[s];
            points.push((sp.center, sp.radius, (digit * JOINTS_PER_DIGIT, s + 1)));
            if s % JOINTS_PER_DIGIT != 0 {
                let mid = 0.5 * (frames.spheres[s - 1].center + sp.center);
                points.push((mid, sp.radius, (digit * JOINTS_PER_DIGIT, s + 1)));
            }
        }
        points.push((frames.palm_point, self.cfg.palm_pad_radius, (0, 0)));
        for (center, radius, chain) in points {
            // Velocity of the hand material point: base motion plus joint
            // rates through the chain.
            let mut v_hand = vb + wb.cross(&(center - base.position));
            for j in chain.0..chain.1 {
                v_hand +=
                    self.qd[j] * frames.joint_axes[j].cross(&(center - frames.joint_origins[j]));
            }

            let object_hits = [
                contact::sphere_capsule(&center, radius, &p0, &p1, self.spec.handle_radius),
                contact::sphere_box(&center, radius, &head_center, &rot, &head_half),
            ];
            for c in object_hits.into_iter().flatten() {
                hits.push(HandHit { chain, c, v_hand });
            }

            // Finger-ground contact keeps joints from driving links below the
            // floor; the kinematic base absorbs the palm pad case.
            if chain.1 > chain.0 {
                if let Some(c) = contact::sphere_ground(&center, radius) {
                    let depth_rate = -v_hand.z;
                    // Joint-side effective mass at fingertip levers is well
                    // above 0.1 kg, so this damping stays conservative.
                    let damping = 2.0
                        * self.cfg.hand_damping_ratio
                        * (self.k_hand * 0.1_f64).sqrt();
                    let normal_force = contact::penalty_normal_force(
                        c.depth,
                        depth_rate,
                        self.k_hand,
                        damping,
                    );
                    let v_t = Vector3::new(v_hand.x, v_hand.y, 0.0);
                    let f_on_hand = normal_force * c.normal
                        + contact::friction_force(normal_force, mu, &v_t, 0.1, dt);
                    for j in chain.0..chain.1 {
                        tau_j[j] += frames.joint_axes[j]
                            .dot(&(c.point - frames.joint_origins[j]).cross(&f_on_hand));
                    }
                }
            }
        }
        let n_hits = hits.len().max(1) as f64;
        for hit in &hits {
            let c = &hit.c;
            let v_obj_point = v_obj + w_obj.cross(&(c.point - com));
            let v_rel = hit.v_hand - v_obj_point;
            let depth_rate = -v_rel.dot(&c.normal);
            let m_eff = contact_effective_mass(m, &i_inv, &(c.point - com), &c.normal);
            let damping =
                2.0 * self.cfg.hand_damping_ratio * (self.k_hand * m_eff).sqrt() / n_hits;
            let normal_force =
                contact::penalty_normal_force(c.depth, depth_rate, self.k_hand, damping);
            let v_t = v_rel - v_rel.dot(&c.normal) * c.normal;
            let mut f_on_hand = normal_force * c.normal;
            if v_t.norm() > 1e-12 {
                // 0.4 kg bounds the reflected joint-side mass at fingertip
                // levers so the cap also holds for the finger chain.
                let m_t = contact_effective_mass(m, &i_inv, &(c.point - com), &v_t.normalize())
                    .min(0.4)
                    / n_hits;
                f_on_hand += contact::friction_force(normal_force, mu, &v_t, m_t, dt);
            }
            f_obj -= f_on_hand;
            tau_obj += (c.point - com).cross(&(-f_on_hand));
            for j in hit.chain.0..hit.chain.1 {
                tau_j[j] += frames.joint_axes[j]
                    .dot(&(c.point - frames.joint_origins[j]).cross(&f_on_hand));
            }
        }

        // Semi-implicit Euler: velocities first, then positions.
        let gyro = w_obj.cross(&(i_world * w_obj));
        let ang_acc = i_inv * (tau_obj - gyro);
        self.obj.lin_vel += dt * f_obj / m;
        self.obj.ang_vel += dt * ang_acc;
        self.obj.pose.position += dt * self.obj.lin_vel;
        let w = self.obj.ang_vel;
        let q = self.obj.pose.orientation.into_inner();
        let dq = Quaternion::new(0.0, w.x, w.y, w.z) * q * 0.5;
        self.obj.pose.orientation = UnitQuaternion::from_quaternion(q + dq * dt);

        for i in 0..JOINT_COUNT {
            self.qd[i] += dt * tau_j[i] / self.cfg.joint_inertia;
            self.q[i] += dt * self.qd[i];
            if self.q[i] < self.limits_lo[i] {
                self.q[i] = self.limits_lo[i];
                self.qd[i] = self.qd[i].max(0.0);
            } else if self.q[i] > self.limits_hi[i] {
                self.q[i] = self.limits_hi[i];
                self.qd[i] = self.qd[i].min(0.0);
            }
        }
    }
}

/// True iff the episode ran to the horizon and the object counted as lifted
/// at the final step.
pub fn success(trace: &EpisodeTrace) -> bool {
    trace.end == EndReason::Horizon
        && trace.steps.last().map(|s| s.r_threshold == 1).unwrap_or(false)
}

/// One control step of an episode trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: u32,
    pub t: f64,
    pub action: Vec<f64>,
    pub base_pos: [f64; 3],
    pub base_quat: [f64; 4],
    pub obj_pos: [f64; 3],
    pub obj_quat: [f64; 4],
    pub joint_angles: Vec<f64>,
    pub palm_distance: f64,
    pub object_low_z: f64,
    pub r_hand_obj: f64,
    pub r_threshold: u8,
    pub reward: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub steps: Vec<TraceStep>,
    pub end: EndReason,
}

impl GraspEnv {
    /// Build the trace record for the step that just executed.
    pub fn trace_step(&self, action: &[f64], info: &StepInfo) -> TraceStep {
        let base = self.base_pose().to_array7();
        let obj = self.obj.pose.to_array7();
        TraceStep {
            step: self.steps,
            t: self.clock,
            action: action.to_vec(),
            base_pos: [base[0], base[1], base[2]],
            base_quat: [base[3], base[4], base[5], base[6]],
            obj_pos: [obj[0], obj[1], obj[2]],
            obj_quat: [obj[3], obj[4], obj[5], obj[6]],
            joint_angles: self.q.to_vec(),
            palm_distance: info.palm_distance,
            object_low_z: info.object_low_z,
            r_hand_obj: info.terms.r_hand_obj,
            r_threshold: info.terms.r_threshold,
            reward: info.terms.total,
        }
    }
}

pub fn save_trace(trace: &EpisodeTrace, path: &std::path::Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    let header = serde_json::json!({ "kind": "episode_trace", "version": 1, "end": trace.end });
    writeln!(w, "{header}").map_err(|e| Error::io(path.display().to_string(), e))?;
    for step in &trace.steps {
        let line = serde_json::to_string(step)
            .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

pub fn load_trace(path: &std::path::Path) -> Result<EpisodeTrace> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = std::io::BufReader::new(file);
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::format(path.display().to_string(), "empty trace file"))?
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let header: serde_json::Value = serde_json::from_str(&header_line)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    if header.get("kind").and_then(|k| k.as_str()) != Some("episode_trace") {
        return Err(Error::format(
            path.display().to_string(),
            "missing episode_trace header",
        ));
    }
    let end: EndReason = serde_json::from_value(
        header
            .get("end")
            .cloned()
            .ok_or_else(|| Error::format(path.display().to_string(), "header lacks end"))?,
    )
    .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    let mut steps = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let step: TraceStep = serde_json::from_str(&line).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            line: i + 2,
            message: e.to_string(),
        })?;
        steps.push(step);
    }
    Ok(EpisodeTrace { steps, end })
}
