//! Scripted end-effector trajectory: hold the pre-grasp near the ground,
//! ascend with an eased (cosine) profile, then trace a horizontal circle
//! with yaw following the tangent and the angular rate ramping in. The pose
//! is C1-continuous in time: a velocity step anywhere would jerk a freshly
//! grasped object loose no matter how firm the grip.

use nalgebra::{UnitQuaternion, Vector3};

use crate::geom::Pose;
use crate::sim::GraspEnvConfig;

/// Spin phase angle and its rate at `u` seconds past the ascent end: the
/// rate grows linearly over the ease window, then stays at `spin_rate`.
fn spin_phase(cfg: &GraspEnvConfig, u: f64) -> (f64, f64) {
    let te = cfg.spin_ease_duration;
    if u < te {
        let rate = cfg.spin_rate * u / te;
        (0.5 * rate * u, rate)
    } else {
        (cfg.spin_rate * (u - 0.5 * te), cfg.spin_rate)
    }
}

/// End-effector pose at time `t` since episode start.
pub fn arm_script_pose(cfg: &GraspEnvConfig, t: f64, pregrasp: &Pose) -> Pose {
    let t = t.max(0.0);
    if t < cfg.hold_duration {
        return *pregrasp;
    }
    let ascent_end = cfg.hold_duration + cfg.ascent_duration;
    if t < ascent_end {
        let s = (t - cfg.hold_duration) / cfg.ascent_duration;
        let rise = 0.5 * (1.0 - (std::f64::consts::PI * s).cos());
        return Pose::new(
            pregrasp.position + Vector3::new(0.0, 0.0, cfg.lift_height * rise),
            pregrasp.orientation,
        );
    }
    // Circle through the ascent endpoint: center one radius along -x so the
    // pose is continuous at the handoff, yaw advancing with the tangent.
    let (phi, _) = spin_phase(cfg, t - ascent_end);
    let top = pregrasp.position + Vector3::new(0.0, 0.0, cfg.lift_height);
    let center = top - Vector3::new(cfg.spin_radius, 0.0, 0.0);
    let position = center + cfg.spin_radius * Vector3::new(phi.cos(), phi.sin(), 0.0);
    let orientation =
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), phi) * pregrasp.orientation;
    Pose::new(position, orientation)
}

/// Linear and angular end-effector velocity of the script at time `t`.
pub fn arm_script_velocity(cfg: &GraspEnvConfig, t: f64) -> (Vector3<f64>, Vector3<f64>) {
    let t = t.max(0.0);
    if t < cfg.hold_duration {
        return (Vector3::zeros(), Vector3::zeros());
    }
    let ascent_end = cfg.hold_duration + cfg.ascent_duration;
    if t < ascent_end {
        let s = (t - cfg.hold_duration) / cfg.ascent_duration;
        let rate = 0.5 * std::f64::consts::PI * (std::f64::consts::PI * s).sin()
            / cfg.ascent_duration;
        return (Vector3::new(0.0, 0.0, cfg.lift_height * rate), Vector3::zeros());
    }
    let (phi, rate) = spin_phase(cfg, t - ascent_end);
    let v = cfg.spin_radius * rate * Vector3::new(-phi.sin(), phi.cos(), 0.0);
    (v, Vector3::new(0.0, 0.0, rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> GraspEnvConfig {
        GraspEnvConfig::default()
    }

    fn pregrasp() -> Pose {
        Pose::new(
            Vector3::new(0.05, -0.02, 0.09),
            UnitQuaternion::from_euler_angles(std::f64::consts::PI, 0.0, 0.3),
        )
    }

    #[test]
    fn holds_pregrasp_first_second() {
        let c = cfg();
        let p = pregrasp();
        for t in [0.0, 0.3, 0.5, 0.999] {
            let pose = arm_script_pose(&c, t, &p);
            assert_eq!(pose.position, p.position);
            assert_eq!(pose.orientation, p.orientation);
        }
    }

    #[test]
    fn ascent_is_smooth_and_continuous() {
        let c = cfg();
        let p = pregrasp();
        // Cosine ease crosses half height at half time.
        let mid = arm_script_pose(&c, 1.5, &p);
        assert!((mid.position.z - (p.position.z + 0.5 * c.lift_height)).abs() < 1e-12);
        assert!((mid.position.x - p.position.x).abs() < 1e-12);

        // C0 and C1 at every phase boundary, including the spin-up end.
        let boundaries = [
            c.hold_duration,
            c.hold_duration + c.ascent_duration,
            c.hold_duration + c.ascent_duration + c.spin_ease_duration,
        ];
        for t in boundaries {
            let before = arm_script_pose(&c, t - 1e-9, &p);
            let after = arm_script_pose(&c, t + 1e-9, &p);
            assert!((before.position - after.position).norm() < 1e-6);
            assert!(before.orientation.angle_to(&after.orientation) < 1e-6);
            let (vb, wb) = arm_script_velocity(&c, t - 1e-9);
            let (va, wa) = arm_script_velocity(&c, t + 1e-9);
            assert!((vb - va).norm() < 1e-6, "velocity step at t={t}");
            assert!((wb - wa).norm() < 1e-6, "angular rate step at t={t}");
        }
    }

    #[test]
    fn spin_is_periodic() {
        let c = cfg();
        let p = pregrasp();
        // Compare two times past the spin-up, one full turn apart.
        let t0 = c.hold_duration + c.ascent_duration + c.spin_ease_duration;
        let period = 2.0 * std::f64::consts::PI / c.spin_rate;
        let a = arm_script_pose(&c, t0, &p);
        let b = arm_script_pose(&c, t0 + period, &p);
        assert!((a.position - b.position).norm() < 1e-9);
        assert!(a.orientation.angle_to(&b.orientation) < 1e-9);
        // Spin stays at lift height.
        assert!((a.position.z - (p.position.z + c.lift_height)).abs() < 1e-12);
    }

    #[test]
    fn sampled_step_size_bounded_by_speed() {
        let c = cfg();
        let p = pregrasp();
        let dt = 1.0 / c.control_hz;
        let spin_speed = c.spin_radius * c.spin_rate;
        // Cosine ease peaks at pi/2 times the mean ascent rate.
        let ascent_peak =
            0.5 * std::f64::consts::PI * c.lift_height / c.ascent_duration;
        let bound = spin_speed.max(ascent_peak) * dt * 1.5;
        let mut prev = arm_script_pose(&c, 0.0, &p);
        for k in 1..400 {
            let t = k as f64 * dt;
            let cur = arm_script_pose(&c, t, &p);
            assert!(
                (cur.position - prev.position).norm() < bound,
                "jump at t={t}"
            );
            prev = cur;
        }
    }

    #[test]
    fn velocity_matches_finite_difference() {
        let c = cfg();
        let p = pregrasp();
        let h = 1e-7;
        for t in [0.5, 1.3, 1.5, 1.8, 2.2, 2.5, 4.0, 7.3] {
            let (v, w) = arm_script_velocity(&c, t);
            let a = arm_script_pose(&c, t - h, &p);
            let b = arm_script_pose(&c, t + h, &p);
            let fd = (b.position - a.position) / (2.0 * h);
            assert!((v - fd).norm() < 1e-5, "linear velocity at t={t}");
            // Angular rate about z from quaternion difference.
            let dq = b.orientation * a.orientation.inverse();
            let angle = dq.angle() / (2.0 * h);
            assert!((w.norm() - angle).abs() < 1e-4, "angular rate at t={t}");
        }
        let (v, w) = arm_script_velocity(&c, 0.2);
        assert_eq!(v, Vector3::zeros());
        assert_eq!(w, Vector3::zeros());
    }
}
