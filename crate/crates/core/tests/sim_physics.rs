//! Whole-environment physics checks: ballistic exactness, resting contact,
//! energy dissipation, determinism, and exact termination timing.

use std::sync::Arc;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use grasplab_core::eigengrasp::dataset::generate_synthetic;
use grasplab_core::eigengrasp::extract_eigengrasps;
use grasplab_core::geom::Pose;
use grasplab_core::hand::{HandModel, JOINT_COUNT};
use grasplab_core::sim::{ActionMode, GraspEnv, GraspEnvConfig};

fn make_env(cfg: GraspEnvConfig, mode: ActionMode) -> GraspEnv {
    GraspEnv::new(cfg, Arc::new(HandModel::default()), mode).unwrap()
}

/// Config with motors off so the hand never disturbs the object.
fn passive_config() -> GraspEnvConfig {
    GraspEnvConfig {
        pd_stiffness: 0.0,
        pd_damping: 0.0,
        ..GraspEnvConfig::default()
    }
}

#[test]
fn ballistic_flight_matches_closed_form() {
    let cfg = GraspEnvConfig {
        termination_distance: 100.0,
        ..GraspEnvConfig::default()
    };
    let g = cfg.gravity;
    let dt = cfg.substep_dt();
    let steps = 30u32;
    let n = (steps * cfg.substeps) as f64;

    let mut env = make_env(cfg, ActionMode::Unconstrained);
    env.reset(42).unwrap();

    let p0 = Vector3::new(0.4, -0.2, 6.0);
    let v0 = Vector3::new(0.3, -0.2, 0.5);
    // Spin about a principal axis so the gyroscopic torque vanishes exactly.
    let w0 = Vector3::new(0.0, 0.0, 3.0);
    let q0 = UnitQuaternion::identity();
    env.set_object_state(Pose::new(p0, q0), v0, w0);

    for _ in 0..steps {
        env.step(&[0.0; JOINT_COUNT]).unwrap();
    }

    // Exact discrete solution of semi-implicit Euler under constant gravity:
    // x_n = x0 + n dt v0 + a dt^2 n(n+1)/2.
    let expect = p0 + n * dt * v0
        + Vector3::new(0.0, 0.0, -g) * dt * dt * (n * (n + 1.0) / 2.0);
    let got = env.object_pose().position;
    assert!(
        (got - expect).norm() < 1e-9,
        "discrete mismatch: {got:?} vs {expect:?}"
    );
    // And the continuous parabola up to the known O(g T dt / 2) bias.
    let t = n * dt;
    let cont = p0 + t * v0 + Vector3::new(0.0, 0.0, -0.5 * g * t * t);
    assert!((got - cont).norm() < 3e-3);

    // Spin about a principal axis: each substep rotates by 2 atan(|w| dt / 2).
    let per = 2.0 * (w0.norm() * dt / 2.0).atan();
    let expect_q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), n * per) * q0;
    let angle_err = env.object_pose().orientation.angle_to(&expect_q);
    assert!(angle_err < 1e-9, "rotation mismatch: {angle_err}");
    // Velocity stays exact.
    let (v, w) = env.object_velocity();
    assert!((v - (v0 + Vector3::new(0.0, 0.0, -g) * n * dt)).norm() < 1e-9);
    assert!((w - w0).norm() < 1e-12);
}

#[test]
fn object_settles_on_ground_within_one_second() {
    for seed in [0u64, 1, 2, 3, 4] {
        let mut env = make_env(passive_config(), ActionMode::Unconstrained);
        env.reset(seed).unwrap();
        for _ in 0..30 {
            env.step(&[0.0; JOINT_COUNT]).unwrap();
        }
        let low = env.object_lowest_z();
        let (v, w) = env.object_velocity();
        assert!(
            low.abs() < 1e-3,
            "seed {seed}: lowest point {low} not on the ground"
        );
        assert!(v.norm() < 1e-3, "seed {seed}: still moving at {v:?}");
        assert!(w.norm() < 1e-2, "seed {seed}: still rotating at {w:?}");
    }
}

#[test]
fn drop_dissipates_energy_monotonically() {
    for seed in [7u64, 8, 9] {
        let cfg = GraspEnvConfig {
            termination_distance: 100.0,
            ..passive_config()
        };
        let mut env = make_env(cfg, ActionMode::Unconstrained);
        env.reset(seed).unwrap();
        // Drop well away from the parked hand so only the ground acts.
        let pose = env.object_pose();
        env.set_object_state(
            Pose::new(
                pose.position + Vector3::new(0.6, 0.6, 0.05),
                pose.orientation,
            ),
            Vector3::zeros(),
            Vector3::zeros(),
        );
        let e0 = env.mechanical_energy();
        assert!(e0 > 0.0);
        let mut prev = e0;
        for _ in 0..90 {
            env.step(&[0.0; JOINT_COUNT]).unwrap();
            let e = env.mechanical_energy();
            assert!(
                e <= prev + 0.01 * e0.abs(),
                "seed {seed}: energy rose from {prev} to {e} (e0 {e0})"
            );
            prev = e;
        }
        assert!(
            prev < 0.75 * e0,
            "seed {seed}: no dissipation, e0 {e0} -> {prev}"
        );
    }
}

#[test]
fn same_seed_gives_bitwise_identical_trajectories() {
    let mut a = make_env(GraspEnvConfig::default(), ActionMode::Unconstrained);
    let mut b = make_env(GraspEnvConfig::default(), ActionMode::Unconstrained);
    let oa = a.reset(11).unwrap();
    let ob = b.reset(11).unwrap();
    assert_eq!(oa.data, ob.data);
    assert_eq!(a.object_pose().to_array7(), b.object_pose().to_array7());

    for k in 0..40 {
        let mut action = [0.0; JOINT_COUNT];
        for (i, v) in action.iter_mut().enumerate() {
            *v = (0.3 * (k as f64) + 0.7 * i as f64).sin();
        }
        let ra = a.step(&action).unwrap();
        let rb = b.step(&action).unwrap();
        assert_eq!(ra.obs.data, rb.obs.data, "step {k}");
        assert_eq!(ra.reward.to_bits(), rb.reward.to_bits(), "step {k}");
        assert_eq!(
            a.object_pose().to_array7(),
            b.object_pose().to_array7(),
            "step {k}"
        );
        assert_eq!(a.joint_angles(), b.joint_angles(), "step {k}");
        assert_eq!(ra.done, rb.done);
        if ra.done {
            break;
        }
    }
}

#[test]
fn reset_is_deterministic_per_seed_and_varies_across_seeds() {
    let mut a = make_env(GraspEnvConfig::default(), ActionMode::Unconstrained);
    let mut b = make_env(GraspEnvConfig::default(), ActionMode::Unconstrained);
    let oa = a.reset(99).unwrap();
    let ob = b.reset(99).unwrap();
    assert_eq!(oa.data, ob.data);
    assert_eq!(a.object_spec().mass, b.object_spec().mass);
    assert_eq!(a.dr(), b.dr());
    assert_eq!(a.pregrasp_pose().to_array7(), b.pregrasp_pose().to_array7());

    let oc = b.reset(100).unwrap();
    assert_ne!(oa.data, oc.data);
    assert_ne!(a.object_spec().mass, b.object_spec().mass);
}

/// Independent re-derivation of the scripted palm point during hold and
/// ascent, straight from the config fields.
fn palm_point_oracle(cfg: &GraspEnvConfig, pregrasp: &Pose, t: f64) -> Vector3<f64> {
    let lift = if t < cfg.hold_duration {
        0.0
    } else if t < cfg.hold_duration + cfg.ascent_duration {
        let s = (t - cfg.hold_duration) / cfg.ascent_duration;
        0.5 * (1.0 - (std::f64::consts::PI * s).cos()) * cfg.lift_height
    } else {
        panic!("oracle only covers hold and ascent");
    };
    pregrasp.position + Vector3::new(0.0, 0.0, lift)
        + pregrasp.orientation.transform_vector(&Vector3::new(0.0, 0.0, 0.01))
}

#[test]
fn distance_termination_fires_at_the_predicted_step() {
    let cfg = passive_config();
    let mut env = make_env(cfg.clone(), ActionMode::Unconstrained);
    env.reset(13).unwrap();
    let com = env.object_pose().position;
    let pregrasp = env.pregrasp_pose();

    // The object never moves (motors off, hand above it), so the first step
    // whose scripted palm point exceeds the cutoff is computable up front.
    let mut predicted = None;
    for k in 1..=60u32 {
        let t = k as f64 / cfg.control_hz;
        let d = (palm_point_oracle(&cfg, &pregrasp, t) - com).norm();
        if d > cfg.termination_distance {
            predicted = Some(k);
            break;
        }
    }
    let predicted = predicted.expect("ascent must exceed the cutoff");
    assert!(predicted > 30, "should survive the whole hold phase");

    loop {
        let out = env.step(&[0.0; JOINT_COUNT]).unwrap();
        if out.done {
            assert_eq!(
                out.info.end,
                Some(grasplab_core::sim::EndReason::PalmDistance)
            );
            assert_eq!(env.steps_taken(), predicted);
            break;
        }
        assert!(env.steps_taken() < predicted);
    }
}

#[test]
fn horizon_termination_fires_exactly_at_the_last_step() {
    let cfg = GraspEnvConfig {
        horizon: 35,
        termination_distance: 100.0,
        ..passive_config()
    };
    let mut env = make_env(cfg, ActionMode::Unconstrained);
    env.reset(17).unwrap();
    for k in 1..=35u32 {
        let out = env.step(&[0.0; JOINT_COUNT]).unwrap();
        if k < 35 {
            assert!(!out.done, "ended early at step {k}");
        } else {
            assert!(out.done);
            assert_eq!(out.info.end, Some(grasplab_core::sim::EndReason::Horizon));
        }
    }
}

fn eigengrasp_mode(m: usize) -> ActionMode {
    let model = HandModel::default();
    let data = generate_synthetic(&model, 40, 30, 7);
    let basis = extract_eigengrasps(&data, m).unwrap();
    ActionMode::Eigengrasp(Arc::new(basis))
}

#[test]
fn random_episodes_never_tunnel_through_the_ground() {
    let episodes_per_mode = 150;
    let mut worst: f64 = 0.0;
    for (mode_idx, mode) in [ActionMode::Unconstrained, eigengrasp_mode(6)]
        .into_iter()
        .enumerate()
    {
        let mut env = make_env(GraspEnvConfig::default(), mode);
        let dim = env.action_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + mode_idx as u64);
        for ep in 0..episodes_per_mode {
            env.reset(2000 * (mode_idx as u64 + 1) + ep).unwrap();
            loop {
                let action: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                let out = env.step(&action).unwrap();
                let pen = (-env.object_lowest_z()).max(0.0);
                worst = worst.max(pen);
                assert!(
                    pen < 2e-3,
                    "mode {mode_idx} episode {ep} step {}: penetration {pen}",
                    env.steps_taken()
                );
                if out.done {
                    break;
                }
            }
        }
    }
    eprintln!("worst penetration over random episodes: {worst:.2e} m");
}

/// Raw action for one joint-angle target, inverting the flexion range map.
fn flex(q: f64) -> f64 {
    ((q + 0.5) / 2.7) * 2.0 - 1.0
}

/// Hand-designed pick choreography: the fingers land their middle-link end
/// spheres on the handle's lower right flank while the thumb sweeps in flat
/// and presses the lower left, popping the handle off the ground into the
/// two-sphere pocket; at liftoff the thumb rolls its distal link underneath,
/// closing the pocket into a cage for the carry.
fn pick_action(step: u32) -> [f64; JOINT_COUNT] {
    let f = if step <= 6 {
        (-0.2, 2.0, 2.2)
    } else if step <= 30 {
        (1.45, 1.53, 2.2)
    } else {
        (1.5, 1.56, 2.2)
    };
    let t = if step <= 4 {
        (-0.2, 2.0, 1.2)
    } else if step <= 30 {
        (1.35, 1.75, -0.35)
    } else {
        (2.0, 0.83, -0.5)
    };
    let mut a = [0.0; JOINT_COUNT];
    for d in 0..3 {
        a[d * 4 + 1] = flex(f.0);
        a[d * 4 + 2] = flex(f.1);
        a[d * 4 + 3] = flex(f.2);
    }
    a[13] = flex(t.0);
    a[14] = flex(t.1);
    a[15] = flex(t.2);
    a
}

/// A scripted pick must carry the object through the lift and the whole
/// spin: the episode ends at the horizon with the object still above the
/// success height, having actually risen off the ground along the way.
#[test]
fn scripted_power_grasp_lifts_and_holds() {
    let mut env = make_env(GraspEnvConfig::default(), ActionMode::Unconstrained);
    env.reset(3).unwrap();
    let mass = env.object_spec().mass;
    let mut max_low = f64::NEG_INFINITY;
    let mut step = 0u32;
    let last = loop {
        step += 1;
        let out = env.step(&pick_action(step)).unwrap();
        max_low = max_low.max(out.info.object_low_z);
        if out.done {
            break out;
        }
    };
    assert_eq!(
        last.info.end,
        Some(grasplab_core::sim::EndReason::Horizon),
        "grasp lost at step {} (mass {mass:.3} kg, low_z max {max_low:.3})",
        env.steps_taken()
    );
    assert_eq!(
        last.info.terms.r_threshold, 1,
        "object not held above the threshold at the end (low_z {})",
        last.info.object_low_z
    );
    assert!(max_low > 0.2, "object never actually rose: {max_low}");
}
