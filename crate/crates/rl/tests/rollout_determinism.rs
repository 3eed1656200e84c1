//! Rollout collection is a pure function of (config, seed): repeated runs
//! are bitwise identical and the rayon worker count does not leak into any
//! number.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use grasplab_core::eigengrasp::dataset::generate_synthetic;
use grasplab_core::eigengrasp::{extract_eigengrasps, EigengraspBasis};
use grasplab_core::hand::HandModel;
use grasplab_core::sim::{ActionMode, GraspEnvConfig};
use grasplab_rl::net::PolicyNet;
use grasplab_rl::rollout::{collect_rollout, RolloutBuffer, VecEnv};

fn small_cfg() -> GraspEnvConfig {
    let mut cfg = GraspEnvConfig::default();
    cfg.horizon = 24;
    cfg.env_count = 4;
    cfg
}

fn test_basis(model: &HandModel) -> EigengraspBasis {
    let data = generate_synthetic(model, 12, 20, 7);
    extract_eigengrasps(&data, 9).unwrap()
}

fn collect_once(threads: Option<usize>, seed: u64) -> (RolloutBuffer, Vec<f64>) {
    let model = Arc::new(HandModel::default());
    let basis = Arc::new(test_basis(&model));
    let cfg = small_cfg();
    let net = PolicyNet::<f32>::init(9, true, 41, -0.5);

    let run = || {
        let mut venv = VecEnv::new(
            &cfg,
            model.clone(),
            ActionMode::Eigengrasp(basis.clone()),
            4,
            seed,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hidden = net.initial_hidden(4);
        // Long enough that every env finishes at least one episode and
        // auto-resets mid-collection.
        let buf = collect_rollout(&net, &mut venv, 32, 8, &mut rng, &mut hidden).unwrap();
        let stats: Vec<f64> = venv
            .drain_completed()
            .iter()
            .flat_map(|s| [s.ret, s.len as f64, s.success as u8 as f64])
            .collect();
        (buf, stats)
    };

    match threads {
        None => run(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(run),
    }
}

fn assert_buffers_identical(a: &RolloutBuffer, b: &RolloutBuffer) {
    assert_eq!(a.obs, b.obs);
    assert_eq!(a.actions, b.actions);
    assert_eq!(a.log_probs, b.log_probs);
    assert_eq!(a.values, b.values);
    assert_eq!(a.rewards, b.rewards);
    assert_eq!(a.dones, b.dones);
    assert_eq!(a.hidden0, b.hidden0);
    assert_eq!(a.bootstrap, b.bootstrap);
}

#[test]
fn same_seed_rollouts_are_bitwise_identical() {
    let (a, sa) = collect_once(None, 5);
    let (b, sb) = collect_once(None, 5);
    assert_buffers_identical(&a, &b);
    assert_eq!(sa, sb);
    assert!(!sa.is_empty(), "no episodes finished; lengthen the rollout");
}

#[test]
fn different_seeds_differ() {
    let (a, _) = collect_once(None, 5);
    let (b, _) = collect_once(None, 6);
    assert_ne!(a.obs, b.obs);
}

#[test]
fn worker_count_does_not_change_any_number() {
    let (a, sa) = collect_once(Some(1), 9);
    let (b, sb) = collect_once(Some(4), 9);
    assert_buffers_identical(&a, &b);
    assert_eq!(sa, sb);
}

#[test]
fn episode_stats_are_sane() {
    let (_, stats) = collect_once(None, 3);
    assert_eq!(stats.len() % 3, 0);
    for chunk in stats.chunks(3) {
        assert!(chunk[0].is_finite());
        assert!(chunk[1] >= 1.0 && chunk[1] <= 24.0);
        assert!(chunk[2] == 0.0 || chunk[2] == 1.0);
    }
}
