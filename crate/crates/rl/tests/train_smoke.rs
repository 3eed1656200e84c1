//! End-to-end training smoke: a tiny run is reproducible curve-for-curve,
//! checkpoints round-trip through disk, and action-space arity is enforced
//! between checkpoints and envs in both directions.

use std::sync::Arc;

use grasplab_core::eigengrasp::dataset::generate_synthetic;
use grasplab_core::eigengrasp::{extract_eigengrasps, EigengraspBasis};
use grasplab_core::hand::HandModel;
use grasplab_core::sim::GraspEnvConfig;
use grasplab_core::Error;
use grasplab_rl::checkpoint::{file_sha256, load_checkpoint, save_checkpoint};
use grasplab_rl::eval::evaluate;
use grasplab_rl::net::PolicyNet;
use grasplab_rl::ppo::PPOConfig;
use grasplab_rl::train::{save_curves, train, TrainReport};
use grasplab_rl::TrainMode;

fn tiny_env() -> GraspEnvConfig {
    let mut cfg = GraspEnvConfig::default();
    cfg.horizon = 20;
    cfg.env_count = 4;
    cfg
}

fn tiny_ppo(seed: u64) -> PPOConfig {
    PPOConfig {
        env_count: 4,
        epochs: 3,
        rollout_len: 16,
        bptt: 8,
        minibatches: 2,
        mini_epochs: 1,
        seed,
        ..PPOConfig::default()
    }
}

fn test_basis(model: &HandModel) -> Arc<EigengraspBasis> {
    let data = generate_synthetic(model, 12, 20, 7);
    Arc::new(extract_eigengrasps(&data, 9).unwrap())
}

fn run_once(seed: u64) -> (PolicyNet<f32>, TrainReport) {
    let model = Arc::new(HandModel::default());
    let basis = test_basis(&model);
    train(
        &tiny_ppo(seed),
        &tiny_env(),
        model,
        Some(basis),
        TrainMode::Eigengrasp,
        |_| {},
    )
    .unwrap()
}

#[test]
fn same_seed_runs_reproduce_curves_and_weights() {
    let (net_a, report_a) = run_once(12);
    let (net_b, report_b) = run_once(12);

    assert_eq!(report_a.stats.len(), 3, "epoch count matches config");
    for (i, s) in report_a.stats.iter().enumerate() {
        assert_eq!(s.epoch as usize, i);
    }

    let dir = tempfile::tempdir().unwrap();
    let pa = dir.path().join("a.jsonl");
    let pb = dir.path().join("b.jsonl");
    save_curves(&report_a, &pa).unwrap();
    save_curves(&report_b, &pb).unwrap();
    assert_eq!(
        std::fs::read(&pa).unwrap(),
        std::fs::read(&pb).unwrap(),
        "curve files differ between identical runs"
    );

    for ((na, va), (nb, vb)) in net_a.param_views().iter().zip(net_b.param_views().iter()) {
        assert_eq!(na, nb);
        assert_eq!(va, vb, "weights differ in {na}");
    }
}

#[test]
fn trained_checkpoint_roundtrips_and_reports_an_id() {
    let (net, _) = run_once(5);
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("policy.ckpt");
    let p2 = dir.path().join("policy2.ckpt");
    save_checkpoint(&net, TrainMode::Eigengrasp, &p1).unwrap();
    let (loaded, mode) = load_checkpoint(&p1).unwrap();
    assert_eq!(mode, TrainMode::Eigengrasp);
    assert_eq!(loaded.act_dim, 9);
    save_checkpoint(&loaded, mode, &p2).unwrap();
    assert_eq!(
        std::fs::read(&p1).unwrap(),
        std::fs::read(&p2).unwrap(),
        "save -> load -> save is not byte-identical"
    );
    let sha = file_sha256(&p1).unwrap();
    assert_eq!(sha.len(), 64);
    assert_eq!(sha, file_sha256(&p2).unwrap());
}

#[test]
fn arity_is_enforced_between_checkpoints_and_envs_both_ways() {
    let model = Arc::new(HandModel::default());
    let basis = test_basis(&model);
    let cfg = tiny_env();
    let dir = tempfile::tempdir().unwrap();

    // 9-dim eigengrasp checkpoint against the 16-dim raw-joint env.
    let nine = PolicyNet::<f32>::init(9, true, 0, -0.5);
    let p9 = dir.path().join("nine.ckpt");
    save_checkpoint(&nine, TrainMode::Eigengrasp, &p9).unwrap();
    let (nine, _) = load_checkpoint(&p9).unwrap();
    let err = evaluate(
        &nine,
        TrainMode::Unconstrained,
        &cfg,
        model.clone(),
        None,
        2,
        0,
        None,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Arity { .. }), "{err}");

    // 16-dim unconstrained checkpoint against the 9-dim eigengrasp env.
    let sixteen = PolicyNet::<f32>::init(16, true, 0, -0.5);
    let p16 = dir.path().join("sixteen.ckpt");
    save_checkpoint(&sixteen, TrainMode::Unconstrained, &p16).unwrap();
    let (sixteen, _) = load_checkpoint(&p16).unwrap();
    let err = evaluate(
        &sixteen,
        TrainMode::Eigengrasp,
        &cfg,
        model.clone(),
        Some(basis.clone()),
        2,
        0,
        None,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Arity { .. }), "{err}");

    // Matched pairings pass and report sane rates.
    let report = evaluate(
        &nine,
        TrainMode::Eigengrasp,
        &cfg,
        model.clone(),
        Some(basis),
        2,
        0,
        None,
    )
    .unwrap();
    assert!(report.success_rate >= 0.0 && report.success_rate <= 1.0);
    let report = evaluate(
        &sixteen,
        TrainMode::Unconstrained,
        &cfg,
        model,
        None,
        2,
        0,
        None,
    )
    .unwrap();
    assert!(report.success_rate >= 0.0 && report.success_rate <= 1.0);
}

#[test]
fn evaluation_is_deterministic_and_worker_independent() {
    let model = Arc::new(HandModel::default());
    let basis = test_basis(&model);
    let cfg = tiny_env();
    let net = PolicyNet::<f32>::init(9, true, 33, -0.5);

    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                evaluate(
                    &net,
                    TrainMode::Eigengrasp,
                    &cfg,
                    model.clone(),
                    Some(basis.clone()),
                    6,
                    9,
                    None,
                )
                .unwrap()
            })
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}
