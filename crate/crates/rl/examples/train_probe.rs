//! Temporary probe: one desk-scale training run with live epoch stats.

use std::sync::Arc;
use std::time::Instant;

use grasplab_core::eigengrasp::dataset::generate_synthetic;
use grasplab_core::eigengrasp::extract_eigengrasps;
use grasplab_core::hand::HandModel;
use grasplab_core::sim::GraspEnvConfig;
use grasplab_rl::ppo::PPOConfig;
use grasplab_rl::train::train;
use grasplab_rl::TrainMode;

fn main() {
    let mut args = std::env::args().skip(1);
    let mode: TrainMode = args.next().unwrap_or_else(|| "eigengrasp".into()).parse().unwrap();
    let epochs: u32 = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let model = Arc::new(HandModel::default());
    let data = generate_synthetic(&model, 20, 30, 7);
    let basis = Arc::new(extract_eigengrasps(&data, 9).unwrap());

    let mut cfg = PPOConfig::default();
    cfg.epochs = epochs;
    cfg.seed = seed;
    let env_cfg = GraspEnvConfig::default();

    let t0 = Instant::now();
    let (_, report) = train(&cfg, &env_cfg, model, Some(basis), mode, |s| {
        if s.epoch % 5 == 0 || s.epoch + 1 == epochs {
            println!(
                "epoch {:3}  ret {:7.1} ± {:5.1}  len {:5.1}  success {:.3}  pl {:+.4}  vl {:8.1}  ent {:6.2}  clip {:.2}  gn {:7.2}  [{:.0}s]",
                s.epoch, s.mean_return, s.std_return, s.mean_length, s.success_rate,
                s.policy_loss, s.value_loss, s.entropy, s.clip_fraction, s.grad_norm,
                t0.elapsed().as_secs_f64()
            );
        }
    })
    .unwrap();
    let last = report.last();
    println!(
        "done mode {mode} seed {seed}: final ret {:.1} success {:.3} wall {:.0}s",
        last.mean_return, last.success_rate, report.wall_time_s
    );
}
