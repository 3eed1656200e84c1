//! Temporary probe: scripted-baseline success rates and eval timing at two
//! integration resolutions.

use std::sync::Arc;
use std::time::Instant;

use grasplab_core::eigengrasp::dataset::generate_synthetic;
use grasplab_core::eigengrasp::extract_eigengrasps;
use grasplab_core::hand::{HandModel, JOINT_COUNT};
use grasplab_core::sim::{ActionMode, GraspEnv, GraspEnvConfig};
use grasplab_rl::eval::evaluate_hardcoded;

fn flex(q: f64) -> f64 {
    ((q + 0.5) / 2.7) * 2.0 - 1.0
}

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

fn choreography_rate(cfg: &GraspEnvConfig, model: Arc<HandModel>, episodes: u64) -> (f64, f64) {
    let mut wins = 0u64;
    let mut ret_sum = 0.0;
    for seed in 0..episodes {
        let mut env = GraspEnv::new(cfg.clone(), model.clone(), ActionMode::Unconstrained).unwrap();
        env.reset(seed * 7919 + 17).unwrap();
        let mut step = 0u32;
        let mut ret = 0.0;
        let last = loop {
            step += 1;
            let out = env.step(&pick_action(step)).unwrap();
            ret += out.reward;
            if out.done {
                break out;
            }
        };
        if last.info.end == Some(grasplab_core::sim::EndReason::Horizon)
            && last.info.terms.r_threshold == 1
        {
            wins += 1;
        }
        ret_sum += ret;
    }
    (wins as f64 / episodes as f64, ret_sum / episodes as f64)
}

fn main() {
    let episodes: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(50);
    let model = Arc::new(HandModel::default());
    let data = generate_synthetic(&model, 20, 30, 7);
    let basis = Arc::new(extract_eigengrasps(&data, 9).unwrap());

    for substeps in [128u32, 64] {
        let mut cfg = GraspEnvConfig::default();
        cfg.substeps = substeps;

        let t0 = Instant::now();
        let (rate, mean_ret) = choreography_rate(&cfg, model.clone(), episodes as u64);
        println!(
            "substeps {substeps}: choreography success {rate:.3} mean_return {mean_ret:.1} ({:.1}s)",
            t0.elapsed().as_secs_f64()
        );

        let t0 = Instant::now();
        match evaluate_hardcoded(&cfg, model.clone(), basis.clone(), episodes, 1234, None) {
            Ok(r) => println!(
                "substeps {substeps}: open-close success {:.3} mean_return {:.1} std {:.1} ({:.1}s)",
                r.success_rate,
                r.mean_return,
                r.std_return,
                t0.elapsed().as_secs_f64()
            ),
            Err(e) => println!("substeps {substeps}: open-close FAILED: {e}"),
        }
    }
}
