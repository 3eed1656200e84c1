//! Greedy policy evaluation and the scripted open-then-close baseline.
//!
//! Evaluation episodes take the action mean (no exploration noise), run in
//! parallel, and are seeded per episode index, so a report is deterministic
//! and independent of the worker count.

use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;

use grasplab_core::eigengrasp::{compress, EigengraspBasis};
use grasplab_core::hand::{HandModel, HandPose, JOINT_COUNT};
use grasplab_core::sim::{
    save_trace, ActionMode, EndReason, EpisodeTrace, GraspEnv, GraspEnvConfig, Observation,
    OBS_DIM,
};
use grasplab_core::{Error, Result};

use crate::net::PolicyNet;
use crate::rollout::episode_seed;
use crate::train::action_mode_for;
use crate::TrainMode;

/// One evaluation episode's outcome.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct EpisodeEval {
    pub index: usize,
    pub seed: u64,
    pub ret: f64,
    pub len: u32,
    pub success: bool,
}

/// Aggregate over a fixed set of evaluation episodes.
#[derive(Clone, Debug, serde::Serialize)]
pub struct EvalReport {
    pub mean_return: f64,
    pub std_return: f64,
    pub success_rate: f64,
    pub episodes: Vec<EpisodeEval>,
}

impl EvalReport {
    fn from_episodes(episodes: Vec<EpisodeEval>) -> EvalReport {
        let n = episodes.len() as f64;
        let mean = episodes.iter().map(|e| e.ret).sum::<f64>() / n;
        let var = episodes.iter().map(|e| (e.ret - mean) * (e.ret - mean)).sum::<f64>() / n;
        let success = episodes.iter().filter(|e| e.success).count() as f64 / n;
        EvalReport {
            mean_return: mean,
            std_return: var.sqrt(),
            success_rate: success,
            episodes,
        }
    }
}

/// Run one episode under a step controller; optionally record a trace.
fn run_episode(
    cfg: &GraspEnvConfig,
    model: Arc<HandModel>,
    action_mode: ActionMode,
    index: usize,
    seed: u64,
    trace_path: Option<std::path::PathBuf>,
    mut act: impl FnMut(u32, &Observation) -> Vec<f64>,
) -> Result<EpisodeEval> {
    let mut env = GraspEnv::new(cfg.clone(), model, action_mode)?;
    let ep_seed = episode_seed(seed, index, 0);
    let mut obs = env.reset(ep_seed)?;
    let mut ret = 0.0;
    let mut len = 0u32;
    let mut steps = Vec::new();
    loop {
        let action = act(len, &obs);
        let out = env.step(&action)?;
        if trace_path.is_some() {
            steps.push(env.trace_step(&action, &out.info));
        }
        ret += out.reward;
        len += 1;
        obs = out.obs;
        if out.done {
            let end = out.info.end.expect("done step carries an end reason");
            if let Some(path) = trace_path {
                let trace = EpisodeTrace { steps, end };
                save_trace(&trace, &path)?;
            }
            return Ok(EpisodeEval {
                index,
                seed: ep_seed,
                ret,
                len,
                success: end == EndReason::Horizon && out.info.terms.r_threshold == 1,
            });
        }
    }
}

fn finish(
    results: Result<Vec<EpisodeEval>>,
) -> Result<EvalReport> {
    Ok(EvalReport::from_episodes(results?))
}

fn trace_path_for(dir: Option<&Path>, index: usize) -> Option<std::path::PathBuf> {
    dir.map(|d| d.join(format!("episode_{index:03}.jsonl")))
}

/// Evaluate a trained policy with deterministic (mean) actions over
/// `episodes` fresh episodes. Pass `trace_dir` to record one replayable
/// trace file per episode.
pub fn evaluate(
    net: &PolicyNet<f32>,
    mode: TrainMode,
    env_cfg: &GraspEnvConfig,
    model: Arc<HandModel>,
    basis: Option<Arc<EigengraspBasis>>,
    episodes: usize,
    seed: u64,
    trace_dir: Option<&Path>,
) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(Error::InvalidInput(
            "evaluation needs at least one episode".into(),
        ));
    }
    env_cfg.validate()?;
    let action_mode = action_mode_for(mode, basis)?;
    if net.act_dim != action_mode.action_dim() {
        return Err(Error::Arity {
            what: "policy action dim vs env action dim",
            expected: action_mode.action_dim(),
            got: net.act_dim,
        });
    }
    if net.recurrent != mode.recurrent() {
        return Err(Error::InvalidInput(format!(
            "policy recurrence does not match mode {mode}"
        )));
    }

    let results = (0..episodes)
        .into_par_iter()
        .map(|i| {
            let mut hidden = net.initial_hidden(1);
            run_episode(
                env_cfg,
                model.clone(),
                action_mode.clone(),
                i,
                seed,
                trace_path_for(trace_dir, i),
                |_, obs| {
                    let mut x = Array2::<f32>::zeros((1, OBS_DIM));
                    for (j, v) in obs.data.iter().enumerate() {
                        x[[0, j]] = *v as f32;
                    }
                    let (out, _) = net.forward_step(x.view(), hidden.view());
                    hidden = out.hidden;
                    out.mean.row(0).iter().map(|&v| v as f64).collect()
                },
            )
        })
        .collect::<Result<Vec<_>>>();
    finish(results)
}

/// Fixed open-then-close controller in the eigengrasp space: blend linearly
/// from the flat-hand coefficients to the full-flexion coefficients over
/// `close_time_s`, then hold. No feedback is used.
#[derive(Clone, Debug)]
pub struct ScriptedGrasp {
    a_open: Vec<f64>,
    a_closed: Vec<f64>,
    close_time_s: f64,
}

impl ScriptedGrasp {
    pub fn new(basis: &EigengraspBasis, model: &HandModel) -> Result<ScriptedGrasp> {
        let open = HandPose::zeros();
        let mut closed_angles = model.limits_hi();
        for d in 0..JOINT_COUNT / 4 {
            closed_angles[4 * d] = 0.0;
        }
        let closed = HandPose::from_angles(closed_angles);
        let clamp = |v: Vec<f64>| v.into_iter().map(|c| c.clamp(-1.0, 1.0)).collect();
        Ok(ScriptedGrasp {
            a_open: clamp(compress(basis, &open, &basis.scales)?),
            a_closed: clamp(compress(basis, &closed, &basis.scales)?),
            close_time_s: 1.0,
        })
    }

    /// Coefficients at `t` seconds into the episode.
    pub fn coeffs(&self, t: f64) -> Vec<f64> {
        let u = (t / self.close_time_s).clamp(0.0, 1.0);
        self.a_open
            .iter()
            .zip(&self.a_closed)
            .map(|(&o, &c)| (1.0 - u) * o + u * c)
            .collect()
    }
}

/// Evaluate the scripted baseline on the same episode seeds [`evaluate`]
/// uses, so the two reports are directly comparable.
pub fn evaluate_hardcoded(
    env_cfg: &GraspEnvConfig,
    model: Arc<HandModel>,
    basis: Arc<EigengraspBasis>,
    episodes: usize,
    seed: u64,
    trace_dir: Option<&Path>,
) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(Error::InvalidInput(
            "evaluation needs at least one episode".into(),
        ));
    }
    env_cfg.validate()?;
    let script = ScriptedGrasp::new(&basis, &model)?;
    let dt = env_cfg.control_dt();
    let action_mode = ActionMode::Eigengrasp(basis);

    let results = (0..episodes)
        .into_par_iter()
        .map(|i| {
            run_episode(
                env_cfg,
                model.clone(),
                action_mode.clone(),
                i,
                seed,
                trace_path_for(trace_dir, i),
                |step, _| script.coeffs(step as f64 * dt),
            )
        })
        .collect::<Result<Vec<_>>>();
    finish(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_basis() -> EigengraspBasis {
        // Identity-like basis over the first 9 joints for cheap tests.
        let mut eigvecs = Vec::new();
        for i in 0..9 {
            let mut v = vec![0.0; JOINT_COUNT];
            v[i] = 1.0;
            eigvecs.push(v);
        }
        EigengraspBasis {
            version: 1,
            m: 9,
            mean: vec![0.1; JOINT_COUNT],
            eigvecs,
            singular_values: vec![1.0; 9],
            scales: vec![0.7; 9],
        }
    }

    #[test]
    fn scripted_grasp_blends_and_saturates() {
        let model = HandModel::default();
        let basis = test_basis();
        let s = ScriptedGrasp::new(&basis, &model).unwrap();
        let a0 = s.coeffs(0.0);
        let half = s.coeffs(0.5);
        let a1 = s.coeffs(1.0);
        let late = s.coeffs(7.0);
        assert_eq!(a1, late);
        for j in 0..9 {
            assert!((half[j] - 0.5 * (a0[j] + a1[j])).abs() < 1e-12);
            assert!(a0[j] >= -1.0 && a0[j] <= 1.0);
            assert!(a1[j] >= -1.0 && a1[j] <= 1.0);
        }
        // The closing script must actually command flexion somewhere.
        assert!(a0.iter().zip(&a1).any(|(o, c)| (o - c).abs() > 1e-6));
    }

    #[test]
    fn eval_rejects_zero_episodes_and_wrong_arity() {
        let model = Arc::new(HandModel::default());
        let cfg = GraspEnvConfig::default();
        let net = PolicyNet::<f32>::init(9, true, 0, -0.5);
        let err = evaluate(
            &net,
            TrainMode::Unconstrained,
            &cfg,
            model.clone(),
            None,
            4,
            0,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Arity { .. }), "{err}");
        let err = evaluate(
            &net,
            TrainMode::Eigengrasp,
            &cfg,
            model,
            Some(Arc::new(test_basis())),
            0,
            0,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)), "{err}");
    }
}
