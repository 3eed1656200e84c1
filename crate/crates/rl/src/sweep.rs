//! Multi-seed comparison harness: trains one policy per (mode, seed) pair,
//! scores every run with the same fixed greedy evaluation, and aggregates a
//! per-mode table of reward and success statistics.
//!
//! Final per-run numbers come from a dedicated evaluation pass, not from the
//! last epoch's exploration rollouts, so the table compares policies rather
//! than noise schedules. Row order is deterministic: modes in the order
//! given, seeds in the order given.

use std::sync::Arc;

use serde::Serialize;

use grasplab_core::eigengrasp::EigengraspBasis;
use grasplab_core::hand::HandModel;
use grasplab_core::sim::GraspEnvConfig;
use grasplab_core::{Error, Result};

use crate::eval::{evaluate, EvalReport};
use crate::net::PolicyNet;
use crate::ppo::PPOConfig;
use crate::train::{train, EpochStats};
use crate::TrainMode;

/// Reference results at full training scale (8192 envs, 400 epochs, 5
/// seeds), for context when reading desk-scale tables. Desk runs reproduce
/// the trend between modes, not these magnitudes.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ReferenceRow {
    pub mode: TrainMode,
    pub reward_mean: f64,
    pub reward_std: f64,
    pub success_mean: f64,
    pub success_std: f64,
}

pub const FULL_SCALE_REFERENCE: [ReferenceRow; 2] = [
    ReferenceRow {
        mode: TrainMode::Eigengrasp,
        reward_mean: 327.40,
        reward_std: 11.61,
        success_mean: 1.00,
        success_std: 0.00,
    },
    ReferenceRow {
        mode: TrainMode::Unconstrained,
        reward_mean: 213.40,
        reward_std: 169.37,
        success_mean: 0.60,
        success_std: 0.55,
    },
];

/// One trained-and-evaluated run.
#[derive(Clone, Debug, Serialize)]
pub struct RunResult {
    pub mode: TrainMode,
    pub seed: u64,
    /// Greedy evaluation of the final policy.
    pub eval_mean_return: f64,
    pub eval_std_return: f64,
    pub eval_success_rate: f64,
    /// Last training epoch's rollout stats, for curve sanity checks.
    pub final_train: EpochStats,
    pub train_wall_time_s: f64,
}

/// Across-seed aggregate for one mode; stds are population stds over seeds.
#[derive(Clone, Debug, Serialize)]
pub struct ModeSummary {
    pub mode: TrainMode,
    pub seeds: Vec<u64>,
    pub reward_mean: f64,
    pub reward_std: f64,
    pub success_mean: f64,
    pub success_std: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub eval_episodes: usize,
    pub eval_seed: u64,
    pub runs: Vec<RunResult>,
    pub table: Vec<ModeSummary>,
    pub warnings: Vec<String>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Train and evaluate every (mode, seed) pair. `progress` fires once per
/// finished epoch of every run.
#[allow(clippy::too_many_arguments)]
pub fn seed_sweep(
    cfg: &PPOConfig,
    env_cfg: &GraspEnvConfig,
    model: Arc<HandModel>,
    basis: Option<Arc<EigengraspBasis>>,
    modes: &[TrainMode],
    seeds: &[u64],
    eval_episodes: usize,
    eval_seed: u64,
    mut progress: impl FnMut(TrainMode, u64, &EpochStats),
) -> Result<(SweepReport, Vec<(TrainMode, u64, PolicyNet<f32>)>)> {
    if modes.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidInput(
            "sweep needs at least one mode and one seed".into(),
        ));
    }
    if eval_episodes == 0 {
        return Err(Error::InvalidInput(
            "sweep needs at least one evaluation episode".into(),
        ));
    }
    let mut warnings = Vec::new();
    if seeds.len() == 1 {
        warnings.push(
            "single seed: across-seed stds are zero by construction".to_string(),
        );
    }

    let mut runs = Vec::new();
    let mut nets = Vec::new();
    for &mode in modes {
        for &seed in seeds {
            let mut run_cfg = cfg.clone();
            run_cfg.seed = seed;
            let (net, report) = train(
                &run_cfg,
                env_cfg,
                model.clone(),
                basis.clone(),
                mode,
                |s| progress(mode, seed, s),
            )?;
            let eval: EvalReport = evaluate(
                &net,
                mode,
                env_cfg,
                model.clone(),
                basis.clone(),
                eval_episodes,
                eval_seed,
                None,
            )?;
            runs.push(RunResult {
                mode,
                seed,
                eval_mean_return: eval.mean_return,
                eval_std_return: eval.std_return,
                eval_success_rate: eval.success_rate,
                final_train: *report.last(),
                train_wall_time_s: report.wall_time_s,
            });
            nets.push((mode, seed, net));
        }
    }

    let table = modes
        .iter()
        .map(|&mode| {
            let rows: Vec<&RunResult> = runs.iter().filter(|r| r.mode == mode).collect();
            let rewards: Vec<f64> = rows.iter().map(|r| r.eval_mean_return).collect();
            let success: Vec<f64> = rows.iter().map(|r| r.eval_success_rate).collect();
            let (reward_mean, reward_std) = mean_std(&rewards);
            let (success_mean, success_std) = mean_std(&success);
            ModeSummary {
                mode,
                seeds: seeds.to_vec(),
                reward_mean,
                reward_std,
                success_mean,
                success_std,
            }
        })
        .collect();

    Ok((
        SweepReport {
            eval_episodes,
            eval_seed,
            runs,
            table,
            warnings,
        },
        nets,
    ))
}

/// Fixed-width text table of a sweep, one row per mode.
pub fn format_table(report: &SweepReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14} {:>22} {:>22}\n",
        "mode", "reward (mean +/- std)", "success (mean +/- std)"
    ));
    for row in &report.table {
        out.push_str(&format!(
            "{:<14} {:>12.2} +/- {:>6.2} {:>12.2} +/- {:>6.2}\n",
            row.mode.name(),
            row.reward_mean,
            row.reward_std,
            row.success_mean,
            row.success_std
        ));
    }
    for w in &report.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    out
}
