//! End-to-end training loop: rollout collection, advantage estimation and
//! clipped-surrogate updates, with per-epoch learning-curve records.
//!
//! A run is a pure function of its config: the policy init, every action
//! sample and every env episode are seeded from `PPOConfig::seed`, so
//! repeating a run reproduces the curves byte for byte.

use std::io::{BufRead, Write};
use std::sync::Arc;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use grasplab_core::eigengrasp::EigengraspBasis;
use grasplab_core::hand::HandModel;
use grasplab_core::sim::{ActionMode, GraspEnvConfig};
use grasplab_core::{Error, Result};

use crate::net::PolicyNet;
use crate::optim::RmsProp;
use crate::ppo::{ppo_update, PPOConfig};
use crate::rollout::{collect_rollout, VecEnv};
use crate::TrainMode;

/// Resolve the env action space for a train mode. Eigengrasp and
/// feedforward runs act in synergy coefficients and need a basis; the
/// unconstrained run drives raw joint targets.
pub fn action_mode_for(mode: TrainMode, basis: Option<Arc<EigengraspBasis>>) -> Result<ActionMode> {
    match mode {
        TrainMode::Eigengrasp | TrainMode::Feedforward => {
            let b = basis.ok_or_else(|| {
                Error::InvalidInput(format!("train mode {mode} needs an eigengrasp basis"))
            })?;
            Ok(ActionMode::Eigengrasp(b))
        }
        TrainMode::Unconstrained => Ok(ActionMode::Unconstrained),
    }
}

/// One epoch's learning-curve record. Episode aggregates are over episodes
/// that finished during the epoch; when none finished the previous values
/// carry over with `episodes == 0`.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: u32,
    pub episodes: u32,
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_length: f64,
    pub success_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
}

/// Full record of a training run.
#[derive(Clone, Debug)]
pub struct TrainReport {
    pub mode: TrainMode,
    pub stats: Vec<EpochStats>,
    pub wall_time_s: f64,
    /// SHA-256 of the saved checkpoint file; filled in by callers that
    /// write one.
    pub checkpoint_sha256: Option<String>,
}

impl TrainReport {
    pub fn last(&self) -> &EpochStats {
        self.stats.last().expect("at least one epoch")
    }
}

/// Train a fresh policy. `on_epoch` fires after every update with the
/// epoch's stats; pass a closure that logs or `|_| {}`.
pub fn train(
    cfg: &PPOConfig,
    env_cfg: &GraspEnvConfig,
    model: Arc<HandModel>,
    basis: Option<Arc<EigengraspBasis>>,
    mode: TrainMode,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(PolicyNet<f32>, TrainReport)> {
    cfg.validate()?;
    env_cfg.validate()?;
    let action_mode = action_mode_for(mode, basis)?;
    let act_dim = action_mode.action_dim();
    let envs = cfg.env_count as usize;

    let mut net = PolicyNet::<f32>::init(act_dim, mode.recurrent(), cfg.seed, cfg.log_std_init);
    let mut opt = RmsProp::new(&net, cfg.lr, cfg.rmsprop_rho, cfg.rmsprop_eps);
    let mut venv = VecEnv::new(env_cfg, model, action_mode, envs, cfg.seed)?;
    // Distinct stream from the env episode seeds.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E3779B97F4A7C15) ^ 0x5851F42D4C957F2D);
    let mut hidden: Array2<f32> = net.initial_hidden(envs);

    let start = std::time::Instant::now();
    let mut stats = Vec::with_capacity(cfg.epochs as usize);
    let mut carry = EpochStats::default();
    for epoch in 0..cfg.epochs {
        let with_epoch = |e: Error| match e {
            Error::NumericalFault { .. } => e,
            other => Error::InvalidInput(format!("epoch {epoch}: {other}")),
        };
        let buf = collect_rollout(
            &net,
            &mut venv,
            cfg.rollout_len as usize,
            cfg.bptt as usize,
            &mut rng,
            &mut hidden,
        )
        .map_err(with_epoch)?;
        let update = ppo_update(&mut net, &mut opt, &buf, cfg, &mut rng)?;

        let finished = venv.drain_completed();
        let mut s = EpochStats {
            epoch,
            episodes: finished.len() as u32,
            mean_return: carry.mean_return,
            std_return: carry.std_return,
            mean_length: carry.mean_length,
            success_rate: carry.success_rate,
            policy_loss: update.policy_loss,
            value_loss: update.value_loss,
            entropy: update.entropy,
            clip_fraction: update.clip_fraction,
            grad_norm: update.grad_norm,
        };
        if !finished.is_empty() {
            let n = finished.len() as f64;
            let mean = finished.iter().map(|e| e.ret).sum::<f64>() / n;
            let var = finished.iter().map(|e| (e.ret - mean) * (e.ret - mean)).sum::<f64>() / n;
            s.mean_return = mean;
            s.std_return = var.sqrt();
            s.mean_length = finished.iter().map(|e| e.len as f64).sum::<f64>() / n;
            s.success_rate = finished.iter().filter(|e| e.success).count() as f64 / n;
            carry = s;
        }
        on_epoch(&s);
        stats.push(s);
    }

    Ok((
        net,
        TrainReport {
            mode,
            stats,
            wall_time_s: start.elapsed().as_secs_f64(),
            checkpoint_sha256: None,
        },
    ))
}

/// Write learning curves as line-delimited JSON with a typed header.
pub fn save_curves(report: &TrainReport, path: &std::path::Path) -> Result<()> {
    let file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    let header = serde_json::json!({
        "kind": "training_curve",
        "version": 1,
        "mode": report.mode.name(),
    });
    writeln!(w, "{header}").map_err(|e| Error::io(path.display().to_string(), e))?;
    for s in &report.stats {
        let line = serde_json::to_string(s)
            .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

/// Read back a curves file written by [`save_curves`].
pub fn load_curves(path: &std::path::Path) -> Result<(TrainMode, Vec<EpochStats>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = std::io::BufReader::new(file);
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::format(path.display().to_string(), "empty curves file"))?
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let header: serde_json::Value = serde_json::from_str(&header_line)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    if header.get("kind").and_then(|k| k.as_str()) != Some("training_curve") {
        return Err(Error::format(
            path.display().to_string(),
            "missing training_curve header",
        ));
    }
    let mode: TrainMode = header
        .get("mode")
        .and_then(|m| m.as_str())
        .ok_or_else(|| Error::format(path.display().to_string(), "header lacks mode"))?
        .parse()?;
    let mut stats = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: EpochStats = serde_json::from_str(&line)
            .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        stats.push(s);
    }
    Ok((mode, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_roundtrip() {
        let report = TrainReport {
            mode: TrainMode::Eigengrasp,
            checkpoint_sha256: None,
            stats: vec![
                EpochStats {
                    epoch: 0,
                    episodes: 3,
                    mean_return: 12.5,
                    success_rate: 0.25,
                    ..Default::default()
                },
                EpochStats {
                    epoch: 1,
                    episodes: 0,
                    mean_return: 12.5,
                    success_rate: 0.25,
                    ..Default::default()
                },
            ],
            wall_time_s: 1.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("curves.jsonl");
        save_curves(&report, &p).unwrap();
        let (mode, stats) = load_curves(&p).unwrap();
        assert_eq!(mode, TrainMode::Eigengrasp);
        assert_eq!(stats.len(), 2);
        assert_eq!(stats[0].episodes, 3);
        assert_eq!(stats[1].mean_return, 12.5);
    }

    #[test]
    fn unconstrained_mode_needs_no_basis() {
        assert!(action_mode_for(TrainMode::Unconstrained, None).is_ok());
        assert!(action_mode_for(TrainMode::Eigengrasp, None).is_err());
        assert!(action_mode_for(TrainMode::Feedforward, None).is_err());
    }
}
