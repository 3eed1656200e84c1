//! Synchronous vector environment and on-policy rollout collection.
//!
//! All envs step in lockstep: the policy runs once per control step over the
//! whole batch, actions are sampled from a single trainer RNG in env order,
//! then the envs integrate in parallel. Each env owns its state and RNG and
//! episode seeds are a pure function of (run seed, env index, episode
//! index), so trajectories are bitwise independent of the worker count.

use std::sync::Arc;

use ndarray::{Array1, Array2, Array3, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use grasplab_core::hand::HandModel;
use grasplab_core::sim::{ActionMode, EndReason, GraspEnv, GraspEnvConfig, OBS_DIM};
use grasplab_core::{Error, Result};

use crate::net::{log_prob, PolicyNet, HIDDEN};

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Deterministic per-episode seed stream, independent of stepping order.
pub fn episode_seed(run_seed: u64, env: usize, episode: u64) -> u64 {
    splitmix64(splitmix64(run_seed) ^ (((env as u64) << 32) | episode))
}

/// Stats for one finished episode.
#[derive(Clone, Copy, Debug)]
pub struct EpisodeStat {
    pub ret: f64,
    pub len: u32,
    pub success: bool,
}

struct EnvSlot {
    env: GraspEnv,
    episode: u64,
    acc_return: f64,
    acc_len: u32,
}

/// Batch of grasp envs with auto-reset on episode end.
pub struct VecEnv {
    slots: Vec<EnvSlot>,
    run_seed: u64,
    obs: Array2<f32>,
    completed: Vec<EpisodeStat>,
}

impl VecEnv {
    pub fn new(
        cfg: &GraspEnvConfig,
        model: Arc<HandModel>,
        mode: ActionMode,
        count: usize,
        run_seed: u64,
    ) -> Result<VecEnv> {
        if count == 0 {
            return Err(Error::InvalidInput("env count must be positive".into()));
        }
        let mut slots = Vec::with_capacity(count);
        let mut obs = Array2::zeros((count, OBS_DIM));
        for i in 0..count {
            let mut env = GraspEnv::new(cfg.clone(), model.clone(), mode.clone())?;
            let first = env.reset(episode_seed(run_seed, i, 0))?;
            for (j, v) in first.data.iter().enumerate() {
                obs[[i, j]] = *v as f32;
            }
            slots.push(EnvSlot {
                env,
                episode: 0,
                acc_return: 0.0,
                acc_len: 0,
            });
        }
        Ok(VecEnv {
            slots,
            run_seed,
            obs,
            completed: Vec::new(),
        })
    }

    pub fn count(&self) -> usize {
        self.slots.len()
    }

    pub fn action_dim(&self) -> usize {
        self.slots[0].env.action_dim()
    }

    /// Current observation batch, (envs, 23).
    pub fn obs(&self) -> &Array2<f32> {
        &self.obs
    }

    /// Step every env; returns (rewards, dones). Finished envs are reset in
    /// place and their stats recorded; the observation batch then holds the
    /// fresh episode's first observation.
    pub fn step(&mut self, actions: &Array2<f32>) -> Result<(Array1<f32>, Array1<f32>)> {
        let count = self.slots.len();
        if actions.dim() != (count, self.action_dim()) {
            return Err(Error::Arity {
                what: "action batch",
                expected: count * self.action_dim(),
                got: actions.len(),
            });
        }
        let run_seed = self.run_seed;
        let rows: Vec<(f64, bool, [f64; OBS_DIM], Option<EpisodeStat>)> = self
            .slots
            .par_iter_mut()
            .enumerate()
            .map(|(i, slot)| {
                let a: Vec<f64> = actions.row(i).iter().map(|&v| v as f64).collect();
                let out = slot.env.step(&a)?;
                slot.acc_return += out.reward;
                slot.acc_len += 1;
                if out.done {
                    let stat = EpisodeStat {
                        ret: slot.acc_return,
                        len: slot.acc_len,
                        success: out.info.end == Some(EndReason::Horizon)
                            && out.info.terms.r_threshold == 1,
                    };
                    slot.acc_return = 0.0;
                    slot.acc_len = 0;
                    slot.episode += 1;
                    let first = slot.env.reset(episode_seed(run_seed, i, slot.episode))?;
                    Ok((out.reward, true, first.data, Some(stat)))
                } else {
                    Ok((out.reward, false, out.obs.data, None))
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let mut rewards = Array1::zeros(count);
        let mut dones = Array1::zeros(count);
        for (i, (reward, done, obs, stat)) in rows.into_iter().enumerate() {
            rewards[i] = reward as f32;
            dones[i] = if done { 1.0 } else { 0.0 };
            for (j, v) in obs.iter().enumerate() {
                self.obs[[i, j]] = *v as f32;
            }
            if let Some(s) = stat {
                self.completed.push(s);
            }
        }
        Ok((rewards, dones))
    }

    /// Episodes finished since the last drain, in completion order.
    pub fn drain_completed(&mut self) -> Vec<EpisodeStat> {
        std::mem::take(&mut self.completed)
    }
}

/// One rollout of fixed length over every env, shapes (steps, envs, ...).
pub struct RolloutBuffer {
    pub obs: Array3<f32>,
    pub actions: Array3<f32>,
    pub log_probs: Array2<f32>,
    pub values: Array2<f32>,
    pub rewards: Array2<f32>,
    pub dones: Array2<f32>,
    /// Hidden state snapshot at the start of each truncation window.
    pub hidden0: Array3<f32>,
    /// Value estimate of the state after the final step.
    pub bootstrap: Array1<f32>,
    /// Truncation window length; `steps` is a multiple of it.
    pub bptt: usize,
}

impl RolloutBuffer {
    pub fn steps(&self) -> usize {
        self.obs.len_of(Axis(0))
    }

    pub fn envs(&self) -> usize {
        self.obs.len_of(Axis(1))
    }
}

/// Collect `steps` control steps from every env, sampling stochastic actions
/// and snapshotting the GRU state at window starts. `hidden` carries across
/// calls and is zeroed per env at episode boundaries.
pub fn collect_rollout(
    net: &PolicyNet<f32>,
    venv: &mut VecEnv,
    steps: usize,
    bptt: usize,
    rng: &mut ChaCha8Rng,
    hidden: &mut Array2<f32>,
) -> Result<RolloutBuffer> {
    let envs = venv.count();
    let act_dim = net.act_dim;
    if venv.action_dim() != act_dim {
        return Err(Error::Arity {
            what: "policy action dim vs env",
            expected: venv.action_dim(),
            got: act_dim,
        });
    }
    assert!(steps > 0 && bptt > 0 && steps % bptt == 0, "rollout shape");
    let windows = steps / bptt;

    let mut buf = RolloutBuffer {
        obs: Array3::zeros((steps, envs, OBS_DIM)),
        actions: Array3::zeros((steps, envs, act_dim)),
        log_probs: Array2::zeros((steps, envs)),
        values: Array2::zeros((steps, envs)),
        rewards: Array2::zeros((steps, envs)),
        dones: Array2::zeros((steps, envs)),
        hidden0: Array3::zeros((windows, envs, HIDDEN)),
        bootstrap: Array1::zeros(envs),
        bptt,
    };

    let log_std = net.clamped_log_std();
    let stds = log_std.mapv(f32::exp);
    for t in 0..steps {
        if t % bptt == 0 {
            buf.hidden0.index_axis_mut(Axis(0), t / bptt).assign(hidden);
        }
        buf.obs.index_axis_mut(Axis(0), t).assign(venv.obs());
        let (out, _) = net.forward_step(venv.obs().view(), hidden.view());

        let mut actions = out.mean.clone();
        for mut row in actions.axis_iter_mut(Axis(0)) {
            for (j, v) in row.iter_mut().enumerate() {
                let eps: f64 = rng.sample(StandardNormal);
                *v += stds[j] * eps as f32;
            }
        }
        let logp = log_prob(&out.mean, &log_std, &actions);

        buf.actions.index_axis_mut(Axis(0), t).assign(&actions);
        buf.log_probs.index_axis_mut(Axis(0), t).assign(&logp);
        buf.values.index_axis_mut(Axis(0), t).assign(&out.value);

        let (rewards, dones) = venv.step(&actions)?;
        buf.rewards.index_axis_mut(Axis(0), t).assign(&rewards);
        buf.dones.index_axis_mut(Axis(0), t).assign(&dones);

        *hidden = out.hidden;
        for (i, &d) in dones.iter().enumerate() {
            if d > 0.5 {
                hidden.row_mut(i).fill(0.0);
            }
        }
    }
    let (out, _) = net.forward_step(venv.obs().view(), hidden.view());
    buf.bootstrap.assign(&out.value);
    Ok(buf)
}
