//! Clipped-surrogate policy optimization over rollout buffers, with
//! backprop through time truncated at fixed window boundaries.
//!
//! Each update: generalized advantages over the whole buffer, one global
//! advantage normalization, then several passes of env-minibatched gradient
//! steps. Within a minibatch the stored sequence is replayed window by
//! window from the snapshotted hidden states, so recurrent gradients never
//! cross a window edge or an episode reset.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use grasplab_core::{Error, Result};

use crate::gae::gae;
use crate::net::{NetGrads, PolicyNet, LOG_STD_MAX, LOG_STD_MIN};
use crate::optim::{clip_grad_norm, RmsProp};
use crate::rollout::RolloutBuffer;

/// Trainer hyperparameters; file format is structured text with a version.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PPOConfig {
    pub version: u32,
    /// Parallel env count.
    pub env_count: u32,
    /// Training epochs (one rollout + update cycle each).
    pub epochs: u32,
    /// Control steps collected per env per epoch.
    pub rollout_len: u32,
    /// Backprop-through-time truncation window; divides rollout_len.
    pub bptt: u32,
    pub gamma: f64,
    pub lam: f64,
    pub clip: f64,
    pub lr: f64,
    /// Env-wise minibatches per pass; divides env_count.
    pub minibatches: u32,
    /// Gradient passes over each rollout.
    pub mini_epochs: u32,
    pub entropy_coeff: f64,
    pub value_coeff: f64,
    /// Reward multiplier applied before advantage estimation; keeps value
    /// targets near unit scale. Reported episode returns stay unscaled.
    pub reward_scale: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    pub log_std_init: f64,
    pub rmsprop_rho: f64,
    pub rmsprop_eps: f64,
    pub seed: u64,
}

impl Default for PPOConfig {
    fn default() -> Self {
        PPOConfig {
            version: 1,
            env_count: 256,
            epochs: 100,
            rollout_len: 32,
            bptt: 32,
            gamma: 0.99,
            lam: 0.95,
            clip: 0.2,
            lr: 3e-4,
            minibatches: 4,
            mini_epochs: 2,
            entropy_coeff: 0.0,
            value_coeff: 0.5,
            reward_scale: 0.1,
            max_grad_norm: 1.0,
            normalize_advantages: true,
            log_std_init: -0.5,
            rmsprop_rho: 0.99,
            rmsprop_eps: 1e-8,
            seed: 0,
        }
    }
}

impl PPOConfig {
    pub fn validate(&self) -> Result<()> {
        if self.env_count == 0 || self.epochs == 0 || self.rollout_len == 0 || self.bptt == 0 {
            return Err(Error::InvalidInput(
                "env_count, epochs, rollout_len and bptt must be positive".into(),
            ));
        }
        if self.bptt > self.rollout_len || self.rollout_len % self.bptt != 0 {
            return Err(Error::InvalidInput(format!(
                "bptt ({}) must divide rollout_len ({})",
                self.bptt, self.rollout_len
            )));
        }
        if self.minibatches == 0 || self.env_count % self.minibatches != 0 {
            return Err(Error::InvalidInput(format!(
                "minibatches ({}) must divide env_count ({})",
                self.minibatches, self.env_count
            )));
        }
        if self.mini_epochs == 0 {
            return Err(Error::InvalidInput("mini_epochs must be positive".into()));
        }
        let positive = [
            ("clip", self.clip),
            ("lr", self.lr),
            ("reward_scale", self.reward_scale),
            ("max_grad_norm", self.max_grad_norm),
            ("rmsprop_eps", self.rmsprop_eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "gamma must be in (0, 1], got {}",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.lam) {
            return Err(Error::InvalidInput(format!(
                "lam must be in [0, 1], got {}",
                self.lam
            )));
        }
        if !(self.rmsprop_rho > 0.0 && self.rmsprop_rho < 1.0) {
            return Err(Error::InvalidInput(format!(
                "rmsprop_rho must be in (0, 1), got {}",
                self.rmsprop_rho
            )));
        }
        if self.entropy_coeff < 0.0 || self.value_coeff < 0.0 {
            return Err(Error::InvalidInput(
                "entropy_coeff and value_coeff must be non-negative".into(),
            ));
        }
        if !(LOG_STD_MIN..=LOG_STD_MAX).contains(&self.log_std_init) {
            return Err(Error::InvalidInput(format!(
                "log_std_init must be within [{LOG_STD_MIN}, {LOG_STD_MAX}], got {}",
                self.log_std_init
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &std::path::Path) -> Result<PPOConfig> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let cfg: PPOConfig = toml::from_str(&text)
            .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Aggregated loss statistics for one update call.
#[derive(Clone, Copy, Debug, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
}

/// Clipped-surrogate objective for one sample and its gradient w.r.t. the
/// new log-prob. The gradient is zero exactly where the flat clipped branch
/// is the active minimum.
pub fn clipped_surrogate_grad(ratio: f64, adv: f64, clip: f64) -> (f64, f64) {
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
    let surr1 = ratio * adv;
    let surr2 = clipped * adv;
    if surr1 <= surr2 {
        (surr1, ratio * adv)
    } else {
        (surr2, 0.0)
    }
}

fn select_cols(src: &Array2<f32>, cols: &[usize]) -> Array2<f32> {
    src.select(Axis(1), cols)
}

/// One PPO update over a collected buffer. Minibatches are sets of env
/// columns so each window replay stays a contiguous sequence.
pub fn ppo_update(
    net: &mut PolicyNet<f32>,
    opt: &mut RmsProp<f32>,
    buf: &RolloutBuffer,
    cfg: &PPOConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    let steps = buf.steps();
    let envs = buf.envs();
    let act_dim = net.act_dim;
    if buf.actions.len_of(Axis(2)) != act_dim {
        return Err(Error::Arity {
            what: "buffer action dim vs policy",
            expected: act_dim,
            got: buf.actions.len_of(Axis(2)),
        });
    }
    let windows = steps / buf.bptt;

    // Advantages in f64 over the whole buffer, one normalization per update.
    let rewards = buf.rewards.mapv(|v| v as f64 * cfg.reward_scale);
    let values = buf.values.mapv(|v| v as f64);
    let dones = buf.dones.mapv(|v| v as f64);
    let bootstrap = buf.bootstrap.mapv(|v| v as f64);
    let (mut adv, returns) = gae(&rewards, &values, &dones, &bootstrap, cfg.gamma, cfg.lam);
    if cfg.normalize_advantages {
        let n = (steps * envs) as f64;
        let mean = adv.sum() / n;
        let var = adv.mapv(|a| (a - mean) * (a - mean)).sum() / n;
        let inv = 1.0 / (var.sqrt() + 1e-8);
        adv.mapv_inplace(|a| (a - mean) * inv);
    }
    let adv32 = adv.mapv(|v| v as f32);
    let ret32 = returns.mapv(|v| v as f32);

    let mb_size = envs / cfg.minibatches as usize;
    let mut stats = UpdateStats::default();
    let mut stat_batches = 0usize;

    for mini_epoch in 0..cfg.mini_epochs {
        let mut order: Vec<usize> = (0..envs).collect();
        order.shuffle(rng);
        for mb in 0..cfg.minibatches as usize {
            let cols = &order[mb * mb_size..(mb + 1) * mb_size];
            let obs_mb: Vec<Array2<f32>> = (0..steps)
                .map(|t| {
                    buf.obs
                        .index_axis(Axis(0), t)
                        .select(Axis(0), cols)
                })
                .collect();
            let act_mb: Vec<Array2<f32>> = (0..steps)
                .map(|t| {
                    buf.actions
                        .index_axis(Axis(0), t)
                        .select(Axis(0), cols)
                })
                .collect();
            let logp_mb = select_cols(&buf.log_probs, cols);
            let done_mb = select_cols(&buf.dones, cols);
            let adv_mb = select_cols(&adv32, cols);
            let ret_mb = select_cols(&ret32, cols);

            let mut grads = NetGrads::zeros_like(net);
            let log_std = net.clamped_log_std();
            let stds: Vec<f32> = log_std.iter().map(|&v| v.exp()).collect();
            let inv_n = 1.0 / (steps * mb_size) as f64;

            let mut policy_loss = 0.0;
            let mut value_loss = 0.0;
            let mut clip_hits = 0usize;
            let mut kl_sum = 0.0;
            let mut d_log_std = vec![0.0f64; act_dim];

            for w in 0..windows {
                let mut h = buf
                    .hidden0
                    .index_axis(Axis(0), w)
                    .select(Axis(0), cols);
                let mut caches = Vec::with_capacity(buf.bptt);
                let mut means = Vec::with_capacity(buf.bptt);
                let mut vals = Vec::with_capacity(buf.bptt);
                for k in 0..buf.bptt {
                    let t = w * buf.bptt + k;
                    if k > 0 {
                        for i in 0..mb_size {
                            if done_mb[[t - 1, i]] > 0.5 {
                                h.row_mut(i).fill(0.0);
                            }
                        }
                    }
                    let (out, cache) = net.forward_step(obs_mb[t].view(), h.view());
                    h = out.hidden;
                    caches.push(cache);
                    means.push(out.mean);
                    vals.push(out.value);
                }

                // Backward, newest step first, gradient masked at resets.
                let mut d_hidden = Array2::zeros((mb_size, crate::net::HIDDEN));
                for k in (0..buf.bptt).rev() {
                    let t = w * buf.bptt + k;
                    let mean = &means[k];
                    let value = &vals[k];
                    let actions = &act_mb[t];
                    let mut d_mean = Array2::zeros((mb_size, act_dim));
                    let mut d_value = Array1::zeros(mb_size);
                    for i in 0..mb_size {
                        // Policy term.
                        let logp_new: f64 = {
                            let mut q = 0.0f64;
                            let mut ls = 0.0f64;
                            for j in 0..act_dim {
                                let sd = stds[j] as f64;
                                let tj = (actions[[i, j]] as f64 - mean[[i, j]] as f64) / sd;
                                q += tj * tj;
                                ls += log_std[j] as f64;
                            }
                            -0.5 * q
                                - ls
                                - 0.5 * act_dim as f64
                                    * (2.0 * std::f64::consts::PI).ln()
                        };
                        let logp_old = logp_mb[[t, i]] as f64;
                        let ratio = (logp_new - logp_old).exp();
                        let a = adv_mb[[t, i]] as f64;
                        let (obj, d_obj_dlogp) = clipped_surrogate_grad(ratio, a, cfg.clip);
                        policy_loss -= obj * inv_n;
                        kl_sum += (logp_old - logp_new) * inv_n;
                        if (ratio - 1.0).abs() > cfg.clip {
                            clip_hits += 1;
                        }
                        // d loss / d logp = -d obj / d logp, averaged.
                        let d_logp = -d_obj_dlogp * inv_n;
                        for j in 0..act_dim {
                            let sd = stds[j] as f64;
                            let tj = (actions[[i, j]] as f64 - mean[[i, j]] as f64) / sd;
                            d_mean[[i, j]] = (d_logp * tj / sd) as f32;
                            d_log_std[j] += d_logp * (tj * tj - 1.0);
                        }
                        // Value term: 0.5 * value_coeff * (v - ret)^2.
                        let err = value[i] as f64 - ret_mb[[t, i]] as f64;
                        value_loss += 0.5 * err * err * inv_n;
                        d_value[i] = (cfg.value_coeff * err * inv_n) as f32;
                    }
                    d_hidden = net.backward_step(&caches[k], &d_mean, &d_value, &d_hidden, &mut grads);
                    if k > 0 {
                        for i in 0..mb_size {
                            if done_mb[[t - 1, i]] > 0.5 {
                                d_hidden.row_mut(i).fill(0.0);
                            }
                        }
                    }
                }
            }

            // Entropy bonus and the log-std clamp's gradient gate.
            let ent = crate::net::entropy(&log_std) as f64;
            for j in 0..act_dim {
                let p = net.log_std[j];
                let interior = ((p as f64) >= LOG_STD_MIN) && ((p as f64) <= LOG_STD_MAX);
                let g = d_log_std[j] - cfg.entropy_coeff;
                grads.log_std[j] = if interior { g as f32 } else { 0.0 };
            }

            let combined = policy_loss + cfg.value_coeff * value_loss - cfg.entropy_coeff * ent;
            if !combined.is_finite() {
                let quantity = if !policy_loss.is_finite() {
                    "ppo policy loss"
                } else if !value_loss.is_finite() {
                    "ppo value loss"
                } else {
                    "ppo combined loss"
                };
                return Err(Error::NumericalFault {
                    quantity,
                    step: mini_epoch as usize,
                });
            }

            let norm = clip_grad_norm(&mut grads, cfg.max_grad_norm);
            opt.step(net, &grads);
            net.project_log_std();

            stats.policy_loss += policy_loss;
            stats.value_loss += value_loss;
            stats.entropy += ent;
            stats.clip_fraction += clip_hits as f64 / (steps * mb_size) as f64;
            stats.approx_kl += kl_sum;
            stats.grad_norm += norm;
            stat_batches += 1;
        }
    }

    let n = stat_batches as f64;
    stats.policy_loss /= n;
    stats.value_loss /= n;
    stats.entropy /= n;
    stats.clip_fraction /= n;
    stats.approx_kl /= n;
    stats.grad_norm /= n;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_validate() {
        PPOConfig::default().validate().unwrap();
    }

    #[test]
    fn config_rejects_bad_shapes() {
        let mut c = PPOConfig::default();
        c.bptt = 33;
        assert!(c.validate().is_err());
        let mut c = PPOConfig::default();
        c.rollout_len = 48;
        assert!(c.validate().is_err());
        let mut c = PPOConfig::default();
        c.minibatches = 3;
        assert!(c.validate().is_err());
        let mut c = PPOConfig::default();
        c.lam = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_roundtrips_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ppo.toml");
        let mut cfg = PPOConfig::default();
        cfg.seed = 99;
        cfg.lr = 1e-3;
        cfg.save(&p).unwrap();
        let loaded = PPOConfig::load(&p).unwrap();
        assert_eq!(loaded.seed, 99);
        assert_eq!(loaded.lr, 1e-3);
        assert_eq!(loaded.env_count, cfg.env_count);
    }

    #[test]
    fn surrogate_grad_cases() {
        // Unclipped region: gradient is ratio * adv.
        let (obj, g) = clipped_surrogate_grad(1.0, 2.0, 0.2);
        assert_eq!(obj, 2.0);
        assert_eq!(g, 2.0);

        // Positive advantage, ratio above the band: flat branch, zero grad.
        let (obj, g) = clipped_surrogate_grad(1.5, 2.0, 0.2);
        assert!((obj - 2.4).abs() < 1e-12);
        assert_eq!(g, 0.0);

        // Positive advantage, ratio below the band: pessimistic branch keeps
        // the gradient alive.
        let (obj, g) = clipped_surrogate_grad(0.5, 2.0, 0.2);
        assert_eq!(obj, 1.0);
        assert_eq!(g, 1.0);

        // Negative advantage mirrors.
        let (_, g) = clipped_surrogate_grad(0.5, -2.0, 0.2);
        assert_eq!(g, 0.0);
        let (_, g) = clipped_surrogate_grad(1.5, -2.0, 0.2);
        assert_eq!(g, -3.0);
    }

    #[test]
    fn zero_clip_gates_gradient_wherever_the_flat_branch_wins() {
        for &(ratio, adv) in &[(1.2, 1.0), (0.8, -1.0), (2.0, 0.3), (0.01, -0.5)] {
            let (_, g) = clipped_surrogate_grad(ratio, adv, 0.0);
            assert_eq!(g, 0.0, "ratio {ratio} adv {adv}");
        }
        // At ratio exactly 1 the unclipped branch is active and the gradient
        // equals the advantage.
        let (_, g) = clipped_surrogate_grad(1.0, 0.7, 0.0);
        assert!((g - 0.7).abs() < 1e-12);
    }
}
