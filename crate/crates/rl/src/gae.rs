//! Generalized advantage estimation over a rectangular rollout buffer.

use ndarray::{Array1, Array2};

/// Exponentially weighted advantages with episode-boundary resets.
///
/// Shapes are (steps, envs). `dones[t]` is 1.0 when the episode ended at
/// step t, so neither the bootstrap value nor later advantages leak across
/// the reset. `bootstrap` is the value estimate for the state after the last
/// step. Returns (advantages, returns) with returns = advantages + values.
pub fn gae(
    rewards: &Array2<f64>,
    values: &Array2<f64>,
    dones: &Array2<f64>,
    bootstrap: &Array1<f64>,
    gamma: f64,
    lambda: f64,
) -> (Array2<f64>, Array2<f64>) {
    let (steps, envs) = rewards.dim();
    assert_eq!(values.dim(), (steps, envs));
    assert_eq!(dones.dim(), (steps, envs));
    assert_eq!(bootstrap.len(), envs);

    let mut adv = Array2::zeros((steps, envs));
    for e in 0..envs {
        let mut acc = 0.0;
        for t in (0..steps).rev() {
            let mask = 1.0 - dones[[t, e]];
            let next_value = if t + 1 < steps {
                values[[t + 1, e]]
            } else {
                bootstrap[e]
            };
            let delta = rewards[[t, e]] + gamma * mask * next_value - values[[t, e]];
            acc = delta + gamma * lambda * mask * acc;
            adv[[t, e]] = acc;
        }
    }
    let returns = &adv + values;
    (adv, returns)
}
