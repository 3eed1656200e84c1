//! Step reward: a three-exponential shaping term on palm-object distance, a
//! binary lift bonus, and a constant alive bonus.

use crate::error::{Error, Result};

/// Exponential length scales for the distance shaping, meters.
pub const DIST_SCALES: [f64; 3] = [0.10, 0.05, 0.01];
/// Linear distance penalty slope.
pub const DIST_SLOPE: f64 = 4.0;
/// Object lowest-point height that counts as lifted, meters.
pub const LIFT_THRESHOLD_Z: f64 = 0.04;
/// Weight of the lift bonus in the total.
pub const LIFT_WEIGHT: f64 = 0.1;
/// Constant alive bonus added every step.
pub const ALIVE_BONUS: f64 = 1.0;

/// Reward components for one control step.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RewardTerms {
    pub r_hand_obj: f64,
    pub r_threshold: u8,
    pub total: f64,
}

/// sum_i exp(-dist / d_i) - 4 * dist over the three length scales.
pub fn reward_hand_obj(dist: f64) -> Result<f64> {
    if !dist.is_finite() {
        return Err(Error::NonFinite("hand-object distance".into()));
    }
    if dist < 0.0 {
        return Err(Error::InvalidInput(format!(
            "distance must be non-negative, got {dist}"
        )));
    }
    Ok(DIST_SCALES.iter().map(|d| (-dist / d).exp()).sum::<f64>() - DIST_SLOPE * dist)
}

/// 1 iff the object's lowest point is at or above the lift threshold.
pub fn reward_threshold(obj_lowest_z: f64) -> u8 {
    u8::from(obj_lowest_z >= LIFT_THRESHOLD_Z)
}

/// Weighted sum; the identity `total = r_hand_obj + 0.1 * r_threshold + 1`
/// holds bitwise.
pub fn total_reward(r_hand_obj: f64, r_threshold: u8) -> RewardTerms {
    RewardTerms {
        r_hand_obj,
        r_threshold,
        total: r_hand_obj + LIFT_WEIGHT * f64::from(r_threshold) + ALIVE_BONUS,
    }
}
