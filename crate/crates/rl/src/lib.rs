//! Recurrent policy-gradient trainer, evaluation harness and baselines for
//! the grasping environment.
//!
//! The crate provides a hand-rolled GRU policy/value network ([`net`]),
//! generalized advantage estimation ([`gae`]), a clipped-surrogate update
//! with truncated backprop through time ([`ppo`]), deterministic parallel
//! rollout collection ([`rollout`]), an RMSProp optimizer ([`optim`]),
//! binary checkpoints ([`checkpoint`]), the end-to-end training loop
//! ([`train`]), greedy evaluation plus a scripted baseline ([`eval`]), and a
//! multi-seed comparison harness ([`sweep`]).
//!
//! Everything is seeded and single-source deterministic: a run is a pure
//! function of its config, and results do not depend on the worker-thread
//! count.

pub mod checkpoint;
pub mod eval;
pub mod gae;
pub mod net;
pub mod optim;
pub mod ppo;
pub mod rollout;
pub mod sweep;
pub mod train;

use grasplab_core::{Error, Result};

/// Which action space and policy memory a run trains with.
///
/// `Eigengrasp` and `Unconstrained` differ only in the action space (9
/// synergy coefficients vs 16 raw joint targets); both use the recurrent
/// cell. `Feedforward` keeps the eigengrasp action space but evaluates the
/// cell from a zero state every step, removing memory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Eigengrasp,
    Unconstrained,
    Feedforward,
}

impl TrainMode {
    /// Stable byte tag used in checkpoint headers.
    pub fn code(self) -> u8 {
        match self {
            TrainMode::Eigengrasp => 0,
            TrainMode::Unconstrained => 1,
            TrainMode::Feedforward => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<TrainMode> {
        match code {
            0 => Ok(TrainMode::Eigengrasp),
            1 => Ok(TrainMode::Unconstrained),
            2 => Ok(TrainMode::Feedforward),
            other => Err(Error::InvalidInput(format!(
                "unknown train mode code {other}"
            ))),
        }
    }

    /// Whether the policy carries hidden state across steps.
    pub fn recurrent(self) -> bool {
        !matches!(self, TrainMode::Feedforward)
    }

    pub fn name(self) -> &'static str {
        match self {
            TrainMode::Eigengrasp => "eigengrasp",
            TrainMode::Unconstrained => "unconstrained",
            TrainMode::Feedforward => "feedforward",
        }
    }

    pub const ALL: [TrainMode; 3] = [
        TrainMode::Eigengrasp,
        TrainMode::Unconstrained,
        TrainMode::Feedforward,
    ];
}

impl std::fmt::Display for TrainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<TrainMode> {
        match s {
            "eigengrasp" => Ok(TrainMode::Eigengrasp),
            "unconstrained" => Ok(TrainMode::Unconstrained),
            "feedforward" => Ok(TrainMode::Feedforward),
            other => Err(Error::InvalidInput(format!(
                "unknown train mode '{other}' (expected eigengrasp, unconstrained or feedforward)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_codes_roundtrip() {
        for m in TrainMode::ALL {
            assert_eq!(TrainMode::from_code(m.code()).unwrap(), m);
            assert_eq!(m.name().parse::<TrainMode>().unwrap(), m);
        }
        assert!(TrainMode::from_code(9).is_err());
        assert!("gru".parse::<TrainMode>().is_err());
    }

    #[test]
    fn feedforward_is_the_only_memoryless_mode() {
        assert!(TrainMode::Eigengrasp.recurrent());
        assert!(TrainMode::Unconstrained.recurrent());
        assert!(!TrainMode::Feedforward.recurrent());
    }
}
