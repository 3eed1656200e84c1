//! Core library for grasplab: hand kinematics, eigengrasp action subspaces,
//! a penalty-contact grasping simulator and the functional pre-grasp
//! affordance pipeline.

pub mod affordance;
pub mod eigengrasp;
pub mod error;
pub mod geom;
pub mod hand;
pub mod sim;

pub use error::{Error, Result};
