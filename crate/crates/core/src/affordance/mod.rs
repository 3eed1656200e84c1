//! Affordance pipeline (in progress).
