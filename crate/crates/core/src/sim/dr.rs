//! Per-episode domain randomization: five uniform physical factors plus the
//! fixed observation/action noise magnitudes copied from the config.

use rand::Rng;

pub const OBJECT_SCALE_RANGE: (f64, f64) = (0.8, 1.2);
pub const MASS_SCALE_RANGE: (f64, f64) = (0.5, 1.5);
pub const FRICTION_RANGE: (f64, f64) = (0.7, 1.3);
pub const STIFFNESS_SCALE_RANGE: (f64, f64) = (0.75, 1.5);
pub const DAMPING_SCALE_RANGE: (f64, f64) = (0.3, 3.0);

/// One episode's randomization draw. `obs_noise_std` / `act_noise_std` are
/// configuration constants carried along, not sampled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DRSample {
    pub object_scale: f64,
    pub mass_scale: f64,
    pub friction: f64,
    pub stiffness_scale: f64,
    pub damping_scale: f64,
    pub obs_noise_std: f64,
    pub act_noise_std: f64,
}

/// Uniform draw of every randomized field, in a fixed order so a seeded rng
/// reproduces the sample exactly.
pub fn sample_domain_randomization(
    rng: &mut impl Rng,
    obs_noise_std: f64,
    act_noise_std: f64,
) -> DRSample {
    DRSample {
        object_scale: rng.gen_range(OBJECT_SCALE_RANGE.0..OBJECT_SCALE_RANGE.1),
        mass_scale: rng.gen_range(MASS_SCALE_RANGE.0..MASS_SCALE_RANGE.1),
        friction: rng.gen_range(FRICTION_RANGE.0..FRICTION_RANGE.1),
        stiffness_scale: rng.gen_range(STIFFNESS_SCALE_RANGE.0..STIFFNESS_SCALE_RANGE.1),
        damping_scale: rng.gen_range(DAMPING_SCALE_RANGE.0..DAMPING_SCALE_RANGE.1),
        obs_noise_std,
        act_noise_std,
    }
}

impl DRSample {
    pub fn in_bounds(&self) -> bool {
        self.object_scale >= OBJECT_SCALE_RANGE.0
            && self.object_scale <= OBJECT_SCALE_RANGE.1
            && self.mass_scale >= MASS_SCALE_RANGE.0
            && self.mass_scale <= MASS_SCALE_RANGE.1
            && self.friction >= FRICTION_RANGE.0
            && self.friction <= FRICTION_RANGE.1
            && self.stiffness_scale >= STIFFNESS_SCALE_RANGE.0
            && self.stiffness_scale <= STIFFNESS_SCALE_RANGE.1
            && self.damping_scale >= DAMPING_SCALE_RANGE.0
            && self.damping_scale <= DAMPING_SCALE_RANGE.1
    }
}
