//! Procedural hammers: a capsule handle along body +x with a box head at the
//! +x end, composed into one rigid body with exact mass, center of mass and
//! diagonal body-frame inertia.

use nalgebra::Vector3;
use rand::Rng;

use crate::error::{Error, Result};
use crate::sim::dr::DRSample;

pub const HANDLE_LENGTH_RANGE: (f64, f64) = (0.20, 0.35);
pub const HANDLE_RADIUS_RANGE: (f64, f64) = (0.012, 0.02);
/// Head extents: two small cross-section dims (body x and z) and one long
/// transverse dim (body y).
pub const HEAD_SMALL_RANGE: (f64, f64) = (0.02, 0.04);
pub const HEAD_LONG_RANGE: (f64, f64) = (0.06, 0.10);
pub const HANDLE_DENSITY_RANGE: (f64, f64) = (400.0, 650.0);
/// Head mass as a multiple of handle mass; > 1 keeps the head heavier.
pub const HEAD_MASS_RATIO_RANGE: (f64, f64) = (1.2, 2.0);

/// Parametric hammer. The body frame has its origin at the center of mass
/// with axes parallel to the handle frame (+x along the handle, toward the
/// head).
#[derive(Clone, Debug)]
pub struct ObjectSpec {
    pub handle_length: f64,
    pub handle_radius: f64,
    pub handle_density: f64,
    /// Full box extents along body x, y, z.
    pub head_extents: [f64; 3],
    pub head_density: f64,
    pub mass: f64,
    /// Center of mass in the handle-centered frame (handle midpoint origin).
    pub com_offset: Vector3<f64>,
    /// Diagonal body-frame inertia about the COM, kg m^2.
    pub inertia: Vector3<f64>,
    /// Capsule segment endpoints in the COM frame.
    pub handle_p0: Vector3<f64>,
    pub handle_p1: Vector3<f64>,
    /// Head box center in the COM frame.
    pub head_center: Vector3<f64>,
}

fn capsule_volume(length: f64, radius: f64) -> f64 {
    std::f64::consts::PI * radius * radius * length
        + 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3)
}

impl ObjectSpec {
    /// Compose a hammer from explicit part dimensions and densities. The head
    /// box is centered on the handle axis at the +x handle end.
    pub fn compose(
        handle_length: f64,
        handle_radius: f64,
        handle_density: f64,
        head_extents: [f64; 3],
        head_density: f64,
    ) -> Result<ObjectSpec> {
        for (name, v) in [
            ("handle length", handle_length),
            ("handle radius", handle_radius),
            ("handle density", handle_density),
            ("head extent x", head_extents[0]),
            ("head extent y", head_extents[1]),
            ("head extent z", head_extents[2]),
            ("head density", head_density),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "object {name} must be positive, got {v}"
                )));
            }
        }

        let handle_mass = handle_density * capsule_volume(handle_length, handle_radius);
        let head_volume = head_extents[0] * head_extents[1] * head_extents[2];
        let head_mass = head_density * head_volume;
        let mass = handle_mass + head_mass;

        // Handle-centered frame: capsule midpoint at origin, head box center
        // at the +x handle end.
        let half = handle_length / 2.0;
        let head_x = half;
        let com_x = head_mass * head_x / mass;
        let com_offset = Vector3::new(com_x, 0.0, 0.0);

        // Capsule inertia about its own COM (axis = x).
        let r = handle_radius;
        let l = handle_length;
        let m_cyl = handle_density * std::f64::consts::PI * r * r * l;
        let m_hemi = handle_density * 2.0 / 3.0 * std::f64::consts::PI * r.powi(3);
        let cap_ix = 0.5 * m_cyl * r * r + 2.0 * m_hemi * 0.4 * r * r;
        // Each hemisphere about the capsule center: (2/5)r^2 about its
        // flat-face center, transferred out by L/2 with COM lever 3r/8.
        let cap_iperp = m_cyl * (l * l / 12.0 + r * r / 4.0)
            + 2.0 * m_hemi * (0.4 * r * r + l * l / 4.0 + 0.375 * l * r);

        // Box inertia about its own center.
        let [ex, ey, ez] = head_extents;
        let box_ix = head_mass * (ey * ey + ez * ez) / 12.0;
        let box_iy = head_mass * (ex * ex + ez * ez) / 12.0;
        let box_iz = head_mass * (ex * ex + ey * ey) / 12.0;

        // Parallel-axis shift of both parts to the composite COM. Offsets are
        // along x only, so the composite inertia stays diagonal.
        let d_handle = com_x;
        let d_head = head_x - com_x;
        let ix = cap_ix + box_ix;
        let iy = cap_iperp + handle_mass * d_handle * d_handle
            + box_iy
            + head_mass * d_head * d_head;
        let iz = cap_iperp + handle_mass * d_handle * d_handle
            + box_iz
            + head_mass * d_head * d_head;

        let spec = ObjectSpec {
            handle_length,
            handle_radius,
            handle_density,
            head_extents,
            head_density,
            mass,
            com_offset,
            inertia: Vector3::new(ix, iy, iz),
            handle_p0: Vector3::new(-half - com_x, 0.0, 0.0),
            handle_p1: Vector3::new(half - com_x, 0.0, 0.0),
            head_center: Vector3::new(head_x - com_x, 0.0, 0.0),
        };
        if !(spec.inertia.x > 0.0 && spec.inertia.y > 0.0 && spec.inertia.z > 0.0) {
            return Err(Error::InvalidInput("object inertia must be positive".into()));
        }
        Ok(spec)
    }

    /// Lowest possible surface point offset: handle radius below an axis
    /// endpoint or a head corner, whichever applies.
    pub fn ground_candidates(&self) -> Vec<(Vector3<f64>, f64)> {
        // (body-frame point, surface offset toward the ground along -z after
        // rotation). Capsule end-spheres carry their radius; box corners are
        // exact surface points.
        let mut out = vec![
            (self.handle_p0, self.handle_radius),
            (self.handle_p1, self.handle_radius),
        ];
        let [ex, ey, ez] = self.head_extents;
        for sx in [-0.5, 0.5] {
            for sy in [-0.5, 0.5] {
                for sz in [-0.5, 0.5] {
                    out.push((
                        self.head_center + Vector3::new(sx * ex, sy * ey, sz * ez),
                        0.0,
                    ));
                }
            }
        }
        out
    }
}

/// Draw a hammer: base dimensions from the documented ranges, linear
/// dimensions scaled by `object_scale`, then both part densities scaled by
/// `mass_scale` so total mass scales exactly.
pub fn procgen_hammer(rng: &mut impl Rng, dr: &DRSample) -> ObjectSpec {
    let handle_length = rng.gen_range(HANDLE_LENGTH_RANGE.0..HANDLE_LENGTH_RANGE.1);
    let handle_radius = rng.gen_range(HANDLE_RADIUS_RANGE.0..HANDLE_RADIUS_RANGE.1);
    let ex = rng.gen_range(HEAD_SMALL_RANGE.0..HEAD_SMALL_RANGE.1);
    let ey = rng.gen_range(HEAD_LONG_RANGE.0..HEAD_LONG_RANGE.1);
    let ez = rng.gen_range(HEAD_SMALL_RANGE.0..HEAD_SMALL_RANGE.1);
    let rho_handle = rng.gen_range(HANDLE_DENSITY_RANGE.0..HANDLE_DENSITY_RANGE.1);
    let ratio = rng.gen_range(HEAD_MASS_RATIO_RANGE.0..HEAD_MASS_RATIO_RANGE.1);

    let s = dr.object_scale;
    let handle_length = handle_length * s;
    let handle_radius = handle_radius * s;
    let extents = [ex * s, ey * s, ez * s];

    let handle_mass = rho_handle * capsule_volume(handle_length, handle_radius);
    let head_volume = extents[0] * extents[1] * extents[2];
    let rho_head = ratio * handle_mass / head_volume;

    ObjectSpec::compose(
        handle_length,
        handle_radius,
        rho_handle * dr.mass_scale,
        extents,
        rho_head * dr.mass_scale,
    )
    .expect("sampled hammer dimensions are positive")
}
