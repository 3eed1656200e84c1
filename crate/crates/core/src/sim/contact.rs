//! Narrow-phase contact queries between hand spheres, the hammer capsule and
//! box, and the ground plane, plus the penalty force law.
//!
//! Normals point from the surface toward the probing sphere, i.e. along the
//! force applied to the sphere's body.

use nalgebra::{UnitQuaternion, Vector3};

/// One penetrating contact.
#[derive(Clone, Copy, Debug)]
pub struct Contact {
    /// World-space contact point on the penetrated surface.
    pub point: Vector3<f64>,
    /// Unit normal, surface -> sphere.
    pub normal: Vector3<f64>,
    /// Penetration depth, > 0.
    pub depth: f64,
}

pub fn closest_point_on_segment(
    p: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
) -> Vector3<f64> {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= f64::EPSILON {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + t * ab
}

/// Sphere versus capsule (segment `a`..`b` with radius `cr`).
pub fn sphere_capsule(
    center: &Vector3<f64>,
    radius: f64,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    cr: f64,
) -> Option<Contact> {
    let on_axis = closest_point_on_segment(center, a, b);
    let d = center - on_axis;
    let dist = d.norm();
    let depth = radius + cr - dist;
    if depth <= 0.0 {
        return None;
    }
    let normal = if dist > 1e-9 {
        d / dist
    } else {
        Vector3::new(0.0, 0.0, 1.0)
    };
    Some(Contact {
        point: on_axis + normal * cr,
        normal,
        depth,
    })
}

/// Sphere versus oriented box (`half` are half-extents in the box frame).
pub fn sphere_box(
    center: &Vector3<f64>,
    radius: f64,
    box_center: &Vector3<f64>,
    box_rot: &UnitQuaternion<f64>,
    half: &Vector3<f64>,
) -> Option<Contact> {
    let local = box_rot.inverse_transform_vector(&(center - box_center));
    let clamped = Vector3::new(
        local.x.clamp(-half.x, half.x),
        local.y.clamp(-half.y, half.y),
        local.z.clamp(-half.z, half.z),
    );
    let d = local - clamped;
    let dist = d.norm();
    if dist > 1e-12 {
        // Center outside the box.
        let depth = radius - dist;
        if depth <= 0.0 {
            return None;
        }
        let n_local = d / dist;
        return Some(Contact {
            point: box_center + box_rot.transform_vector(&clamped),
            normal: box_rot.transform_vector(&n_local),
            depth,
        });
    }
    // Center inside: push out along the axis of least separation.
    let mut best_axis = 0;
    let mut best_gap = f64::INFINITY;
    let mut sign = 1.0;
    for axis in 0..3 {
        for s in [-1.0, 1.0] {
            let gap = half[axis] - s * local[axis];
            if gap < best_gap {
                best_gap = gap;
                best_axis = axis;
                sign = s;
            }
        }
    }
    let mut n_local = Vector3::zeros();
    n_local[best_axis] = sign;
    let mut surface = local;
    surface[best_axis] = sign * half[best_axis];
    Some(Contact {
        point: box_center + box_rot.transform_vector(&surface),
        normal: box_rot.transform_vector(&n_local),
        depth: best_gap + radius,
    })
}

/// Sphere versus the ground plane z = 0 (normal +z).
pub fn sphere_ground(center: &Vector3<f64>, radius: f64) -> Option<Contact> {
    let depth = radius - center.z;
    if depth <= 0.0 {
        return None;
    }
    Some(Contact {
        point: Vector3::new(center.x, center.y, 0.0),
        normal: Vector3::new(0.0, 0.0, 1.0),
        depth,
    })
}

/// Kelvin-Voigt normal force magnitude, clamped non-negative so a separating
/// contact never pulls.
pub fn penalty_normal_force(depth: f64, depth_rate: f64, stiffness: f64, damping: f64) -> f64 {
    (stiffness * depth + damping * depth_rate).max(0.0)
}

/// Regularized Coulomb friction opposing the tangential slip `v_t`, with the
/// magnitude capped both by mu*N and by the impulse that would stop the slip
/// within one substep (mass `m_eff`), which keeps sticking contacts stable.
pub fn friction_force(
    normal_force: f64,
    mu: f64,
    v_t: &Vector3<f64>,
    m_eff: f64,
    dt: f64,
) -> Vector3<f64> {
    let speed = v_t.norm();
    if speed <= 1e-12 || normal_force <= 0.0 {
        return Vector3::zeros();
    }
    let coulomb = mu * normal_force;
    let stopping = 0.5 * m_eff * speed / dt;
    let mag = coulomb.min(stopping);
    -(mag / speed) * v_t
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn segment_closest_point() {
        let a = Vector3::new(0.0, 0.0, 0.0);
        let b = Vector3::new(1.0, 0.0, 0.0);
        assert_eq!(
            closest_point_on_segment(&Vector3::new(0.5, 1.0, 0.0), &a, &b),
            Vector3::new(0.5, 0.0, 0.0)
        );
        assert_eq!(
            closest_point_on_segment(&Vector3::new(-2.0, 0.3, 0.0), &a, &b),
            a
        );
        assert_eq!(
            closest_point_on_segment(&Vector3::new(5.0, -0.3, 0.0), &a, &b),
            b
        );
    }

    #[test]
    fn sphere_capsule_depth_and_normal() {
        let a = Vector3::new(-1.0, 0.0, 0.0);
        let b = Vector3::new(1.0, 0.0, 0.0);
        // Sphere of radius 0.1 centered 0.12 above a capsule of radius 0.05.
        let c = sphere_capsule(&Vector3::new(0.2, 0.0, 0.12), 0.1, &a, &b, 0.05).unwrap();
        assert_relative_eq!(c.depth, 0.03, epsilon = 1e-12);
        assert_relative_eq!(c.normal, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
        assert_relative_eq!(c.point, Vector3::new(0.2, 0.0, 0.05), epsilon = 1e-12);
        // No contact when separated.
        assert!(sphere_capsule(&Vector3::new(0.0, 0.0, 0.2), 0.1, &a, &b, 0.05).is_none());
    }

    #[test]
    fn sphere_box_outside_and_inside() {
        let center = Vector3::new(0.0, 0.0, 0.0);
        let rot = UnitQuaternion::identity();
        let half = Vector3::new(0.1, 0.2, 0.3);
        // Outside, above +z face.
        let c = sphere_box(&Vector3::new(0.0, 0.0, 0.35), 0.07, &center, &rot, &half).unwrap();
        assert_relative_eq!(c.depth, 0.02, epsilon = 1e-12);
        assert_relative_eq!(c.normal, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
        // Center inside: least-separation axis is x.
        let c = sphere_box(&Vector3::new(0.05, 0.0, 0.0), 0.01, &center, &rot, &half).unwrap();
        assert_relative_eq!(c.normal, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(c.depth, 0.05 + 0.01, epsilon = 1e-12);
        // Rotated box: contact follows the rotation.
        let rot = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2);
        let c = sphere_box(&Vector3::new(0.25, 0.0, 0.0), 0.07, &center, &rot, &half).unwrap();
        // Box y-halfwidth 0.2 now faces world x.
        assert_relative_eq!(c.depth, 0.07 - 0.05, epsilon = 1e-12);
        assert!(c.normal.x > 0.999);
    }

    #[test]
    fn ground_contact() {
        assert!(sphere_ground(&Vector3::new(0.0, 0.0, 0.2), 0.1).is_none());
        let c = sphere_ground(&Vector3::new(0.3, -0.2, 0.06), 0.1).unwrap();
        assert_relative_eq!(c.depth, 0.04, epsilon = 1e-12);
        assert_eq!(c.normal, Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(c.point, Vector3::new(0.3, -0.2, 0.0));
    }

    #[test]
    fn penalty_force_never_pulls() {
        assert_relative_eq!(penalty_normal_force(0.001, 0.0, 1000.0, 10.0), 1.0);
        assert_relative_eq!(penalty_normal_force(0.001, 0.1, 1000.0, 10.0), 2.0);
        // Fast separation: clamped to zero rather than attracting.
        assert_eq!(penalty_normal_force(0.001, -1.0, 1000.0, 10.0), 0.0);
    }

    #[test]
    fn friction_opposes_slip_and_caps() {
        let v = Vector3::new(0.2, 0.0, 0.0);
        // Coulomb-limited regime.
        let f = friction_force(10.0, 0.5, &v, 1000.0, 0.001);
        assert_relative_eq!(f, Vector3::new(-5.0, 0.0, 0.0), epsilon = 1e-12);
        // Stopping-impulse limited regime: 0.5 * m * v / dt = 0.05.
        let f = friction_force(10.0, 0.5, &v, 0.0005, 0.001);
        assert_relative_eq!(f.norm(), 0.05, epsilon = 1e-12);
        assert!(f.x < 0.0);
        // Zero normal force, no friction.
        assert_eq!(friction_force(0.0, 0.5, &v, 1.0, 0.001), Vector3::zeros());
    }
}
