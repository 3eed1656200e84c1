//! Rigid-body pose type shared by the hand model, simulator and affordance
//! pipeline.

use nalgebra::{Quaternion, Translation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// Position plus unit quaternion. Quaternions are stored normalized; file
/// formats order the components (w, x, y, z).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            position: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Pose {
            position,
            orientation,
        }
    }

    pub fn from_parts(position: [f64; 3], quat_wxyz: [f64; 4]) -> Result<Self> {
        let [w, x, y, z] = quat_wxyz;
        let q = Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "quaternion norm {norm} is not 1 within 1e-9"
            )));
        }
        Ok(Pose {
            position: Vector3::from(position),
            orientation: UnitQuaternion::new_normalize(q),
        })
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.orientation * p + self.position
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.orientation * v
    }

    pub fn inverse(&self) -> Pose {
        let inv_rot = self.orientation.inverse();
        Pose {
            position: -(inv_rot * self.position),
            orientation: inv_rot,
        }
    }

    /// Flat [px, py, pz, qw, qx, qy, qz] layout used by observations and
    /// pose records.
    pub fn to_array7(&self) -> [f64; 7] {
        let q = self.orientation.quaternion();
        [
            self.position.x,
            self.position.y,
            self.position.z,
            q.w,
            q.i,
            q.j,
            q.k,
        ]
    }

    pub fn from_array7(a: [f64; 7]) -> Result<Self> {
        Pose::from_parts([a[0], a[1], a[2]], [a[3], a[4], a[5], a[6]])
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.orientation.quaternion().coords.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Mul for Pose {
    type Output = Pose;

    /// Composition: `(a * b)` applies `b` first, then `a`.
    fn mul(self, rhs: Pose) -> Pose {
        Pose {
            position: self.orientation * rhs.position + self.position,
            orientation: self.orientation * rhs.orientation,
        }
    }
}

/// Translation-only pose.
pub fn translation(v: Vector3<f64>) -> Pose {
    Pose::new(v, UnitQuaternion::identity())
}

/// Yaw rotation about the world z axis.
pub fn yaw_rotation(angle: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle)
}

pub fn translation3(x: f64, y: f64, z: f64) -> Translation3<f64> {
    Translation3::new(x, y, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn compose_matches_point_transform() {
        let a = Pose::new(
            Vector3::new(0.1, -0.2, 0.3),
            UnitQuaternion::from_euler_angles(0.3, -0.1, 0.7),
        );
        let b = Pose::new(
            Vector3::new(-1.0, 0.5, 0.2),
            UnitQuaternion::from_euler_angles(-0.2, 0.4, 0.1),
        );
        let p = Vector3::new(0.3, 0.9, -0.4);
        let via_compose = (a * b).transform_point(&p);
        let via_seq = a.transform_point(&b.transform_point(&p));
        assert_relative_eq!(via_compose, via_seq, epsilon = 1e-12);
    }

    #[test]
    fn inverse_roundtrip() {
        let a = Pose::new(
            Vector3::new(0.4, 2.0, -0.7),
            UnitQuaternion::from_euler_angles(1.0, 0.2, -0.5),
        );
        let p = Vector3::new(-0.3, 0.1, 0.8);
        let back = a.inverse().transform_point(&a.transform_point(&p));
        assert_relative_eq!(back, p, epsilon = 1e-12);
    }

    #[test]
    fn array7_roundtrip_and_norm_check() {
        let a = Pose::new(
            Vector3::new(1.0, 2.0, 3.0),
            UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3),
        );
        let b = Pose::from_array7(a.to_array7()).unwrap();
        assert_relative_eq!(a.position, b.position, epsilon = 1e-12);
        assert!(Pose::from_parts([0.0; 3], [1.0, 0.1, 0.0, 0.0]).is_err());
    }
}
