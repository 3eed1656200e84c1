//! Pinhole camera models with rigid camera-to-robot extrinsics, one per
//! world axis, loaded from a TOML calibration file.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed departure of R^T R from the identity.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// World axis a camera looks along; doubles as the grasp approach axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }

    pub fn unit(self) -> Vector3<f64> {
        match self {
            Axis::X => Vector3::x(),
            Axis::Y => Vector3::y(),
            Axis::Z => Vector3::z(),
        }
    }

    /// Tie-break rank for view arbitration: z beats x beats y.
    pub fn selection_rank(self) -> u8 {
        match self {
            Axis::Z => 0,
            Axis::X => 1,
            Axis::Y => 2,
        }
    }

    /// Right-handed basis (u1, u2) of the plane perpendicular to the axis;
    /// in-plane angles are measured from u1 toward u2. u1 x u2 = axis.
    pub fn plane_basis(self) -> (Vector3<f64>, Vector3<f64>) {
        match self {
            Axis::X => (Vector3::y(), Vector3::z()),
            Axis::Y => (Vector3::z(), Vector3::x()),
            Axis::Z => (Vector3::x(), Vector3::y()),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::InvalidInput(format!(
                "axis label {other:?} is not one of x, y, z"
            ))),
        }
    }
}

/// Pinhole intrinsics plus a rigid camera-to-robot transform.
#[derive(Clone, Debug)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Columns are the camera axes expressed in the robot frame.
    pub rotation: Matrix3<f64>,
    /// Camera origin in the robot frame.
    pub translation: Vector3<f64>,
    pub axis: Axis,
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        for (label, v) in [("fx", self.fx), ("fy", self.fy)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "camera {}: {label} must be finite and positive, got {v}",
                    self.axis
                )));
            }
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::NonFinite(format!("camera {} principal point", self.axis)));
        }
        if !(self.rotation.iter().all(|v| v.is_finite())
            && self.translation.iter().all(|v| v.is_finite()))
        {
            return Err(Error::NonFinite(format!("camera {} extrinsics", self.axis)));
        }
        let gram = self.rotation.transpose() * self.rotation;
        let dev = (gram - Matrix3::identity()).abs().max();
        if dev > ORTHONORMAL_TOL {
            return Err(Error::InvalidInput(format!(
                "camera {}: rotation departs from orthonormal by {dev:.2e}",
                self.axis
            )));
        }
        if self.rotation.determinant() < 0.0 {
            return Err(Error::InvalidInput(format!(
                "camera {}: rotation is a reflection",
                self.axis
            )));
        }
        Ok(())
    }

    /// Maps a camera-frame point into the robot frame.
    pub fn to_robot(&self, p_cam: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p_cam + self.translation
    }
}

/// On-disk calibration schema: one `[[camera]]` block per view.
#[derive(Serialize, Deserialize)]
struct CalibrationFile {
    version: u32,
    camera: Vec<CameraEntry>,
}

#[derive(Serialize, Deserialize)]
struct CameraEntry {
    axis: String,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    /// Row-major 3x3.
    rotation: [f64; 9],
    translation: [f64; 3],
}

pub fn save_calibration(cams: &[CameraModel], path: &Path) -> Result<()> {
    let file = CalibrationFile {
        version: 1,
        camera: cams
            .iter()
            .map(|c| {
                let r = &c.rotation;
                CameraEntry {
                    axis: c.axis.label().to_string(),
                    fx: c.fx,
                    fy: c.fy,
                    cx: c.cx,
                    cy: c.cy,
                    rotation: [
                        r[(0, 0)],
                        r[(0, 1)],
                        r[(0, 2)],
                        r[(1, 0)],
                        r[(1, 1)],
                        r[(1, 2)],
                        r[(2, 0)],
                        r[(2, 1)],
                        r[(2, 2)],
                    ],
                    translation: [c.translation.x, c.translation.y, c.translation.z],
                }
            })
            .collect(),
    };
    let text = toml::to_string_pretty(&file)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_calibration(path: &Path) -> Result<Vec<CameraModel>> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(name.clone(), e))?;
    let file: CalibrationFile =
        toml::from_str(&text).map_err(|e| Error::format(&name, e.to_string()))?;
    if file.version != 1 {
        return Err(Error::format(
            &name,
            format!("unsupported calibration version {}", file.version),
        ));
    }
    if file.camera.is_empty() {
        return Err(Error::format(&name, "calibration lists no cameras"));
    }
    let mut cams = Vec::with_capacity(file.camera.len());
    for entry in &file.camera {
        let axis: Axis = entry.axis.parse()?;
        if cams.iter().any(|c: &CameraModel| c.axis == axis) {
            return Err(Error::format(&name, format!("duplicate camera axis {axis}")));
        }
        let r = &entry.rotation;
        let cam = CameraModel {
            fx: entry.fx,
            fy: entry.fy,
            cx: entry.cx,
            cy: entry.cy,
            rotation: Matrix3::new(r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8]),
            translation: Vector3::new(
                entry.translation[0],
                entry.translation[1],
                entry.translation[2],
            ),
            axis,
        };
        cam.validate()
            .map_err(|e| Error::format(&name, e.to_string()))?;
        cams.push(cam);
    }
    Ok(cams)
}
