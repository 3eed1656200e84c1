//! Dense per-cell feature grids: the matcher's input, decoupled from any
//! vision backbone. Every cell holds one unit-norm feature vector.
//!
//! File layout: two ASCII header lines, then the raw payload.
//!
//! ```text
//! featgrid 1
//! <width> <height> <dim>
//! ```
//!
//! followed immediately by `height * width * dim` little-endian 32-bit
//! floats, row-major, channel-minor (the `dim` channels of cell (0,0) come
//! first).

use std::path::Path;

use crate::error::{Error, Result};

/// Per-cell unit-norm tolerance enforced on construction and load.
pub const NORM_TOL: f32 = 1e-4;

/// Largest accepted width/height/dim, guarding allocation on corrupt headers.
const MAX_EXTENT: usize = 1 << 14;

/// H x W grid of `dim`-channel unit-norm feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureGrid {
    width: usize,
    height: usize,
    dim: usize,
    /// Row-major, channel-minor: cell (x, y) starts at (y*width + x)*dim.
    data: Vec<f32>,
}

impl FeatureGrid {
    /// Builds a grid from raw data, checking shape and per-cell unit norm.
    pub fn new(width: usize, height: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        check_extents(width, height, dim, "feature grid")?;
        let want = width * height * dim;
        if data.len() != want {
            return Err(Error::DimMismatch(format!(
                "feature grid payload holds {} floats, header implies {want}",
                data.len()
            )));
        }
        let grid = FeatureGrid {
            width,
            height,
            dim,
            data,
        };
        grid.check_norms()?;
        Ok(grid)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Feature vector of cell (x, y).
    pub fn cell(&self, x: usize, y: usize) -> &[f32] {
        let start = (y * self.width + x) * self.dim;
        &self.data[start..start + self.dim]
    }

    /// Overwrites cell (x, y), renormalizing to unit length.
    pub fn set_cell(&mut self, x: usize, y: usize, features: &[f32]) -> Result<()> {
        if features.len() != self.dim {
            return Err(Error::DimMismatch(format!(
                "cell write with {} channels into a dim-{} grid",
                features.len(),
                self.dim
            )));
        }
        let norm: f32 = features.iter().map(|v| v * v).sum::<f32>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::NonFinite("feature cell write".into()));
        }
        let start = (y * self.width + x) * self.dim;
        for (dst, src) in self.data[start..start + self.dim].iter_mut().zip(features) {
            *dst = src / norm;
        }
        Ok(())
    }

    fn check_norms(&self) -> Result<()> {
        for y in 0..self.height {
            for x in 0..self.width {
                let n: f32 = self.cell(x, y).iter().map(|v| v * v).sum::<f32>().sqrt();
                if !n.is_finite() || (n - 1.0).abs() > NORM_TOL {
                    return Err(Error::InvalidInput(format!(
                        "feature cell ({x}, {y}) has norm {n}, expected 1 within {NORM_TOL}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = format!("featgrid 1\n{} {} {}\n", self.width, self.height, self.dim)
            .into_bytes();
        bytes.reserve(self.data.len() * 4);
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let bytes = std::fs::read(path).map_err(|e| Error::io(name.clone(), e))?;
        let (line1, rest) = split_line(&bytes, &name, 1)?;
        let mut it = line1.split_ascii_whitespace();
        if it.next() != Some("featgrid") {
            return Err(parse_err(&name, 1, "expected magic `featgrid`"));
        }
        match it.next() {
            Some("1") => {}
            other => {
                return Err(parse_err(
                    &name,
                    1,
                    &format!("unsupported version {:?}", other.unwrap_or("<missing>")),
                ))
            }
        }
        let (line2, payload) = split_line(rest, &name, 2)?;
        let mut nums = line2.split_ascii_whitespace().map(|t| t.parse::<usize>());
        let mut next = |what: &str| -> Result<usize> {
            nums.next()
                .and_then(|r| r.ok())
                .ok_or_else(|| parse_err(&name, 2, &format!("bad or missing {what}")))
        };
        let width = next("width")?;
        let height = next("height")?;
        let dim = next("dim")?;
        check_extents(width, height, dim, &name)?;
        let want = width * height * dim * 4;
        if payload.len() != want {
            return Err(Error::format(
                &name,
                format!("payload is {} bytes, header implies {want}", payload.len()),
            ));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        FeatureGrid::new(width, height, dim, data)
            .map_err(|e| Error::format(&name, e.to_string()))
    }
}

fn check_extents(width: usize, height: usize, dim: usize, what: &str) -> Result<()> {
    for (label, v) in [("width", width), ("height", height), ("dim", dim)] {
        if v == 0 || v > MAX_EXTENT {
            return Err(Error::InvalidInput(format!(
                "{what}: {label} {v} outside 1..={MAX_EXTENT}"
            )));
        }
    }
    Ok(())
}

/// Splits off one `\n`-terminated ASCII line, returning (line, remainder).
fn split_line<'a>(bytes: &'a [u8], file: &str, line: usize) -> Result<(&'a str, &'a [u8])> {
    let pos = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| parse_err(file, line, "missing newline"))?;
    let text = std::str::from_utf8(&bytes[..pos])
        .map_err(|_| parse_err(file, line, "header is not ASCII"))?;
    Ok((text, &bytes[pos + 1..]))
}

fn parse_err(file: &str, line: usize, message: &str) -> Error {
    Error::Parse {
        file: file.to_string(),
        line,
        message: message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(dim: usize, k: usize) -> Vec<f32> {
        let mut v = vec![0.0; dim];
        v[k % dim] = 1.0;
        v
    }

    #[test]
    fn roundtrips_through_a_file() {
        let dim = 3;
        let mut data = Vec::new();
        for i in 0..6 {
            data.extend(unit(dim, i));
        }
        let g = FeatureGrid::new(3, 2, dim, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.feat");
        g.save(&path).unwrap();
        let back = FeatureGrid::load(&path).unwrap();
        assert_eq!(g, back);
        assert_eq!(back.cell(2, 1), &unit(dim, 5)[..]);
    }

    #[test]
    fn rejects_non_unit_cells_and_bad_headers() {
        assert!(FeatureGrid::new(1, 1, 2, vec![0.5, 0.5]).is_err());
        assert!(FeatureGrid::new(2, 1, 2, vec![1.0, 0.0]).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.feat");
        std::fs::write(&path, b"featgrid 2\n1 1 1\n\x00\x00\x80\x3f").unwrap();
        let err = FeatureGrid::load(&path).unwrap_err().to_string();
        assert!(err.contains(":1:"), "line number missing from {err}");

        std::fs::write(&path, b"featgrid 1\n1 1\n").unwrap();
        let err = FeatureGrid::load(&path).unwrap_err().to_string();
        assert!(err.contains(":2:"), "line number missing from {err}");
    }

    #[test]
    fn truncated_payload_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.feat");
        std::fs::write(&path, b"featgrid 1\n2 1 1\n\x00\x00\x80\x3f").unwrap();
        let err = FeatureGrid::load(&path).unwrap_err().to_string();
        assert!(err.contains("payload"), "unexpected error: {err}");
    }
}
