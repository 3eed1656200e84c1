//! Binary masks and millimeter depth maps in portable graymap form.
//!
//! Masks load from P2 (ASCII) or P5 (binary) graymaps, any maxval; nonzero
//! means foreground. They save as P5 maxval 255. Depth maps are 16-bit P5
//! graymaps holding millimeters, sample 0 meaning no reading; multi-byte
//! samples are big-endian as the format requires.

use std::path::Path;

use crate::error::{Error, Result};

/// Binary foreground mask over a cell grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskImage {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl MaskImage {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimMismatch(format!(
                "mask payload holds {} cells, {width}x{height} needs {}",
                data.len(),
                width * height
            )));
        }
        Ok(MaskImage {
            width,
            height,
            data,
        })
    }

    pub fn blank(width: usize, height: usize) -> Self {
        MaskImage {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, fg: bool) {
        self.data[y * self.width + x] = fg;
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Foreground cell coordinates in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height)
            .flat_map(move |y| (0..self.width).map(move |x| (x, y)))
            .filter(move |&(x, y)| self.get(x, y))
    }

    pub fn same_shape(&self, other: &MaskImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        let mut bytes = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        bytes.extend(self.data.iter().map(|&b| if b { 255u8 } else { 0 }));
        std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load_pgm(path: &Path) -> Result<Self> {
        let (width, height, samples) = read_pgm(path)?;
        let data = samples.into_iter().map(|s| s != 0).collect();
        MaskImage::new(width, height, data)
    }
}

/// Depth readings in millimeters; 0 means the sensor returned nothing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    mm: Vec<u16>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize, mm: Vec<u16>) -> Result<Self> {
        if mm.len() != width * height {
            return Err(Error::DimMismatch(format!(
                "depth payload holds {} samples, {width}x{height} needs {}",
                mm.len(),
                width * height
            )));
        }
        Ok(DepthImage { width, height, mm })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Depth at a cell in meters; `None` when the sensor had no reading.
    pub fn depth_m(&self, x: usize, y: usize) -> Option<f64> {
        match self.mm[y * self.width + x] {
            0 => None,
            mm => Some(f64::from(mm) / 1000.0),
        }
    }

    pub fn set_mm(&mut self, x: usize, y: usize, mm: u16) {
        self.mm[y * self.width + x] = mm;
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        let mut bytes = format!("P5\n{} {}\n65535\n", self.width, self.height).into_bytes();
        for &v in &self.mm {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load_pgm(path: &Path) -> Result<Self> {
        let (width, height, samples) = read_pgm(path)?;
        DepthImage::new(width, height, samples)
    }
}

/// Parses a P2/P5 graymap into (width, height, samples).
fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let name = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| Error::io(name.clone(), e))?;
    let mut pos = 0usize;
    let magic = next_token(&bytes, &mut pos)
        .ok_or_else(|| Error::format(&name, "missing graymap magic"))?;
    let binary = match magic.as_slice() {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(Error::format(
                &name,
                format!("unsupported magic {:?}", String::from_utf8_lossy(other)),
            ))
        }
    };
    let mut header_num = |what: &str| -> Result<usize> {
        next_token(&bytes, &mut pos)
            .and_then(|t| std::str::from_utf8(&t).ok()?.parse().ok())
            .ok_or_else(|| Error::format(&name, format!("bad or missing {what}")))
    };
    let width = header_num("width")?;
    let height = header_num("height")?;
    let maxval = header_num("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format(&name, "zero width or height"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(&name, format!("maxval {maxval} outside 1..=65535")));
    }

    let count = width * height;
    let mut samples = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates maxval from the raster.
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(Error::format(&name, "missing raster separator"));
        }
        pos += 1;
        let raster = &bytes[pos..];
        if maxval < 256 {
            if raster.len() != count {
                return Err(Error::format(
                    &name,
                    format!("raster is {} bytes, need {count}", raster.len()),
                ));
            }
            samples.extend(raster.iter().map(|&b| u16::from(b)));
        } else {
            if raster.len() != count * 2 {
                return Err(Error::format(
                    &name,
                    format!("raster is {} bytes, need {}", raster.len(), count * 2),
                ));
            }
            samples.extend(
                raster
                    .chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]])),
            );
        }
    } else {
        for _ in 0..count {
            let v = next_token(&bytes, &mut pos)
                .and_then(|t| std::str::from_utf8(&t).ok()?.parse::<u32>().ok())
                .ok_or_else(|| Error::format(&name, "truncated ASCII raster"))?;
            if v > 65535 {
                return Err(Error::format(&name, format!("sample {v} exceeds 16 bits")));
            }
            samples.push(v as u16);
        }
    }
    for &s in &samples {
        if usize::from(s) > maxval {
            return Err(Error::format(
                &name,
                format!("sample {s} exceeds maxval {maxval}"),
            ));
        }
    }
    Ok((width, height, samples))
}

/// Next whitespace-delimited token, skipping `#` comments to end of line.
fn next_token(bytes: &[u8], pos: &mut usize) -> Option<Vec<u8>> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (*pos > start).then(|| bytes[start..*pos].to_vec())
}
