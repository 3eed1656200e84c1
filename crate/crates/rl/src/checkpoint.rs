//! Versioned binary policy checkpoints.
//!
//! Layout: 8-byte magic, u32 format version, one mode byte, u32 action
//! arity, u32 array count, then each named weight array as (u16 name length,
//! name bytes, u8 rank, u32 dims, little-endian f32 data) in the fixed
//! parameter order. Saving a loaded checkpoint reproduces the bytes exactly.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use sha2::{Digest, Sha256};

use grasplab_core::{Error, Result};

use crate::net::{PolicyNet, PARAM_NAMES};
use crate::TrainMode;

const MAGIC: &[u8; 8] = b"GLABCKPT";
const VERSION: u32 = 1;

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::io(path.display().to_string(), e)
}

fn fmt_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::format(path.display().to_string(), msg)
}

pub fn save_checkpoint(net: &PolicyNet<f32>, mode: TrainMode, path: &Path) -> Result<()> {
    if net.recurrent != mode.recurrent() {
        return Err(Error::InvalidInput(format!(
            "network recurrence does not match mode {mode}"
        )));
    }
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(mode.code());
    buf.extend_from_slice(&(net.act_dim as u32).to_le_bytes());
    let views = net.param_views();
    buf.extend_from_slice(&(views.len() as u32).to_le_bytes());
    for (name, view) in views {
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(view.ndim() as u8);
        for &d in view.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in view.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(&buf).map_err(|e| io_err(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(fmt_err(self.path, "truncated checkpoint"));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }
}

pub fn load_checkpoint(path: &Path) -> Result<(PolicyNet<f32>, TrainMode)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| io_err(path, e))?;
    let mut r = Reader {
        bytes: &bytes,
        at: 0,
        path,
    };
    let mut take = |n: usize| r.take(n);

    if take(8)? != MAGIC {
        return Err(fmt_err(path, "bad magic; not a policy checkpoint"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(fmt_err(path, format!("unsupported version {version}")));
    }
    let mode = TrainMode::from_code(take(1)?[0])
        .map_err(|_| fmt_err(path, "unknown mode byte"))?;
    let arity = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    if arity == 0 {
        return Err(fmt_err(path, "zero action arity"));
    }
    let count = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    if count != PARAM_NAMES.len() {
        return Err(fmt_err(
            path,
            format!("expected {} arrays, found {count}", PARAM_NAMES.len()),
        ));
    }

    let mut net = PolicyNet::<f32>::zeros(arity, mode.recurrent());
    let mut views = net.param_views_mut();
    for (expected_name, view) in views.iter_mut() {
        let name_len = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(take(name_len)?)
            .map_err(|_| fmt_err(path, "array name is not utf-8"))?
            .to_owned();
        if name != *expected_name {
            return Err(fmt_err(
                path,
                format!("array order mismatch: expected {expected_name}, found {name}"),
            ));
        }
        let rank = take(1)?[0] as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize);
        }
        if dims != view.shape() {
            return Err(fmt_err(
                path,
                format!(
                    "shape mismatch for {name}: file {dims:?}, expected {:?}",
                    view.shape()
                ),
            ));
        }
        let len: usize = dims.iter().product();
        let raw = take(len * 4)?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let arr = ArrayD::from_shape_vec(IxDyn(&dims), data)
            .map_err(|e| fmt_err(path, e.to_string()))?;
        view.assign(&arr);
    }
    drop(take);
    if r.at != bytes.len() {
        return Err(fmt_err(path, "trailing bytes after last array"));
    }
    drop(views);
    Ok((net, mode))
}

/// Content hash used as the checkpoint id in reports and manifests.
pub fn file_sha256(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut file, &mut hasher).map_err(|e| io_err(path, e))?;
    Ok(hex::encode(hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_byte_identical() {
        let net = PolicyNet::<f32>::init(9, true, 42, -0.5);
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.ckpt");
        let p2 = dir.path().join("b.ckpt");
        save_checkpoint(&net, TrainMode::Eigengrasp, &p1).unwrap();
        let (loaded, mode) = load_checkpoint(&p1).unwrap();
        assert_eq!(mode, TrainMode::Eigengrasp);
        save_checkpoint(&loaded, mode, &p2).unwrap();
        let a = std::fs::read(&p1).unwrap();
        let b = std::fs::read(&p2).unwrap();
        assert_eq!(a, b);
        assert_eq!(file_sha256(&p1).unwrap(), file_sha256(&p2).unwrap());
    }

    #[test]
    fn mode_and_arity_survive() {
        let dir = tempfile::tempdir().unwrap();
        for (mode, dim) in [
            (TrainMode::Eigengrasp, 9),
            (TrainMode::Unconstrained, 16),
            (TrainMode::Feedforward, 9),
        ] {
            let net = PolicyNet::<f32>::init(dim, mode.recurrent(), 7, -0.5);
            let p = dir.path().join(format!("{mode}.ckpt"));
            save_checkpoint(&net, mode, &p).unwrap();
            let (loaded, got) = load_checkpoint(&p).unwrap();
            assert_eq!(got, mode);
            assert_eq!(loaded.act_dim, dim);
            assert_eq!(loaded.recurrent, mode.recurrent());
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ckpt");
        let net = PolicyNet::<f32>::init(4, true, 1, -0.5);
        save_checkpoint(&net, TrainMode::Eigengrasp, &p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[0] = b'X';
        std::fs::write(&p, &bytes).unwrap();
        assert!(load_checkpoint(&p).is_err());

        let mut truncated = std::fs::read(&p).unwrap();
        truncated[0] = b'G';
        truncated.truncate(truncated.len() - 10);
        std::fs::write(&p, &truncated).unwrap();
        assert!(load_checkpoint(&p).is_err());
    }
}
