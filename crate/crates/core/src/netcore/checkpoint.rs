//! Model checkpoints.
//!
//! Binary, little-endian: magic `MPM1`, then `u32` capacity tag (0 linear,
//! 1 hidden), `u32` input dimension, `u32` class count, `u32` hidden width
//! (0 for linear), then every layer's weights (row-major, outputs × inputs)
//! followed by its biases, as `f32`. A plain-text `key=value` sidecar with
//! the `.meta` extension sits next to the checkpoint.

use std::fs;
use std::path::{Path, PathBuf};

use super::{Capacity, Dense, ModelParams};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MPM1";

pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

pub fn save_checkpoint(params: &ModelParams, path: &Path, meta: &[(String, String)]) -> Result<()> {
    let tag: u32 = match params.capacity() {
        Capacity::Linear => 0,
        Capacity::Hidden => 1,
    };
    let mut buf = Vec::with_capacity(20 + 4 * params.n_params());
    buf.extend_from_slice(MAGIC);
    for v in [
        tag,
        params.input_dim() as u32,
        params.n_classes() as u32,
        params.hidden_width() as u32,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in params.values() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    let mut text = format!("capacity={}\n", params.capacity());
    for (k, v) in meta {
        text.push_str(&format!("{k}={v}\n"));
    }
    let mp = meta_path(path);
    fs::write(&mp, text).map_err(|e| Error::io(&mp, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header_err = |reason: &str| Error::Header {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < 20 {
        return Err(Error::Length {
            path: path.to_path_buf(),
            expected: 20,
            found: bytes.len() as u64,
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(header_err("magic bytes are not MPM1"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let capacity = match word(0) {
        0 => Capacity::Linear,
        1 => Capacity::Hidden,
        _ => return Err(header_err("unknown capacity tag")),
    };
    let (dim, classes, hidden) = (word(1), word(2), word(3));
    if capacity == Capacity::Hidden && hidden == 0 {
        return Err(header_err("hidden capacity with zero width"));
    }
    let mut shape = ModelParams::zeros(capacity, dim, classes, hidden);
    let expected = 20 + 4 * shape.n_params() as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::Length {
            path: path.to_path_buf(),
            expected,
            found: bytes.len() as u64,
        });
    }
    for (slot, raw) in shape.values_mut().zip(bytes[20..].chunks_exact(4)) {
        *slot = f32::from_le_bytes(raw.try_into().unwrap()) as f64;
    }
    let layers: Vec<Dense> = shape.layers().to_vec();
    ModelParams::from_layers(capacity, layers)
}
