//! Raw little-endian f64 blobs next to JSON manifests.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub fn write_f64le(path: &Path, data: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(data.len() * 8);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_f64le(path: &Path, expected: Option<usize>) -> Result<Vec<f64>> {
    let buf = fs::read(path)?;
    if buf.len() % 8 != 0 {
        return Err(Error::Format(format!("{}: length {} is not a multiple of 8", path.display(), buf.len())));
    }
    let out: Vec<f64> = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    if let Some(n) = expected {
        if out.len() != n {
            return Err(Error::Format(format!("{}: expected {n} values, found {}", path.display(), out.len())));
        }
    }
    Ok(out)
}

/// Sibling blob path: `model.json` -> `model.bin`.
pub fn blob_path(manifest: &Path) -> std::path::PathBuf {
    manifest.with_extension("bin")
}
