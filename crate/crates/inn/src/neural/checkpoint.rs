//! Coupling-INN checkpoints: JSON manifest plus f64le parameter blob.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::coupling::{Arch, CouplingInn};
use super::train::TrainConfig;
use crate::blob::{blob_path, read_f64le, write_f64le};
use crate::error::{Error, Result};

pub const FORMAT: &str = "inn.coupling.v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub arch: Arch,
    pub config: Option<TrainConfig>,
    pub step: usize,
    pub param_count: usize,
    /// Blob file name, relative to the manifest.
    pub params: String,
}

pub fn save(path: &Path, model: &CouplingInn, config: Option<&TrainConfig>, step: usize) -> Result<()> {
    let blob = blob_path(path);
    let m = Manifest {
        format: FORMAT.into(),
        arch: model.arch.clone(),
        config: config.cloned(),
        step,
        param_count: model.param_count(),
        params: blob.file_name().unwrap().to_string_lossy().into_owned(),
    };
    write_f64le(&blob, &model.params)?;
    fs::write(path, serde_json::to_string_pretty(&m)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(CouplingInn, Manifest)> {
    let m: Manifest = serde_json::from_str(&fs::read_to_string(path)?)?;
    if m.format != FORMAT {
        return Err(Error::Format(format!("unknown checkpoint format {:?}", m.format)));
    }
    m.arch.validate()?;
    if m.param_count != m.arch.param_count() {
        return Err(Error::Format("parameter count does not match architecture".into()));
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let params = read_f64le(&dir.join(&m.params), Some(m.param_count))?;
    if params.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("checkpoint parameters"));
    }
    Ok((CouplingInn { arch: m.arch.clone(), params }, m))
}
