//! Paired `(ξ, y_h)` samples and their manifest-plus-blob format.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kl::{draw, Xi, XI_LEN};
use super::solver::{solve, SolveSpec};
use crate::blob::{blob_path, read_f64le, write_f64le};
use crate::error::{Error, Result};
use crate::rng;

/// Redraw limit per sample before giving up.
pub const MAX_REDRAWS: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct PairDataset {
    pub seed: u64,
    pub spec: SolveSpec,
    /// Rejected draws over all samples.
    pub rejections: usize,
    /// `M × 400`.
    pub xi: Array2<f64>,
    /// `M × (1/h + 1)²`.
    pub y: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    #[serde(rename = "M")]
    m: usize,
    d_in: usize,
    d_out: usize,
    seed: u64,
    h: f64,
    dtype: String,
    u_min: f64,
    rejections: usize,
    records_file: PathBuf,
}

/// Draw sample `index`, redrawing on the same stream until `u ≥ u_min` at
/// every node.
pub fn accepted_xi(seed: u64, index: u64, spec: &SolveSpec) -> Result<(Xi, Vec<f64>, usize)> {
    let mut r = rng::stream(seed, index);
    for rejected in 0..MAX_REDRAWS {
        let xi = draw(&mut r);
        let u = xi.on_grid(spec.cells);
        if u.iter().all(|&v| v >= spec.u_min) {
            return Ok((xi, u, rejected));
        }
    }
    Err(Error::Convergence(format!("sample {index}: no admissible coefficient in {MAX_REDRAWS} draws")))
}

/// Solve `m` samples in parallel; results are assembled in index order.
pub fn generate(m: usize, seed: u64, spec: &SolveSpec) -> Result<PairDataset> {
    spec.validate()?;
    if m == 0 {
        return Err(Error::Param("dataset needs at least one sample".into()));
    }
    let records: Vec<(Xi, Vec<f64>, usize)> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let (xi, u, rej) = accepted_xi(seed, i, spec)?;
            Ok((xi, solve(&u, spec)?.y, rej))
        })
        .collect::<Result<_>>()?;
    let d_out = spec.nodes();
    let mut xs = Array2::zeros((m, XI_LEN));
    let mut ys = Array2::zeros((m, d_out));
    let mut rejections = 0;
    for (k, (xi, y, rej)) in records.into_iter().enumerate() {
        xs.row_mut(k).assign(&ndarray::ArrayView1::from(&xi.0));
        ys.row_mut(k).assign(&ndarray::ArrayView1::from(&y));
        rejections += rej;
    }
    Ok(PairDataset { seed, spec: *spec, rejections, xi: xs, y: ys })
}

impl PairDataset {
    pub fn len(&self) -> usize {
        self.xi.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let blob = blob_path(path);
        let (m, d_in, d_out) = (self.len(), self.xi.ncols(), self.y.ncols());
        let manifest = Manifest {
            m,
            d_in,
            d_out,
            seed: self.seed,
            h: self.spec.h(),
            dtype: "f64le".into(),
            u_min: self.spec.u_min,
            rejections: self.rejections,
            records_file: blob.file_name().map(PathBuf::from).unwrap_or_default(),
        };
        let mut flat = Vec::with_capacity(m * (d_in + d_out));
        for k in 0..m {
            flat.extend(self.xi.row(k).iter());
            flat.extend(self.y.row(k).iter());
        }
        fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
        write_f64le(&blob, &flat)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mf: Manifest = serde_json::from_str(&fs::read_to_string(path)?)?;
        if mf.dtype != "f64le" {
            return Err(Error::Format(format!("unsupported dtype {}", mf.dtype)));
        }
        let cells = (1.0 / mf.h).round() as usize;
        if (cells + 1) * (cells + 1) != mf.d_out || mf.d_in != XI_LEN {
            return Err(Error::Format(format!("inconsistent dims d_in={} d_out={} h={}", mf.d_in, mf.d_out, mf.h)));
        }
        let blob = path.parent().unwrap_or(Path::new(".")).join(&mf.records_file);
        let rec = mf.d_in + mf.d_out;
        let flat = read_f64le(&blob, Some(mf.m * rec))?;
        let mut xi = Array2::zeros((mf.m, mf.d_in));
        let mut y = Array2::zeros((mf.m, mf.d_out));
        for k in 0..mf.m {
            let r = &flat[k * rec..(k + 1) * rec];
            xi.row_mut(k).assign(&ndarray::ArrayView1::from(&r[..mf.d_in]));
            y.row_mut(k).assign(&ndarray::ArrayView1::from(&r[mf.d_in..]));
        }
        let spec = SolveSpec { cells, u_min: mf.u_min, ..SolveSpec::default() };
        Ok(Self { seed: mf.seed, spec, rejections: mf.rejections, xi, y })
    }
}
