//! Non-centered PCA: encoder `G`, decoder `G*` and tail-sum accounting.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::blob::{blob_path, read_f64le, write_f64le};
use crate::constructor::bounds::{c_nn, c_nn_inverse};
use crate::error::{check_dim, Error, Result};
use crate::linalg::jacobi_eigh;

pub const FORMAT: &str = "inn.pca.v1";

/// Off-diagonal threshold for the eigensolver, relative to `‖C‖_F`.
pub const JACOBI_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Covariance when `dim ≤ N`, Gram matrix otherwise.
    Auto,
    Covariance,
    Gram,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcaBasis {
    pub ambient_dim: usize,
    pub sample_count: usize,
    pub d_u: usize,
    /// All `min(N, dim)` eigenvalues, nonincreasing.
    pub eigvals: Vec<f64>,
    /// `d_u × dim`, one unit eigenvector per row.
    pub eigvecs: Array2<f64>,
    /// Plug-in estimate of `c_ν` from the training samples.
    pub c_nu: f64,
}

fn clip_eigvals(values: &mut [f64]) -> Result<()> {
    let top = values.first().copied().unwrap_or(0.0).max(1.0);
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -1e-12 * top {
                return Err(Error::Convergence(format!("covariance eigenvalue {v:e} is negative")));
            }
            *v = 0.0;
        }
    }
    Ok(())
}

/// Two passes of modified Gram-Schmidt; rows that vanish are replaced by the
/// first standard basis vector independent of the previous rows.
fn orthonormalize(rows: &mut Array2<f64>) {
    let (k, dim) = rows.dim();
    for i in 0..k {
        for _ in 0..2 {
            for j in 0..i {
                let p = rows.row(i).dot(&rows.row(j));
                let rj = rows.row(j).to_owned();
                rows.row_mut(i).scaled_add(-p, &rj);
            }
        }
        let nrm = rows.row(i).dot(&rows.row(i)).sqrt();
        if nrm > 1e-8 {
            rows.row_mut(i).mapv_inplace(|v| v / nrm);
            continue;
        }
        for e in 0..dim {
            let mut cand = Array1::zeros(dim);
            cand[e] = 1.0;
            for _ in 0..2 {
                for j in 0..i {
                    let p = cand.dot(&rows.row(j));
                    cand.scaled_add(-p, &rows.row(j));
                }
            }
            let cn = cand.dot(&cand).sqrt();
            if cn > 0.5 {
                rows.row_mut(i).assign(&(cand / cn));
                break;
            }
        }
    }
}

fn sign_fix(rows: &mut Array2<f64>) {
    for mut r in rows.rows_mut() {
        let s = crate::linalg::first_nonzero_sign(r.as_slice().expect("contiguous row"));
        r.mapv_inplace(|v| s * v);
    }
}

impl PcaBasis {
    /// Fit on the rows of `samples` (one sample per row).
    pub fn fit(samples: ArrayView2<f64>, d_u: usize) -> Result<Self> {
        Self::fit_with(samples, d_u, Method::Auto)
    }

    pub fn fit_with(samples: ArrayView2<f64>, d_u: usize, method: Method) -> Result<Self> {
        let (n, dim) = samples.dim();
        if n == 0 || dim == 0 {
            return Err(Error::Param("PCA needs at least one nonempty sample".into()));
        }
        if d_u == 0 || d_u > n.min(dim) {
            return Err(Error::Param(format!("truncation {d_u} outside 1..={}", n.min(dim))));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("PCA samples"));
        }
        let gram = match method {
            Method::Auto => dim > n,
            Method::Covariance => false,
            Method::Gram => true,
        };
        let nf = n as f64;
        let (mut eigvals, mut eigvecs) = if gram {
            let g = samples.dot(&samples.t()) / nf;
            let eig = jacobi_eigh(g.as_slice().expect("standard layout"), n, JACOBI_TOL)?;
            let mut vecs = Array2::zeros((d_u, dim));
            for k in 0..d_u {
                let mu = eig.values[k];
                if mu > 0.0 {
                    let v = ArrayView1::from(eig.vector(k));
                    let phi = samples.t().dot(&v) / (nf * mu).sqrt();
                    vecs.row_mut(k).assign(&phi);
                }
            }
            let mut vals = eig.values;
            vals.truncate(n.min(dim));
            (vals, vecs)
        } else {
            let c = samples.t().dot(&samples) / nf;
            let eig = jacobi_eigh(c.as_slice().expect("standard layout"), dim, JACOBI_TOL)?;
            let vecs = Array2::from_shape_fn((d_u, dim), |(k, j)| eig.vector(k)[j]);
            let mut vals = eig.values;
            vals.truncate(n.min(dim));
            (vals, vecs)
        };
        clip_eigvals(&mut eigvals)?;
        orthonormalize(&mut eigvecs);
        sign_fix(&mut eigvecs);

        let m4 = samples.rows().into_iter().map(|u| u.dot(&u).powi(2)).sum::<f64>() / nf;
        let c_f2: f64 = eigvals.iter().map(|l| l * l).sum();
        let c_nu = (m4 - c_f2).max(0.0).sqrt();
        Ok(Self { ambient_dim: dim, sample_count: n, d_u, eigvals, eigvecs, c_nu })
    }

    /// Same basis cut to fewer components.
    pub fn truncate(&self, d_u: usize) -> Result<Self> {
        if d_u == 0 || d_u > self.d_u {
            return Err(Error::Param(format!("cannot truncate {} components to {d_u}", self.d_u)));
        }
        let mut b = self.clone();
        b.d_u = d_u;
        b.eigvecs = self.eigvecs.slice(ndarray::s![..d_u, ..]).to_owned();
        Ok(b)
    }

    pub fn encode(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.ambient_dim, u.len())?;
        Ok(self.eigvecs.dot(&ArrayView1::from(u)).to_vec())
    }

    pub fn decode(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.d_u, v.len())?;
        Ok(self.eigvecs.t().dot(&ArrayView1::from(v)).to_vec())
    }

    /// Row-wise [`Self::encode`].
    pub fn encode_batch(&self, u: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_dim(self.ambient_dim, u.ncols())?;
        Ok(u.dot(&self.eigvecs.t()))
    }

    /// Row-wise [`Self::decode`].
    pub fn decode_batch(&self, v: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_dim(self.d_u, v.ncols())?;
        Ok(v.dot(&self.eigvecs))
    }

    /// `Σ_{j>d_U} λ_j`.
    pub fn tail_sum(&self) -> f64 {
        self.eigvals.iter().skip(self.d_u).sum()
    }

    pub fn energy_fraction(&self) -> f64 {
        let total: f64 = self.eigvals.iter().sum();
        if total == 0.0 {
            return 1.0;
        }
        self.eigvals[..self.d_u].iter().sum::<f64>() / total
    }

    /// `(λ₁, …, λ_{d_U}) / Σ_{i≤d_U} λ_i`.
    pub fn weight_vector(&self) -> Result<Vec<f64>> {
        let top = &self.eigvals[..self.d_u];
        let s: f64 = top.iter().sum();
        if !(s > 0.0) {
            return Err(Error::Param("weight vector of a zero spectrum".into()));
        }
        Ok(top.iter().map(|l| l / s).collect())
    }

    /// Mean of `‖u − G*G u‖²` over the rows of `samples`.
    pub fn reconstruction_mse(&self, samples: ArrayView2<f64>) -> Result<f64> {
        let rec = self.decode_batch(self.encode_batch(samples)?.view())?;
        let diff = &samples - &rec;
        Ok(diff.map_axis(Axis(1), |r| r.dot(&r)).sum() / samples.nrows() as f64)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let blob = blob_path(path);
        let manifest = Manifest {
            format: FORMAT.into(),
            ambient_dim: self.ambient_dim,
            sample_count: self.sample_count,
            d_u: self.d_u,
            eigvals: self.eigvals.clone(),
            c_nu: self.c_nu,
            c_nu_is_estimate: true,
            eigvecs_file: blob.file_name().map(PathBuf::from).unwrap_or_default(),
        };
        fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
        write_f64le(&blob, self.eigvecs.as_slice().expect("standard layout"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Manifest = serde_json::from_str(&fs::read_to_string(path)?)?;
        if m.format != FORMAT {
            return Err(Error::Format(format!("expected format {FORMAT}, found {}", m.format)));
        }
        let blob = path.parent().unwrap_or(Path::new(".")).join(&m.eigvecs_file);
        let data = read_f64le(&blob, Some(m.d_u * m.ambient_dim))?;
        let eigvecs = Array2::from_shape_vec((m.d_u, m.ambient_dim), data).map_err(|e| Error::Format(e.to_string()))?;
        Ok(Self { ambient_dim: m.ambient_dim, sample_count: m.sample_count, d_u: m.d_u, eigvals: m.eigvals, eigvecs, c_nu: m.c_nu })
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    ambient_dim: usize,
    sample_count: usize,
    d_u: usize,
    eigvals: Vec<f64>,
    c_nu: f64,
    c_nu_is_estimate: bool,
    eigvecs_file: PathBuf,
}

/// Squared-error bounds of the reduced pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBoundReport {
    pub d: usize,
    pub sample_count: usize,
    pub tail_x: f64,
    pub tail_y: f64,
    pub c_mu: f64,
    pub c_f_mu: f64,
    /// `G*_Y ∘ F ∘ G_X` against `F†`.
    pub pca_forward: f64,
    pub pca_inverse: f64,
    /// Same with `F_nn` in place of `F`.
    pub full_forward: f64,
    pub full_inverse: f64,
}

/// Evaluate the PCA-only and full-system bounds. The sample count `N` of the
/// bases also plays the role of the grid size in the `N^{-2/d}` term.
pub fn tail_bound_report(bx: &PcaBasis, by: &PcaBasis, lip_f: f64, lip_f_inv: f64, c_eps: f64) -> Result<TailBoundReport> {
    if bx.d_u != by.d_u {
        return Err(Error::Dim { expected: bx.d_u, got: by.d_u });
    }
    if bx.sample_count != by.sample_count {
        return Err(Error::Param("bases were fitted on different sample counts".into()));
    }
    let d = bx.d_u;
    let nf = bx.sample_count as f64;
    let root = (d as f64).sqrt() / nf.sqrt();
    let (tx, ty) = (bx.tail_sum(), by.tail_sum());
    let (cm, cf) = (bx.c_nu, by.c_nu);
    let fwd_mc = (lip_f * lip_f * cm + cf) * root;
    let inv_mc = (lip_f_inv * lip_f_inv * cf + cm) * root;
    let fwd_tail = lip_f * lip_f * tx + ty;
    let inv_tail = lip_f_inv * lip_f_inv * ty + tx;
    let grid = nf.powf(-2.0 / d as f64);
    Ok(TailBoundReport {
        d,
        sample_count: bx.sample_count,
        tail_x: tx,
        tail_y: ty,
        c_mu: cm,
        c_f_mu: cf,
        pca_forward: 2.0 * fwd_mc + 2.0 * fwd_tail,
        pca_inverse: 2.0 * inv_mc + 2.0 * inv_tail,
        full_forward: 2.0 * c_nn(lip_f, d, c_eps) * grid + 4.0 * fwd_mc + 4.0 * fwd_tail,
        full_inverse: 2.0 * c_nn_inverse(lip_f, lip_f_inv, d, c_eps) * grid + 4.0 * inv_mc + 4.0 * inv_tail,
    })
}
