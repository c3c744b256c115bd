//! Small dense helpers: spectral norms and a cyclic Jacobi eigensolver.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Largest singular value by power iteration on `JᵀJ`.
pub fn spectral_norm(j: &DMatrix<f64>) -> f64 {
    let n = j.ncols();
    if n == 0 || j.nrows() == 0 {
        return 0.0;
    }
    let jt = j.transpose();
    let g = &jt * j;
    // deterministic start with all components present
    let mut v = nalgebra::DVector::from_fn(n, |i, _| 1.0 + 0.1 * i as f64);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let w = &g * &v;
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / nw;
        if (next - lambda).abs() <= 1e-15 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(0.0).sqrt()
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEigen {
    /// Eigenvalues in nonincreasing order.
    pub values: Vec<f64>,
    /// Row `k` (length `n`) is the unit eigenvector for `values[k]`.
    pub vectors: Vec<f64>,
    pub n: usize,
    pub sweeps: usize,
}

impl SymEigen {
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }
}

/// Cyclic Jacobi on a row-major symmetric `n×n` matrix.
///
/// Sweeps run in fixed row order until the off-diagonal Frobenius norm drops
/// below `tol·‖A‖_F`; a final sweep then skips only rotations that are
/// negligible relative to the diagonal so small eigenvalues also converge.
pub fn jacobi_eigh(a: &[f64], n: usize, tol: f64) -> Result<SymEigen> {
    if a.len() != n * n {
        return Err(Error::Dim { expected: n * n, got: a.len() });
    }
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let fro = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    if fro == 0.0 {
        return Ok(finish(m, v, n, 0));
    }
    let off = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                s += 2.0 * m[p * n + q] * m[p * n + q];
            }
        }
        s.sqrt()
    };
    let max_sweeps = 100;
    let mut sweeps = 0;
    let mut strict = false;
    loop {
        if !strict && off(&m) <= tol * fro {
            strict = true;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                if strict && apq.abs() <= f64::EPSILON * (app.abs() * aqq.abs()).sqrt() {
                    continue;
                }
                rotate(&mut m, &mut v, n, p, q);
                rotated = true;
            }
        }
        sweeps += 1;
        if strict && !rotated {
            break;
        }
        if sweeps >= max_sweeps {
            if off(&m) <= tol * fro {
                break;
            }
            return Err(Error::Convergence(format!("jacobi: {sweeps} sweeps")));
        }
    }
    Ok(finish(m, v, n, sweeps))
}

fn rotate(m: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = m[p * n + q];
    let app = m[p * n + p];
    let aqq = m[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    for k in 0..n {
        let mkp = m[k * n + p];
        let mkq = m[k * n + q];
        m[k * n + p] = c * mkp - s * mkq;
        m[k * n + q] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[p * n + k];
        let mqk = m[q * n + k];
        m[p * n + k] = c * mpk - s * mqk;
        m[q * n + k] = s * mpk + c * mqk;
    }
    m[p * n + q] = 0.0;
    m[q * n + p] = 0.0;
    let (vp, vq) = if p < q {
        let (lo, hi) = v.split_at_mut(q * n);
        (&mut lo[p * n..p * n + n], &mut hi[..n])
    } else {
        unreachable!()
    };
    for k in 0..n {
        let a = vp[k];
        let b = vq[k];
        vp[k] = c * a - s * b;
        vq[k] = s * a + c * b;
    }
}

fn finish(m: Vec<f64>, v: Vec<f64>, n: usize, sweeps: usize) -> SymEigen {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[b * n + b].total_cmp(&m[a * n + a]).then(a.cmp(&b)));
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        values.push(m[k * n + k]);
        let row = &v[k * n..(k + 1) * n];
        let sign = first_nonzero_sign(row);
        vectors.extend(row.iter().map(|x| sign * x));
    }
    SymEigen { values, vectors, n, sweeps }
}

/// `+1` or `-1` so that the first nonzero component becomes positive.
pub fn first_nonzero_sign(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for x in v {
        if x.abs() > 1e-12 * scale {
            return x.signum();
        }
    }
    1.0
}
