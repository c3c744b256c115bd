//! Sampled Lipschitz ratios and Jacobian norms, for checking certificates.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::linalg::{dist2, spectral_norm};
use crate::rng;

/// Largest `‖f(a) − f(b)‖/‖a − b‖` over `pairs` pairs. Even-indexed pairs are
/// independent uniform points of `[lo, hi]^dim`; odd-indexed pairs are local,
/// `b = a + δ·v` with `δ` log-uniform in `[1e-6, 1e-2]` and `v` a random unit
/// vector.
pub fn sampled_ratio<F>(f: F, dim: usize, lo: f64, hi: f64, pairs: usize, seed: u64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let ratios: Vec<f64> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let a: Vec<f64> = (0..dim).map(|_| r.random_range(lo..hi)).collect();
            let b: Vec<f64> = if i % 2 == 0 {
                (0..dim).map(|_| r.random_range(lo..hi)).collect()
            } else {
                let delta = 10f64.powf(r.random_range(-6.0..-2.0));
                let v: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
                let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
                a.iter().zip(&v).map(|(x, y)| x + delta * y / nv).collect()
            };
            let den = dist2(&a, &b);
            if den == 0.0 {
                return Ok(0.0);
            }
            Ok(dist2(&f(&a)?, &f(&b)?) / den)
        })
        .collect::<Result<_>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// Largest spectral norm of `jac` over the given points.
pub fn max_jacobian_norm<F>(jac: F, points: &[Vec<f64>]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<DMatrix<f64>> + Sync,
{
    let norms: Vec<f64> = points.par_iter().map(|p| Ok(spectral_norm(&jac(p)?))).collect::<Result<_>>()?;
    Ok(norms.into_iter().fold(0.0, f64::max))
}
