//! Monte-Carlo errors of `F_nn` against a known target and the convergence study.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bounds::{choose_r, theoretical_error_bound};
use super::build::{construct_f_nn, ConstructedMap};
use super::grid::GridDataset;
use super::synthetic::TargetMap;
use crate::error::{Error, Result};
use crate::rng;

pub const RATE_HEADER: &str = "n,err_fwd,err_inv,bound_fwd,bound_inv";

fn uniform_point(seed: u64, i: usize, d: usize) -> Vec<f64> {
    let mut r = rng::stream(seed, i as u64);
    (0..d).map(|_| r.random::<f64>()).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sample `i` is drawn from `stream(seed, i)`; terms are summed in index order.
fn mc_mean(samples: usize, term: impl Fn(usize) -> Result<f64> + Sync + Send) -> Result<f64> {
    if samples < 100 {
        return Err(Error::Param(format!("need at least 100 samples, got {samples}")));
    }
    let terms: Vec<f64> = (0..samples).into_par_iter().map(term).collect::<Result<_>>()?;
    Ok(terms.iter().sum::<f64>() / samples as f64)
}

/// Mean of `‖F_nn(x) − F(x)‖²` over uniform `x ∈ [0, 1]^d`.
pub fn empirical_l2_error(map: &ConstructedMap, target: &dyn TargetMap, samples: usize, seed: u64) -> Result<f64> {
    let d = map.d;
    mc_mean(samples, |i| {
        let x = uniform_point(seed, i, d);
        Ok(sq_dist(&map.forward(&x)?, &target.eval(&x)))
    })
}

/// `‖F_nn⁻¹ − F⁻¹‖²` over `F(K)` through the paper-inverse path, by the change
/// of variables `y = F(x)` with weight `|det ∇F(x)|`.
pub fn empirical_inverse_l2_error(map: &ConstructedMap, target: &dyn TargetMap, samples: usize, seed: u64) -> Result<f64> {
    let d = map.d;
    mc_mean(samples, |i| {
        let x = uniform_point(seed, i, d);
        let y = target.eval(&x);
        Ok(sq_dist(&map.paper_inverse(&y)?, &x) * target.jacobian_det(&x).abs())
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    /// Squared L² errors, comparable with the bounds.
    pub err_fwd: f64,
    pub err_inv: f64,
    pub bound_fwd: f64,
    pub bound_inv: f64,
    pub r: f64,
    pub layers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateStudy {
    pub d: usize,
    pub c_eps: f64,
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `log ‖F_nn − F‖_{L²}` against `log n`.
    pub slope_fwd: f64,
    pub slope_inv: f64,
}

impl RateStudy {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(RATE_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{},{:e},{:e},{:e},{:e}", r.n, r.err_fwd, r.err_inv, r.bound_fwd, r.bound_inv);
        }
        s
    }

    pub fn forward_dominated(&self) -> bool {
        self.rows.iter().all(|r| r.err_fwd <= r.bound_fwd)
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Build `F_nn` from grid samples of `target` with `ε = c_ε/n` and the smallest
/// admissible `r`.
pub fn construct_for_target(target: &dyn TargetMap, n: usize, c_eps: f64) -> Result<ConstructedMap> {
    let d = target.dim();
    let data = GridDataset::from_fn(d, n, |x| target.eval(x))?;
    let map = construct_f_nn(&data, c_eps / n as f64)?;
    let cert = &map.certificate;
    let r = choose_r(cert.product_forward, cert.product_inverse, target.lip(), target.lip_inv(), n, d)?;
    map.compose_with_hr(r)
}

pub fn rate_study(target: &dyn TargetMap, n_list: &[usize], c_eps: f64, samples: usize, seed: u64) -> Result<RateStudy> {
    if n_list.len() < 3 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Param("n list must be increasing with at least 3 entries".into()));
    }
    if !(c_eps > 0.0) {
        return Err(Error::Param(format!("c_eps must be positive, got {c_eps}")));
    }
    let d = target.dim();
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let map = construct_for_target(target, n, c_eps)?;
        let b = theoretical_error_bound(target.lip(), target.lip_inv(), n, d, c_eps);
        rows.push(RateRow {
            n,
            err_fwd: empirical_l2_error(&map, target, samples, seed)?,
            err_inv: empirical_inverse_l2_error(&map, target, samples, seed)?,
            bound_fwd: b.forward,
            bound_inv: b.inverse,
            r: map.r().unwrap_or(f64::NAN),
            layers: map.layer_count(),
        });
    }
    let ln: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let slope = |f: fn(&RateRow) -> f64| ls_slope(&ln, &rows.iter().map(|r| 0.5 * f(r).ln()).collect::<Vec<_>>());
    Ok(RateStudy { d, c_eps, slope_fwd: slope(|r| r.err_fwd), slope_inv: slope(|r| r.err_inv), rows })
}
