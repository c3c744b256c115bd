//! Invariant checks for serialized models: round trips, certificates and
//! per-layer Jacobian bounds.

use ndarray::ArrayView2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constructor::ConstructedMap;
use crate::error::{check_dim, Error, Result};
use crate::flows::{FlowLayer, InvertibleMap};
use crate::lifted::LiftedMap;
use crate::linalg::max_abs_diff;
use crate::lipschitz::{max_jacobian_norm, sampled_ratio};
use crate::neural::CouplingInn;
use crate::rng;

pub const ROUND_TRIP_TOL: f64 = 1e-9;

/// Relative slack for comparing sampled norms with bounds.
const BOUND_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, pass: value <= limit }
    }

    fn bound(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, pass: value <= limit * (1.0 + BOUND_SLACK) }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {:.6e} <= {:.6e}", self.name, self.value, self.limit)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub probes: usize,
    pub pairs: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { probes: 1000, pairs: 10_000, seed: 0 }
    }
}

fn box_points(dim: usize, lo: f64, hi: f64, count: usize, seed: u64, tag: u64) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, tag);
    (0..count).map(|_| (0..dim).map(|_| r.random_range(lo..hi)).collect()).collect()
}

/// Max-norm round-trip residual of `inverse ∘ forward`.
pub fn round_trip<F, G>(points: &[Vec<f64>], forward: F, inverse: G) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
    G: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut worst: f64 = 0.0;
    for x in points {
        worst = worst.max(max_abs_diff(x, &inverse(&forward(x)?)?));
    }
    Ok(worst)
}

/// Inputs seen by each layer when `starts` are pushed through `map`.
fn layer_inputs(map: &InvertibleMap, starts: &[Vec<f64>]) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut out = Vec::with_capacity(map.layers.len());
    let mut states = starts.to_vec();
    for layer in &map.layers {
        let next = states.iter().map(|s| layer.forward(s)).collect::<Result<Vec<_>>>()?;
        out.push(std::mem::replace(&mut states, next));
    }
    Ok(out)
}

/// Worst ratio of sampled Jacobian norm to stated bound, forward and inverse,
/// per layer kind.
fn layer_checks(map: &InvertibleMap, starts: &[Vec<f64>]) -> Result<Vec<Check>> {
    let inputs = layer_inputs(map, starts)?;
    let mut worst: Vec<(String, f64, f64)> = Vec::new();
    let mut note = |name: String, value: f64, limit: f64| match worst.iter_mut().find(|w| w.0 == name) {
        Some(w) if value / limit > w.1 / w.2 => {
            w.1 = value;
            w.2 = limit;
        }
        Some(_) => {}
        None => worst.push((name, value, limit)),
    };
    for (layer, xs) in map.layers.iter().zip(&inputs) {
        if let Some(b) = layer.bound() {
            note(format!("layer {} forward", layer.name()), max_jacobian_norm(|x| layer.jacobian(x), xs)?, b);
        }
        if let Some(b) = layer.inverse_bound() {
            let ys = xs.iter().map(|x| layer.forward(x)).collect::<Result<Vec<_>>>()?;
            note(format!("layer {} inverse", layer.name()), max_jacobian_norm(|y| layer.inverse_jacobian(y), &ys)?, b);
        }
    }
    Ok(worst.into_iter().map(|(n, v, l)| Check::bound(n, v, l)).collect())
}

fn output_box(points: &[Vec<f64>]) -> (f64, f64) {
    let lo = points.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let hi = points.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo - 0.5, hi + 0.5)
}

/// Checks for the four-stage map `F̃_nn` (the `H^r` layer, if present, is
/// checked only through its own layer bound).
pub fn verify_constructed(map: &ConstructedMap, opts: &VerifyOptions) -> Result<Vec<Check>> {
    let d = map.d;
    let tilde = map.tilde();
    let probes = box_points(d, -0.5, 1.5, opts.probes, opts.seed, 1);
    let mut checks = vec![Check::at_most("round trip", round_trip(&probes, |x| tilde.forward(x), |y| tilde.inverse(y))?, ROUND_TRIP_TOL)];
    let cert = &map.certificate;
    let fwd = sampled_ratio(|x| tilde.forward(x), d, -0.5, 1.5, opts.pairs, opts.seed ^ 0xf0)?;
    checks.push(Check::bound("lipschitz forward", fwd, cert.product_forward));
    let images = probes.iter().map(|x| tilde.forward(x)).collect::<Result<Vec<_>>>()?;
    let (lo, hi) = output_box(&images);
    let inv = sampled_ratio(|y| tilde.inverse(y), d, lo, hi, opts.pairs, opts.seed ^ 0xf1)?;
    checks.push(Check::bound("lipschitz inverse", inv, cert.product_inverse));

    let mut starts = box_points(d, 0.0, 1.0, opts.probes, opts.seed, 2);
    starts.extend((0..map.n.pow(d as u32)).map(|i| crate::constructor::grid::grid_point(d, map.n, i)));
    checks.extend(layer_checks(&map.full(), &starts)?);
    Ok(checks)
}

/// Checks for the lifted map; the Lipschitz ratio uses the first output block.
pub fn verify_lifted(map: &LiftedMap, opts: &VerifyOptions) -> Result<Vec<Check>> {
    let d = map.d;
    let dt = 2 * d + 2;
    let inner = map.inner();
    let probes = box_points(dt, -0.5, 1.5, opts.probes, opts.seed, 1);
    let mut checks = vec![Check::at_most("round trip", round_trip(&probes, |z| inner.forward(z), |z| inner.inverse(z))?, ROUND_TRIP_TOL)];
    let cert = &map.certificate;
    let fwd = sampled_ratio(|x| map.relaxed_forward(x), d, -0.5, 1.5, opts.pairs, opts.seed ^ 0xf0)?;
    checks.push(Check::bound("lipschitz forward", fwd, cert.product_forward));

    let mut starts = box_points(d, 0.0, 1.0, opts.probes, opts.seed, 2);
    starts.extend((0..map.n.pow(d as u32)).map(|i| crate::constructor::grid::grid_point(d, map.n, i)));
    let lifted: Vec<Vec<f64>> = starts.iter().map(|x| map.lift(x)).collect::<Result<_>>()?;
    checks.extend(layer_checks(&inner, &lifted)?);
    Ok(checks)
}

/// Axis-aligned probe region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ProbeBox {
    pub fn cube(dim: usize, half_width: f64) -> Self {
        Self { lo: vec![-half_width; dim], hi: vec![half_width; dim] }
    }

    /// Bounding box of the rows, widened by `margin` times its extent.
    pub fn around(rows: ArrayView2<f64>, margin: f64) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::Param("no rows to bound".into()));
        }
        let mut lo = vec![f64::INFINITY; rows.ncols()];
        let mut hi = vec![f64::NEG_INFINITY; rows.ncols()];
        for r in rows.rows() {
            for (j, &v) in r.iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        for j in 0..lo.len() {
            let pad = margin * (hi[j] - lo[j]).max(f64::EPSILON);
            lo[j] -= pad;
            hi[j] += pad;
        }
        Ok(Self { lo, hi })
    }

    fn sample(&self, count: usize, seed: u64, tag: u64) -> Vec<Vec<f64>> {
        let mut r = rng::stream(seed, tag);
        (0..count).map(|_| self.lo.iter().zip(&self.hi).map(|(&a, &b)| if b > a { r.random_range(a..b) } else { a }).collect()).collect()
    }
}

/// Round trips of a coupling INN: `Φ⁻¹∘Φ` on `u_box` and `Φ∘Φ⁻¹` on `y_box`.
/// Absolute residuals only mean something where the model is used; far
/// outside the data the inverse reaches huge magnitudes.
pub fn verify_coupling(model: &CouplingInn, opts: &VerifyOptions, u_box: &ProbeBox, y_box: &ProbeBox) -> Result<Vec<Check>> {
    let dim = model.arch.dim;
    for b in [u_box, y_box] {
        check_dim(dim, b.lo.len())?;
        check_dim(dim, b.hi.len())?;
    }
    let us = u_box.sample(opts.probes, opts.seed, 1);
    let ys = y_box.sample(opts.probes, opts.seed, 2);
    let fwd = round_trip(&us, |u| model.forward(u), |y| model.inverse(y))?;
    let inv = round_trip(&ys, |y| model.inverse(y), |u| model.forward(u))?;
    Ok(vec![
        Check::at_most("round trip inverse∘forward", fwd, ROUND_TRIP_TOL),
        Check::at_most("round trip forward∘inverse", inv, ROUND_TRIP_TOL),
    ])
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// Layers in `map` whose stated bound is exceeded by their own derivative
/// bound; only KillLast can trigger this.
pub fn inconsistent_stated_bounds(map: &InvertibleMap) -> Vec<(usize, f64, f64)> {
    map.layers
        .iter()
        .enumerate()
        .filter_map(|(i, l)| match l {
            FlowLayer::KillLast(k) if k.derivative_bound() > k.stated_bound => Some((i, k.stated_bound, k.derivative_bound())),
            _ => None,
        })
        .collect()
}
