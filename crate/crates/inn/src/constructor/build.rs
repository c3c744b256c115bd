//! The four-stage interpolating map `φ̃^N ∘ η̃ ∘ φ^N ∘ η` and its certificate.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::GridDataset;
use crate::error::{Error, Result};
use crate::flows::{FlowLayer, InvertibleMap, LocalizedLast, LocalizedShift, LocalizedTranslate, PerCoordinatePwl, PwlNet, ShiftLast};
use crate::linalg::norm2;

/// Coordinates closer than this are treated as equal.
pub const DISTINCT_TOL: f64 = 1e-12;

/// Smallest gap between sorted values with the pair attaining it (original indices).
pub fn min_gap(values: &[f64]) -> (f64, usize, usize) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut best = (f64::INFINITY, 0, 0);
    for w in idx.windows(2) {
        let g = values[w[1]] - values[w[0]];
        if g < best.0 {
            best = (g, w[0], w[1]);
        }
    }
    best
}

/// Shift the last coordinate by `Σ_{j<d} n^{-j} σ(x_j)`, spreading grid points
/// to distinct multiples of `1/N` there.
pub fn build_eta(n: usize, d: usize) -> Result<FlowLayer> {
    if n < 2 || d < 2 {
        return Err(Error::Param(format!("eta needs n >= 2 and d >= 2, got n={n}, d={d}")));
    }
    Ok(FlowLayer::ShiftLast(ShiftLast { dim: d, n, sources: d - 1 }))
}

/// One translate per point, moving its first `d−1` coordinates onto the target.
pub fn build_phi_stage(points: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Vec<FlowLayer>> {
    let big_n = points.len();
    if big_n != targets.len() || big_n == 0 {
        return Err(Error::Dim { expected: big_n, got: targets.len() });
    }
    let d = points[0].len();
    let last: Vec<f64> = points.iter().map(|p| p[d - 1]).collect();
    let (gap, a, b) = min_gap(&last);
    let spacing = 1.0 / big_n as f64;
    if big_n > 1 && gap < spacing - DISTINCT_TOL {
        return Err(Error::Stage {
            stage: "phi",
            msg: format!("points {a} and {b} are {gap:e} apart in the last coordinate, need {spacing:e}"),
        });
    }
    Ok(points
        .iter()
        .zip(targets)
        .map(|(p, y)| {
            FlowLayer::LocalizedTranslate(LocalizedTranslate {
                dim: d,
                center: p[d - 1],
                half_width: 0.5 * spacing,
                displacement: (0..d - 1).map(|j| y[j] - p[j]).collect(),
            })
        })
        .collect())
}

/// Output of [`build_tilde_eta`].
#[derive(Clone, Debug, PartialEq)]
pub struct TildeEta {
    pub layers: Vec<FlowLayer>,
    pub j0: usize,
    /// Tolerance the remaining stages are built for; `N·gap` under the identity shortcut.
    pub epsilon: f64,
    /// Guaranteed separation at `j0` after the stage.
    pub separation: f64,
    /// Coordinate `j0` of every point after the stage.
    pub targets: Vec<f64>,
}

/// Separate the points at one coordinate `j0 < d` by at least `ε/N`.
pub fn build_tilde_eta(points: &[Vec<f64>], epsilon: f64) -> Result<TildeEta> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Param(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let big_n = points.len();
    let d = points[0].len();
    let nf = big_n as f64;
    let last: Vec<f64> = points.iter().map(|p| p[d - 1]).collect();
    if big_n > 1 && min_gap(&last).0 < 1.0 / nf - DISTINCT_TOL {
        return Err(Error::Stage { stage: "tilde_eta", msg: "last coordinates are not 1/N apart".into() });
    }
    let gaps: Vec<f64> = (0..d - 1).map(|j| min_gap(&points.iter().map(|p| p[j]).collect::<Vec<_>>()).0).collect();
    let mut j0 = 0;
    for j in 1..d - 1 {
        if gaps[j] > gaps[j0] {
            j0 = j;
        }
    }
    let values: Vec<f64> = points.iter().map(|p| p[j0]).collect();
    let need = epsilon / nf;
    if gaps[j0] >= need {
        return Ok(TildeEta { layers: vec![], j0, epsilon: nf * gaps[j0], separation: gaps[j0], targets: values });
    }

    // greedy cover by closed intervals of length ε from the smallest value
    let mut order: Vec<usize> = (0..big_n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut targets = values.clone();
    let mut k = 0;
    while k < big_n {
        let left = values[order[k]];
        let mut end = k;
        while end < big_n && values[order[end]] <= left + epsilon {
            end += 1;
        }
        let count = (end - k) as f64;
        for (i, &p) in order[k..end].iter().enumerate() {
            targets[p] = left + i as f64 * epsilon / count;
        }
        k = end;
    }
    let delta = 0.5 / nf;
    let layers = points
        .iter()
        .zip(&targets)
        .filter(|(p, a)| **a != p[j0])
        .map(|(p, a)| {
            FlowLayer::LocalizedShift(LocalizedShift {
                dim: d,
                target: j0,
                anchor: d - 1,
                center: p[d - 1],
                delta,
                shift: 2.0 * (a - p[j0]),
            })
        })
        .collect();
    Ok(TildeEta { layers, j0, epsilon, separation: need, targets })
}

/// One last-coordinate correction per point, gated on coordinate `j0`.
pub fn build_tilde_phi_stage(points: &[Vec<f64>], targets_last: &[f64], j0: usize, delta_j0: f64) -> Result<Vec<FlowLayer>> {
    let d = points[0].len();
    let values: Vec<f64> = points.iter().map(|p| p[j0]).collect();
    let (gap, a, b) = min_gap(&values);
    if !(delta_j0 > 0.0) || (points.len() > 1 && gap < delta_j0 * (1.0 - 1e-9) - DISTINCT_TOL) {
        return Err(Error::Stage {
            stage: "tilde_phi",
            msg: format!("points {a} and {b} are {gap:e} apart at coordinate {j0}, need {delta_j0:e}"),
        });
    }
    Ok(points
        .iter()
        .zip(targets_last)
        .map(|(p, y)| {
            FlowLayer::LocalizedLast(LocalizedLast {
                dim: d,
                control: j0,
                center: p[j0],
                half_width: 0.5 * delta_j0,
                displacement: y - p[d - 1],
            })
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageBound {
    pub name: String,
    pub forward: f64,
    pub inverse: f64,
    /// Largest per-layer bound in the stage; layers have disjoint supports.
    pub layer_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `max ‖y^α − x^α‖₂ + 1/n`.
    pub c: f64,
    pub epsilon: f64,
    pub stages: Vec<StageBound>,
    pub product_forward: f64,
    pub product_inverse: f64,
}

impl Certificate {
    pub fn from_stages(c: f64, epsilon: f64, stages: Vec<StageBound>) -> Self {
        let product_forward = stages.iter().map(|s| s.forward).product();
        let product_inverse = stages.iter().map(|s| s.inverse).product();
        Self { c, epsilon, stages, product_forward, product_inverse }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub layers: Vec<FlowLayer>,
}

/// `F̃_nn`, optionally preceded by `H^r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructedMap {
    pub d: usize,
    pub n: usize,
    /// Requested interpolation tolerance.
    pub epsilon: f64,
    pub j0: usize,
    pub stages: Vec<Stage>,
    pub certificate: Certificate,
    /// `H^r` prepended by [`ConstructedMap::compose_with_hr`].
    pub hr: Option<PerCoordinatePwl>,
}

fn layer_max(layers: &[FlowLayer]) -> f64 {
    layers.iter().filter_map(FlowLayer::bound).fold(1.0, f64::max)
}

/// Build `F̃_nn` interpolating the grid data to within `epsilon`.
pub fn construct_f_nn(data: &GridDataset, epsilon: f64) -> Result<ConstructedMap> {
    let (d, n, big_n) = (data.d, data.n, data.len());
    let nf = big_n as f64;
    let eta = build_eta(n, d)?;
    let mut pts: Vec<Vec<f64>> = data.xs().iter().map(|x| eta.forward(x)).collect::<Result<_>>()?;

    let phi = build_phi_stage(&pts, &data.y)?;
    for (p, y) in pts.iter_mut().zip(&data.y) {
        p[..d - 1].copy_from_slice(&y[..d - 1]);
    }

    let te = build_tilde_eta(&pts, epsilon)?;
    for (p, a) in pts.iter_mut().zip(&te.targets) {
        p[te.j0] = *a;
    }

    let y_last: Vec<f64> = data.y.iter().map(|y| y[d - 1]).collect();
    let tilde_phi = build_tilde_phi_stage(&pts, &y_last, te.j0, te.separation)?;

    let c = data.max_displacement() + 1.0 / n as f64;
    let eps = te.epsilon;
    let nn = n as f64;
    let eta_bound = nn / (nn - 1.0);
    let phi_bound = 1.0 + 6.0 * nf * c;
    let te_bound = if te.layers.is_empty() { 1.0 } else { 1.0 + 2.0 * nf * eps };
    let tphi_bound = 1.0 + 6.0 * nf * c / eps;
    let sb =
        |name: &str, b: f64, layers: &[FlowLayer]| StageBound { name: name.into(), forward: b, inverse: b, layer_max: layer_max(layers) };
    let bounds = vec![
        sb("eta", eta_bound, std::slice::from_ref(&eta)),
        sb("phi", phi_bound, &phi),
        sb("tilde_eta", te_bound, &te.layers),
        sb("tilde_phi", tphi_bound, &tilde_phi),
    ];
    let stages = vec![
        Stage { name: "eta".into(), layers: vec![eta] },
        Stage { name: "phi".into(), layers: phi },
        Stage { name: "tilde_eta".into(), layers: te.layers },
        Stage { name: "tilde_phi".into(), layers: tilde_phi },
    ];
    Ok(ConstructedMap { d, n, epsilon, j0: te.j0, stages, certificate: Certificate::from_stages(c, eps, bounds), hr: None })
}

impl ConstructedMap {
    /// `F̃_nn` alone.
    pub fn tilde(&self) -> InvertibleMap {
        InvertibleMap { layers: self.stages.iter().flat_map(|s| s.layers.iter().cloned()).collect() }
    }

    /// `F_nn = F̃_nn ∘ H^r` (or `F̃_nn` when no `r` is set).
    pub fn full(&self) -> InvertibleMap {
        let mut layers: Vec<FlowLayer> = self.hr.iter().cloned().map(FlowLayer::PerCoordinatePwl).collect();
        layers.extend(self.tilde().layers);
        InvertibleMap { layers }
    }

    pub fn compose_with_hr(mut self, r: f64) -> Result<Self> {
        self.hr = Some(PerCoordinatePwl { dim: self.d, net: PwlNet::new(self.n, r)? });
        Ok(self)
    }

    pub fn r(&self) -> Option<f64> {
        self.hr.as_ref().map(|h| h.net.r)
    }

    pub fn layer_count(&self) -> usize {
        self.stages.iter().map(|s| s.layers.len()).sum::<usize>() + usize::from(self.hr.is_some())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut v = x.to_vec();
        if let Some(h) = &self.hr {
            check(self.d, x)?;
            h.apply(&mut v);
        }
        self.tilde().forward(&v)
    }

    /// True inverse of [`Self::forward`]: `(H^r)⁻¹ ∘ F̃_nn⁻¹`.
    pub fn exact_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut v = self.tilde().inverse(y)?;
        if let Some(h) = &self.hr {
            h.unapply(&mut v);
        }
        Ok(v)
    }

    /// The approximate inverse `H^r ∘ F̃_nn⁻¹`.
    pub fn paper_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut v = self.tilde().inverse(y)?;
        if let Some(h) = &self.hr {
            h.apply(&mut v);
        }
        Ok(v)
    }

    /// `max_α ‖F̃_nn(x^α) − y^α‖₂`.
    pub fn interpolation_residual(&self, data: &GridDataset) -> Result<f64> {
        let t = self.tilde();
        let mut worst: f64 = 0.0;
        for i in 0..data.len() {
            let out = t.forward(&data.x(i))?;
            let r: Vec<f64> = out.iter().zip(&data.y[i]).map(|(a, b)| a - b).collect();
            worst = worst.max(norm2(&r));
        }
        Ok(worst)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        InvertibleMap::new(m.full().layers)?;
        Ok(m)
    }
}

fn check(d: usize, x: &[f64]) -> Result<()> {
    if x.len() != d {
        return Err(Error::Dim { expected: d, got: x.len() });
    }
    Ok(())
}
