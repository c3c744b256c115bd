//! Exact-interpolation construction in the lifted dimension `2d + 2`.
//!
//! Index layout of a lifted vector (0-based): block one `0..d`, a zero slot at
//! `d`, block two `d+1..2d+1`, and the control coordinate `2d+1`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::constructor::build::{Certificate, Stage, StageBound};
use crate::constructor::GridDataset;
use crate::error::{Error, Result};
use crate::flows::hat::{ell1, ell1_deriv, ell2, ell2_deriv, relu, relu_deriv};
use crate::flows::{FlowLayer, InvertibleMap, LocalizedTranslate, ShiftLast};
use crate::linalg::{dist2, max_abs_diff};

/// Off-manifold tolerance for [`Project`].
pub const MANIFOLD_TOL: f64 = 1e-9;

/// `x ↦ (x, 0_{d+1}, x_d)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lift {
    pub d: usize,
}

impl Lift {
    pub const BOUND: f64 = 2.0;
    pub const INVERSE_BOUND: f64 = 1.0;

    pub fn lift(&self, x: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut z = vec![0.0; 2 * d + 2];
        z[..d].copy_from_slice(x);
        z[2 * d + 1] = x[d - 1];
        z
    }

    /// Left inverse: keeps block one.
    pub fn unlift(&self, z: &[f64]) -> Vec<f64> {
        z[..self.d].to_vec()
    }

    pub fn jacobian(&self) -> DMatrix<f64> {
        let d = self.d;
        let mut j = DMatrix::zeros(2 * d + 2, d);
        for i in 0..d {
            j[(i, i)] = 1.0;
        }
        j[(2 * d + 1, d - 1)] = 1.0;
        j
    }

    pub fn unlift_jacobian(&self) -> DMatrix<f64> {
        let d = self.d;
        DMatrix::from_fn(d, 2 * d + 2, |i, k| if i == k { 1.0 } else { 0.0 })
    }
}

/// `(y, 0, y, 0) ↦ y`; any other input is rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub d: usize,
}

impl Project {
    pub const BOUND: f64 = 1.0;
    pub const INVERSE_BOUND: f64 = 2.0;

    /// Largest deviation of `z` from the `(y, 0, y, 0)` manifold.
    pub fn off_manifold(&self, z: &[f64]) -> f64 {
        let d = self.d;
        let mut dev = z[d].abs().max(z[2 * d + 1].abs());
        for j in 0..d {
            dev = dev.max((z[d + 1 + j] - z[j]).abs());
        }
        dev
    }

    pub fn project(&self, z: &[f64]) -> Result<Vec<f64>> {
        let dev = self.off_manifold(z);
        if !(dev <= MANIFOLD_TOL) {
            return Err(Error::OffManifold(dev));
        }
        Ok(z[..self.d].to_vec())
    }

    pub fn unproject(&self, y: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut z = vec![0.0; 2 * d + 2];
        z[..d].copy_from_slice(y);
        z[d + 1..2 * d + 1].copy_from_slice(y);
        z
    }

    pub fn jacobian(&self) -> DMatrix<f64> {
        let d = self.d;
        DMatrix::from_fn(d, 2 * d + 2, |i, k| if i == k { 1.0 } else { 0.0 })
    }

    pub fn unproject_jacobian(&self) -> DMatrix<f64> {
        let d = self.d;
        DMatrix::from_fn(2 * d + 2, d, |i, k| if i == k || i == k + d + 1 { 1.0 } else { 0.0 })
    }
}

/// Block two gains block one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CopyBlock {
    pub d: usize,
}

impl CopyBlock {
    pub fn apply(&self, z: &mut [f64]) {
        for j in 0..self.d {
            z[self.d + 1 + j] += z[j];
        }
    }

    pub fn unapply(&self, z: &mut [f64]) {
        for j in 0..self.d {
            z[self.d + 1 + j] -= z[j];
        }
    }

    pub fn jacobian(&self) -> DMatrix<f64> {
        let dt = 2 * self.d + 2;
        let mut j = DMatrix::identity(dt, dt);
        for k in 0..self.d {
            j[(self.d + 1 + k, k)] = 1.0;
        }
        j
    }

    pub fn bound(&self) -> f64 {
        1.0 + (self.d as f64).sqrt()
    }
}

/// Control coordinate loses `2·anchor·g(z)`, with a gate `g` equal to 1/2
/// when both blocks sit at `center` and 0 once either leaves its cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KillLast {
    pub d: usize,
    pub center: Vec<f64>,
    pub delta: f64,
    pub anchor: f64,
    /// Bound carried over from the construction (`1 + 6/(Lip·n)`).
    pub stated_bound: f64,
}

impl KillLast {
    fn args(&self, z: &[f64], j: usize) -> (f64, f64) {
        let s = 2.0 / self.delta;
        (s * (z[j] - self.center[j]) + 1.0, s * (z[j + self.d + 1] - self.center[j]) + 1.0)
    }

    fn pre_gate(&self, z: &[f64]) -> f64 {
        let mut s = -0.5 * (self.d as f64 - 1.0);
        for j in 0..self.d {
            let (a, b) = self.args(z, j);
            s += ell1(a) + ell2(b);
        }
        s
    }

    pub fn gate(&self, z: &[f64]) -> f64 {
        relu(self.pre_gate(z))
    }

    pub fn apply(&self, z: &mut [f64]) {
        let g = self.gate(z);
        z[2 * self.d + 1] -= 2.0 * self.anchor * g;
    }

    pub fn unapply(&self, z: &mut [f64]) {
        let g = self.gate(z);
        z[2 * self.d + 1] += 2.0 * self.anchor * g;
    }

    pub fn jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let d = self.d;
        let dt = 2 * d + 2;
        let mut jac = DMatrix::identity(dt, dt);
        let outer = -2.0 * self.anchor * relu_deriv(self.pre_gate(z)) * 2.0 / self.delta;
        if outer != 0.0 {
            for j in 0..d {
                let (a, b) = self.args(z, j);
                jac[(dt - 1, j)] = outer * ell1_deriv(a);
                jac[(dt - 1, j + d + 1)] = outer * ell2_deriv(b);
            }
        }
        jac
    }

    /// Bound implied by the gate's derivative magnitudes: `1 + 2|anchor|√(5d)/Δ`.
    pub fn derivative_bound(&self) -> f64 {
        1.0 + 2.0 * self.anchor.abs() * (5.0 * self.d as f64).sqrt() / self.delta
    }
}

/// `R_P ∘ φ̃^N ∘ φ_c ∘ φ^N ∘ η ∘ R_L` with its certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedMap {
    pub d: usize,
    pub n: usize,
    /// Cube size `Δ = 1/(√d · Lip⁻ · n)` of the kill gates.
    pub delta: f64,
    /// Data estimate of `Lip(F⁻¹)`.
    pub lip_inv_estimate: f64,
    pub stages: Vec<Stage>,
    pub certificate: Certificate,
}

/// Build the lifted map interpolating `data` exactly.
pub fn construct_f_nn_lifted(data: &GridDataset) -> Result<LiftedMap> {
    let (d, n, big_n) = (data.d, data.n, data.len());
    let dt = 2 * d + 2;
    let (_, lip_inv) = data.lipschitz_estimates()?;
    let nn = n as f64;
    let delta = 1.0 / ((d as f64).sqrt() * lip_inv * nn);
    for a in 0..big_n {
        for b in a + 1..big_n {
            let sep = max_abs_diff(&data.y[a], &data.y[b]);
            if sep < delta * (1.0 - 1e-12) {
                return Err(Error::Stage {
                    stage: "kill_last",
                    msg: format!("targets {a} and {b} are {sep:e} apart, gates need {delta:e}"),
                });
            }
        }
    }

    let lift = Lift { d };
    let eta = FlowLayer::ShiftLast(ShiftLast { dim: dt, n, sources: d - 1 });
    let t: Vec<f64> = data.xs().iter().map(|x| Ok(eta.forward(&lift.lift(x))?[dt - 1])).collect::<Result<_>>()?;
    let xs = data.xs();
    let phi: Vec<FlowLayer> = t
        .iter()
        .zip(xs.iter().zip(&data.y))
        .map(|(&ta, (x, y))| {
            FlowLayer::LocalizedTranslate(LocalizedTranslate {
                dim: dt,
                center: ta,
                half_width: 0.5 / big_n as f64,
                displacement: y.iter().zip(x).map(|(a, b)| a - b).collect(),
            })
        })
        .collect();
    let stated = 1.0 + 6.0 / (lip_inv * nn);
    let kill: Vec<FlowLayer> = t
        .iter()
        .zip(&data.y)
        .map(|(&ta, y)| FlowLayer::KillLast(KillLast { d, center: y.clone(), delta, anchor: ta, stated_bound: stated }))
        .collect();

    let c = data.max_displacement();
    let nf = big_n as f64;
    let sqrt_d = (d as f64).sqrt();
    let sb = |name: &str, forward: f64, inverse: f64, layer_max: f64| StageBound { name: name.into(), forward, inverse, layer_max };
    let phi_bound = 1.0 + 6.0 * nf * c;
    let bounds = vec![
        sb("lift", Lift::BOUND, Lift::INVERSE_BOUND, Lift::BOUND),
        sb("eta", nn / (nn - 1.0), nn / (nn - 1.0), nn / (nn - 1.0)),
        sb("phi", phi_bound, phi_bound, phi_bound),
        sb("copy", 2.0 * sqrt_d, 2.0 * sqrt_d, CopyBlock { d }.bound()),
        sb("kill_last", stated, stated, stated),
        sb("project", Project::BOUND, Project::INVERSE_BOUND, Project::BOUND),
    ];
    let stages = vec![
        Stage { name: "lift".into(), layers: vec![FlowLayer::Lift(lift)] },
        Stage { name: "eta".into(), layers: vec![eta] },
        Stage { name: "phi".into(), layers: phi },
        Stage { name: "copy".into(), layers: vec![FlowLayer::CopyBlock(CopyBlock { d })] },
        Stage { name: "kill_last".into(), layers: kill },
        Stage { name: "project".into(), layers: vec![FlowLayer::Project(Project { d })] },
    ];
    Ok(LiftedMap { d, n, delta, lip_inv_estimate: lip_inv, stages, certificate: Certificate::from_stages(c, 0.0, bounds) })
}

impl LiftedMap {
    /// The bijection of `R^{2d+2}` between lift and projection.
    pub fn inner(&self) -> InvertibleMap {
        let k = self.stages.len();
        InvertibleMap { layers: self.stages[1..k - 1].iter().flat_map(|s| s.layers.iter().cloned()).collect() }
    }

    pub fn layer_count(&self) -> usize {
        self.stages.iter().map(|s| s.layers.len()).sum()
    }

    pub fn lift(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::Dim { expected: self.d, got: x.len() });
        }
        Ok(Lift { d: self.d }.lift(x))
    }

    /// Full pipeline; fails with [`Error::OffManifold`] away from grid points.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.inner().forward(&self.lift(x)?)?;
        Project { d: self.d }.project(&z)
    }

    /// First block of the lifted output, defined everywhere.
    pub fn relaxed_forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.inner().forward(&self.lift(x)?)?;
        Ok(z[..self.d].to_vec())
    }

    /// `R_L⁻¹ ∘ G⁻¹ ∘ R_P⁻¹`, exact on the image of grid points.
    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.d {
            return Err(Error::Dim { expected: self.d, got: y.len() });
        }
        let z = self.inner().inverse(&Project { d: self.d }.unproject(y))?;
        Ok(Lift { d: self.d }.unlift(&z))
    }

    pub fn interpolation_residual(&self, data: &GridDataset) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (i, y) in data.y.iter().enumerate() {
            let out = self.forward(&data.x(i))?;
            worst = worst.max(dist2(&out, y));
        }
        Ok(worst)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}
