//! Closed-form invertible layers and their composition.
//!
//! Every layer has an exact inverse and an analytic Jacobian. Piecewise
//! derivatives are right-continuous, so Jacobians at kinks are deterministic.

pub mod hat;
pub mod layers;
pub mod oracle;
pub mod pwl;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use layers::{LocalizedLast, LocalizedShift, LocalizedTranslate, PerCoordinatePwl, ShiftLast};
pub use pwl::PwlNet;

use crate::error::{Error, Result};
use crate::lifted::{CopyBlock, KillLast, Lift, Project};
use crate::neural::CouplingBlock;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "params")]
pub enum FlowLayer {
    #[serde(rename = "shift_last")]
    ShiftLast(ShiftLast),
    #[serde(rename = "localized_translate")]
    LocalizedTranslate(LocalizedTranslate),
    #[serde(rename = "localized_shift")]
    LocalizedShift(LocalizedShift),
    #[serde(rename = "localized_last")]
    LocalizedLast(LocalizedLast),
    #[serde(rename = "per_coordinate_pwl")]
    PerCoordinatePwl(PerCoordinatePwl),
    #[serde(rename = "affine_coupling")]
    AffineCoupling(CouplingBlock),
    #[serde(rename = "lifted.lift")]
    Lift(Lift),
    #[serde(rename = "lifted.project")]
    Project(Project),
    #[serde(rename = "lifted.copy_block")]
    CopyBlock(CopyBlock),
    #[serde(rename = "lifted.kill_last")]
    KillLast(KillLast),
}

impl FlowLayer {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ShiftLast(_) => "shift_last",
            Self::LocalizedTranslate(_) => "localized_translate",
            Self::LocalizedShift(_) => "localized_shift",
            Self::LocalizedLast(_) => "localized_last",
            Self::PerCoordinatePwl(_) => "per_coordinate_pwl",
            Self::AffineCoupling(_) => "affine_coupling",
            Self::Lift(_) => "lifted.lift",
            Self::Project(_) => "lifted.project",
            Self::CopyBlock(_) => "lifted.copy_block",
            Self::KillLast(_) => "lifted.kill_last",
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            Self::ShiftLast(l) => l.dim,
            Self::LocalizedTranslate(l) => l.dim,
            Self::LocalizedShift(l) => l.dim,
            Self::LocalizedLast(l) => l.dim,
            Self::PerCoordinatePwl(l) => l.dim,
            Self::AffineCoupling(l) => l.dim(),
            Self::Lift(l) => l.d,
            Self::Project(l) => 2 * l.d + 2,
            Self::CopyBlock(l) => 2 * l.d + 2,
            Self::KillLast(l) => 2 * l.d + 2,
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Self::Lift(l) => 2 * l.d + 2,
            Self::Project(l) => l.d,
            _ => self.in_dim(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_input(self.in_dim(), x)?;
        Ok(match self {
            Self::Lift(l) => l.lift(x),
            Self::Project(l) => l.project(x)?,
            _ => {
                let mut y = x.to_vec();
                self.apply_in_place(&mut y);
                y
            }
        })
    }

    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_input(self.out_dim(), y)?;
        Ok(match self {
            Self::Lift(l) => l.unlift(y),
            Self::Project(l) => l.unproject(y),
            _ => {
                let mut x = y.to_vec();
                self.unapply_in_place(&mut x);
                x
            }
        })
    }

    fn apply_in_place(&self, x: &mut [f64]) {
        match self {
            Self::ShiftLast(l) => l.apply(x),
            Self::LocalizedTranslate(l) => l.apply(x),
            Self::LocalizedShift(l) => l.apply(x),
            Self::LocalizedLast(l) => l.apply(x),
            Self::PerCoordinatePwl(l) => l.apply(x),
            Self::AffineCoupling(l) => l.apply(x),
            Self::CopyBlock(l) => l.apply(x),
            Self::KillLast(l) => l.apply(x),
            Self::Lift(_) | Self::Project(_) => unreachable!("dimension-changing layer"),
        }
    }

    fn unapply_in_place(&self, y: &mut [f64]) {
        match self {
            Self::ShiftLast(l) => l.unapply(y),
            Self::LocalizedTranslate(l) => l.unapply(y),
            Self::LocalizedShift(l) => l.unapply(y),
            Self::LocalizedLast(l) => l.unapply(y),
            Self::PerCoordinatePwl(l) => l.unapply(y),
            Self::AffineCoupling(l) => l.unapply(y),
            Self::CopyBlock(l) => l.unapply(y),
            Self::KillLast(l) => l.unapply(y),
            Self::Lift(_) | Self::Project(_) => unreachable!("dimension-changing layer"),
        }
    }

    /// Analytic Jacobian of the forward map, `out_dim × in_dim`.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        check_input(self.in_dim(), x)?;
        Ok(match self {
            Self::ShiftLast(l) => l.jacobian(x),
            Self::LocalizedTranslate(l) => l.jacobian(x),
            Self::LocalizedShift(l) => l.jacobian(x),
            Self::LocalizedLast(l) => l.jacobian(x),
            Self::PerCoordinatePwl(l) => l.jacobian(x),
            Self::AffineCoupling(l) => l.jacobian(x),
            Self::Lift(l) => l.jacobian(),
            Self::Project(l) => l.jacobian(),
            Self::CopyBlock(l) => l.jacobian(),
            Self::KillLast(l) => l.jacobian(x),
        })
    }

    /// Analytic Jacobian of the inverse map at `y`, `in_dim × out_dim`.
    pub fn inverse_jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        match self {
            Self::Lift(l) => Ok(l.unlift_jacobian()),
            Self::Project(l) => Ok(l.unproject_jacobian()),
            _ => {
                let x = self.inverse(y)?;
                self.jacobian(&x)?.try_inverse().ok_or_else(|| Error::Param(format!("{} Jacobian is singular", self.name())))
            }
        }
    }

    /// Stated spectral-norm bound of the forward Jacobian, if the layer has one.
    pub fn bound(&self) -> Option<f64> {
        Some(match self {
            Self::ShiftLast(l) => l.bound(),
            Self::LocalizedTranslate(l) => l.bound(),
            Self::LocalizedShift(l) => l.bound(),
            Self::LocalizedLast(l) => l.bound(),
            Self::PerCoordinatePwl(l) => l.bound(),
            Self::AffineCoupling(_) => return None,
            Self::Lift(_) => Lift::BOUND,
            Self::Project(_) => Project::BOUND,
            Self::CopyBlock(l) => l.bound(),
            Self::KillLast(l) => l.stated_bound,
        })
    }

    /// Stated bound for the inverse Jacobian.
    pub fn inverse_bound(&self) -> Option<f64> {
        match self {
            Self::Lift(_) => Some(Lift::INVERSE_BOUND),
            Self::Project(_) => Some(Project::INVERSE_BOUND),
            _ => self.bound(),
        }
    }

    /// Layers whose Jacobian is the identity plus a strictly triangular part.
    pub fn is_unit_determinant(&self) -> bool {
        matches!(
            self,
            Self::ShiftLast(_)
                | Self::LocalizedTranslate(_)
                | Self::LocalizedShift(_)
                | Self::LocalizedLast(_)
                | Self::CopyBlock(_)
                | Self::KillLast(_)
        )
    }
}

fn check_input(dim: usize, x: &[f64]) -> Result<()> {
    if x.len() != dim {
        return Err(Error::Dim { expected: dim, got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("layer input"));
    }
    Ok(())
}

/// Ordered composition of layers; `forward` applies them first to last.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InvertibleMap {
    pub layers: Vec<FlowLayer>,
}

impl InvertibleMap {
    pub fn new(layers: Vec<FlowLayer>) -> Result<Self> {
        for w in layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::Dim { expected: w[0].out_dim(), got: w[1].in_dim() });
            }
        }
        Ok(Self { layers })
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn in_dim(&self) -> Option<usize> {
        self.layers.first().map(FlowLayer::in_dim)
    }

    pub fn out_dim(&self) -> Option<usize> {
        self.layers.last().map(FlowLayer::out_dim)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut v = x.to_vec();
        for l in &self.layers {
            v = l.forward(&v)?;
        }
        Ok(v)
    }

    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut v = y.to_vec();
        for l in self.layers.iter().rev() {
            v = l.inverse(&v)?;
        }
        Ok(v)
    }

    /// Chain-rule Jacobian of the forward map.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let dim = x.len();
        let mut j = DMatrix::identity(dim, dim);
        let mut v = x.to_vec();
        for l in &self.layers {
            j = l.jacobian(&v)? * j;
            v = l.forward(&v)?;
        }
        Ok(j)
    }

    /// Chain-rule Jacobian of the inverse map.
    pub fn inverse_jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        let dim = y.len();
        let mut j = DMatrix::identity(dim, dim);
        let mut v = y.to_vec();
        for l in self.layers.iter().rev() {
            j = l.inverse_jacobian(&v)? * j;
            v = l.inverse(&v)?;
        }
        Ok(j)
    }

    pub fn then(mut self, other: InvertibleMap) -> Result<Self> {
        self.layers.extend(other.layers);
        Self::new(self.layers)
    }
}
