//! Closed-form invertible layers of the grid construction.
//!
//! Every layer changes one group of coordinates by an amount that depends only
//! on coordinates it leaves untouched, so the inverse subtracts the same amount.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::hat::{bump, bump_deriv, hat, hat_deriv, relu, relu_deriv};
use super::pwl::PwlNet;
use crate::linalg::norm2;

/// Last coordinate gains `Σ_{j≤sources} n^{-j} σ(x_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftLast {
    pub dim: usize,
    pub n: usize,
    pub sources: usize,
}

impl ShiftLast {
    fn offset(&self, x: &[f64]) -> f64 {
        let inv_n = 1.0 / self.n as f64;
        let mut w = 1.0;
        let mut s = 0.0;
        for &xj in &x[..self.sources] {
            w *= inv_n;
            s += w * relu(xj);
        }
        s
    }

    pub fn apply(&self, x: &mut [f64]) {
        let s = self.offset(x);
        x[self.dim - 1] += s;
    }

    pub fn unapply(&self, y: &mut [f64]) {
        let s = self.offset(y);
        y[self.dim - 1] -= s;
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::identity(self.dim, self.dim);
        let inv_n = 1.0 / self.n as f64;
        let mut w = 1.0;
        for (k, &xk) in x[..self.sources].iter().enumerate() {
            w *= inv_n;
            j[(self.dim - 1, k)] = w * relu_deriv(xk);
        }
        j
    }

    pub fn bound(&self) -> f64 {
        let n = self.n as f64;
        n / (n - 1.0)
    }
}

/// First `moved` coordinates gain `h(x_last)·displacement` with a bump `h`
/// centred on the last coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizedTranslate {
    pub dim: usize,
    pub center: f64,
    pub half_width: f64,
    pub displacement: Vec<f64>,
}

impl LocalizedTranslate {
    pub fn apply(&self, x: &mut [f64]) {
        let h = bump(x[self.dim - 1], self.center, self.half_width);
        if h != 0.0 {
            for (xi, di) in x.iter_mut().zip(&self.displacement) {
                *xi += h * di;
            }
        }
    }

    pub fn unapply(&self, y: &mut [f64]) {
        let h = bump(y[self.dim - 1], self.center, self.half_width);
        if h != 0.0 {
            for (yi, di) in y.iter_mut().zip(&self.displacement) {
                *yi -= h * di;
            }
        }
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::identity(self.dim, self.dim);
        let dh = bump_deriv(x[self.dim - 1], self.center, self.half_width);
        for (i, di) in self.displacement.iter().enumerate() {
            j[(i, self.dim - 1)] = dh * di;
        }
        j
    }

    /// `1 + 6N‖displacement‖` with `N = 1/(2·half_width)`.
    pub fn bound(&self) -> f64 {
        1.0 + 3.0 * norm2(&self.displacement) / self.half_width
    }
}

/// Coordinate `target` gains `shift·ℓ₀((x_anchor − center)/Δ + 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizedShift {
    pub dim: usize,
    pub target: usize,
    pub anchor: usize,
    pub center: f64,
    pub delta: f64,
    pub shift: f64,
}

impl LocalizedShift {
    fn gate(&self, x: &[f64]) -> f64 {
        hat((x[self.anchor] - self.center) / self.delta + 1.0)
    }

    pub fn apply(&self, x: &mut [f64]) {
        let g = self.gate(x);
        x[self.target] += self.shift * g;
    }

    pub fn unapply(&self, y: &mut [f64]) {
        let g = self.gate(y);
        y[self.target] -= self.shift * g;
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::identity(self.dim, self.dim);
        j[(self.target, self.anchor)] = self.shift * hat_deriv((x[self.anchor] - self.center) / self.delta + 1.0) / self.delta;
        j
    }

    pub fn bound(&self) -> f64 {
        1.0 + 0.5 * self.shift.abs() / self.delta
    }
}

/// Last coordinate gains `h(x_control)·displacement`, bump centred on `x_control`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizedLast {
    pub dim: usize,
    pub control: usize,
    pub center: f64,
    pub half_width: f64,
    pub displacement: f64,
}

impl LocalizedLast {
    pub fn apply(&self, x: &mut [f64]) {
        let h = bump(x[self.control], self.center, self.half_width);
        x[self.dim - 1] += h * self.displacement;
    }

    pub fn unapply(&self, y: &mut [f64]) {
        let h = bump(y[self.control], self.center, self.half_width);
        y[self.dim - 1] -= h * self.displacement;
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::identity(self.dim, self.dim);
        j[(self.dim - 1, self.control)] = bump_deriv(x[self.control], self.center, self.half_width) * self.displacement;
        j
    }

    /// `1 + 6Nε⁻¹|displacement|` with `ε/N = 2·half_width`.
    pub fn bound(&self) -> f64 {
        1.0 + 3.0 * self.displacement.abs() / self.half_width
    }
}

/// `h^r` applied to every coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerCoordinatePwl {
    pub dim: usize,
    pub net: PwlNet,
}

impl PerCoordinatePwl {
    pub fn apply(&self, x: &mut [f64]) {
        for xi in x.iter_mut() {
            *xi = self.net.eval(*xi);
        }
    }

    pub fn unapply(&self, y: &mut [f64]) {
        for yi in y.iter_mut() {
            *yi = self.net.inverse(*yi);
        }
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(self.dim, x.iter().map(|&xi| self.net.deriv(xi))))
    }

    pub fn bound(&self) -> f64 {
        let r = self.net.r;
        (r / (1.0 - r)).max((1.0 - r) / r).max(1.0)
    }
}
