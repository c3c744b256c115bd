//! Bi-Lipschitz test maps with known constants.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::spectral_norm;
use crate::rng;

pub trait TargetMap: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Vec<f64>;
    fn inverse(&self, y: &[f64]) -> Vec<f64>;
    fn jacobian_det(&self, x: &[f64]) -> f64;
    /// Upper bound on `Lip(F)` over `[0, 1]^d`.
    fn lip(&self) -> f64;
    /// Upper bound on `Lip(F⁻¹)` over `F([0, 1]^d)`.
    fn lip_inv(&self) -> f64;
}

/// `F(x) = (x₁ + 0.3 sin(πx₂), x₂ + 0.3x₁)`.
#[derive(Clone, Debug)]
pub struct SineShear {
    lip: f64,
    lip_inv: f64,
}

impl SineShear {
    const A: f64 = 0.3;
    const B: f64 = 0.3;

    pub fn new() -> Self {
        // the Jacobian depends on x₂ alone; scan cos(πx₂) over [−1, 1]
        let mut lip: f64 = 0.0;
        let mut lip_inv: f64 = 0.0;
        let steps = 20_000;
        for k in 0..=steps {
            let c = -1.0 + 2.0 * k as f64 / steps as f64;
            let j = Self::jac_from_cos(c);
            lip = lip.max(spectral_norm(&j));
            lip_inv = lip_inv.max(spectral_norm(&j.try_inverse().expect("nonsingular")));
        }
        // scan spacing 1e-4 in cos, slope of ‖J‖ in cos is at most Aπ
        let slack = 1e-4 * Self::A * std::f64::consts::PI;
        Self { lip: lip + slack, lip_inv: lip_inv * (1.0 + 1e-3) }
    }

    fn jac_from_cos(c: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, Self::A * std::f64::consts::PI * c, Self::B, 1.0])
    }
}

impl Default for SineShear {
    fn default() -> Self {
        Self::new()
    }
}

impl TargetMap for SineShear {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        use std::f64::consts::PI;
        vec![x[0] + Self::A * (PI * x[1]).sin(), x[1] + Self::B * x[0]]
    }

    fn inverse(&self, y: &[f64]) -> Vec<f64> {
        use std::f64::consts::PI;
        // x₂ solves x₂ − AB sin(πx₂) = y₂ − By₁, strictly increasing since ABπ < 1
        let rhs = y[1] - Self::B * y[0];
        let ab = Self::A * Self::B;
        let mut x2 = rhs;
        for _ in 0..100 {
            let g = x2 - ab * (PI * x2).sin() - rhs;
            let dg = 1.0 - ab * PI * (PI * x2).cos();
            let step = g / dg;
            x2 -= step;
            if step.abs() < 1e-16 * (1.0 + x2.abs()) {
                break;
            }
        }
        vec![y[0] - Self::A * (PI * x2).sin(), x2]
    }

    fn jacobian_det(&self, x: &[f64]) -> f64 {
        1.0 - Self::A * Self::B * std::f64::consts::PI * (std::f64::consts::PI * x[1]).cos()
    }

    fn lip(&self) -> f64 {
        self.lip
    }

    fn lip_inv(&self) -> f64 {
        self.lip_inv
    }
}

/// `F(x) = x + κ A tanh(Wx + b)` with `κ = 0.4/(‖A‖‖W‖)`, so
/// `Lip(F) ≤ 1.4` and `Lip(F⁻¹) ≤ 1/0.6`.
#[derive(Clone, Debug)]
pub struct RandomBiLipschitz {
    a: DMatrix<f64>,
    w: DMatrix<f64>,
    b: DVector<f64>,
    kappa: f64,
}

impl RandomBiLipschitz {
    pub const CONTRACTION: f64 = 0.4;

    pub fn new(d: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, 0x5e1f);
        let mut gauss = |rows, cols| DMatrix::from_fn(rows, cols, |_, _| r.sample::<f64, _>(StandardNormal));
        let a = gauss(d, d);
        let w = gauss(d, d);
        let b = DVector::from_iterator(d, gauss(d, 1).iter().copied());
        let kappa = Self::CONTRACTION / (spectral_norm(&a) * spectral_norm(&w));
        Self { a, w, b, kappa }
    }

    fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        (&self.a * (&self.w * x + &self.b).map(f64::tanh)) * self.kappa
    }
}

impl TargetMap for RandomBiLipschitz {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(x);
        (&v + self.residual(&v)).as_slice().to_vec()
    }

    fn inverse(&self, y: &[f64]) -> Vec<f64> {
        let yv = DVector::from_column_slice(y);
        let mut x = yv.clone();
        for _ in 0..200 {
            let next = &yv - self.residual(&x);
            let change = (&next - &x).amax();
            x = next;
            if change < 1e-16 {
                break;
            }
        }
        x.as_slice().to_vec()
    }

    fn jacobian_det(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        let s = (&self.w * v + &self.b).map(|t| 1.0 - t.tanh().powi(2));
        let d = self.dim();
        let j = DMatrix::identity(d, d) + (&self.a * DMatrix::from_diagonal(&s) * &self.w) * self.kappa;
        j.determinant()
    }

    fn lip(&self) -> f64 {
        1.0 + Self::CONTRACTION
    }

    fn lip_inv(&self) -> f64 {
        1.0 / (1.0 - Self::CONTRACTION)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_shear_inverse_and_det() {
        let f = SineShear::new();
        for x in [[0.1, 0.2], [0.9, 0.7], [0.5, 0.5]] {
            let y = f.eval(&x);
            let back = f.inverse(&y);
            assert!((back[0] - x[0]).abs() < 1e-14 && (back[1] - x[1]).abs() < 1e-14);
        }
        let det = f.jacobian_det(&[0.3, 0.0]);
        assert!((det - (1.0 - 0.09 * std::f64::consts::PI)).abs() < 1e-15);
        assert!(f.lip() > 1.0 && f.lip() < 2.5);
        assert!(f.lip_inv() > 1.0);
    }

    #[test]
    fn random_map_inverse_and_det() {
        for d in [2, 3] {
            let f = RandomBiLipschitz::new(d, 7);
            let x: Vec<f64> = (0..d).map(|i| 0.2 + 0.3 * i as f64).collect();
            let back = f.inverse(&f.eval(&x));
            assert!(x.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-13));
            let det = f.jacobian_det(&x);
            assert!(det > 0.6f64.powi(d as i32) - 1e-12 && det < 1.4f64.powi(d as i32) + 1e-12);
        }
    }
}
