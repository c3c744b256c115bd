//! The per-coordinate piecewise-linear map `h^r` and its two-layer ReLU form.
//!
//! On each cell `[j/n, (j+1)/n]` the map squeezes `[j/n, (j+r)/n]` onto
//! `[j/n, (j+1−r)/n]` and stretches the rest; nodes `j/n` are fixed and the
//! map is the identity outside `[0, 1]`.

use serde::{Deserialize, Serialize};

use super::hat::relu;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PwlNet {
    pub n: usize,
    pub r: f64,
}

/// Weights of `h^r(x) = W¹σ(W⁰x + b⁰)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReluWeights {
    pub w1: Vec<f64>,
    pub w0: Vec<f64>,
    pub b0: Vec<f64>,
}

impl ReluWeights {
    pub fn hidden_width(&self) -> usize {
        self.w0.len()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.w1.iter().zip(self.w0.iter().zip(&self.b0)).map(|(a, (w, b))| a * relu(w * x + b)).sum()
    }
}

impl PwlNet {
    pub fn new(n: usize, r: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Param("h^r needs n >= 1".into()));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Param(format!("h^r needs 0 < r < 1, got {r}")));
        }
        Ok(Self { n, r })
    }

    pub fn c_r(&self) -> f64 {
        let r = self.r;
        (2.0 * r - 1.0) / (r * (1.0 - r))
    }

    fn cell(&self, x: f64) -> (f64, f64) {
        let n = self.n as f64;
        let j = (x * n).floor().clamp(0.0, n - 1.0);
        (j / n, x - j / n)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return x;
        }
        let n = self.n as f64;
        let r = self.r;
        let (a, s) = self.cell(x);
        if s <= r / n {
            a + s * ((1.0 - r) / r)
        } else {
            let lo = a + (1.0 - r) / n;
            (lo + (s - r / n) * (r / (1.0 - r))).clamp(lo, a + 1.0 / n)
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        if !(0.0..=1.0).contains(&y) {
            return y;
        }
        let n = self.n as f64;
        let r = self.r;
        let (a, t) = self.cell(y);
        if t <= (1.0 - r) / n {
            (a + t * (r / (1.0 - r))).min(a + r / n)
        } else {
            a + r / n + (t - (1.0 - r) / n) * ((1.0 - r) / r)
        }
    }

    /// Right-continuous slope.
    pub fn deriv(&self, x: f64) -> f64 {
        if !(0.0..1.0).contains(&x) {
            return 1.0;
        }
        let n = self.n as f64;
        let r = self.r;
        let (_, s) = self.cell(x);
        if s < r / n {
            (1.0 - r) / r
        } else {
            r / (1.0 - r)
        }
    }

    /// Exact two-layer ReLU realization with `2(n+1)` hidden neurons.
    pub fn relu_weights(&self) -> ReluWeights {
        let n = self.n;
        let nf = n as f64;
        let r = self.r;
        let cr = self.c_r();
        let mut w1 = Vec::with_capacity(2 * n + 2);
        let mut b0 = Vec::with_capacity(2 * n + 2);
        w1.push(-1.0);
        b0.push(0.0);
        // hinges at a_i = i/n
        for i in 0..=n {
            w1.push(if i == 0 {
                (1.0 - r) / r
            } else if i < n {
                -cr
            } else {
                -(2.0 * r - 1.0) / (1.0 - r)
            });
            b0.push(-(i as f64) / nf);
        }
        // hinges at p_i = (i−1+r)/n
        for i in 1..=n {
            w1.push(cr);
            b0.push(-((i as f64) - 1.0 + r) / nf);
        }
        let mut w0 = vec![1.0; 2 * n + 2];
        w0[0] = -1.0;
        ReluWeights { w1, w0, b0 }
    }
}
