//! `u(x, ξ) = 2 + Σ_{i,j=1}^{20} ξ_ij/(i³ + j³) cos(iπx₁) cos(jπx₂)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::rng;

pub const KL_TERMS: usize = 20;
pub const XI_LEN: usize = KL_TERMS * KL_TERMS;
pub const MEAN: f64 = 2.0;

/// Coefficients `ξ_ij`, row-major in `(i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Xi(pub Vec<f64>);

/// `1/(i³ + j³)` for 1-based `i, j`.
pub fn weight(i: usize, j: usize) -> f64 {
    1.0 / ((i * i * i + j * j * j) as f64)
}

pub fn weights() -> Vec<f64> {
    (1..=KL_TERMS).flat_map(|i| (1..=KL_TERMS).map(move |j| weight(i, j))).collect()
}

pub(crate) fn draw(r: &mut ChaCha8Rng) -> Xi {
    Xi((0..XI_LEN).map(|_| r.sample(StandardNormal)).collect())
}

/// First draw of sample `index`; rejected draws continue on the same stream.
pub fn sample_xi(seed: u64, index: u64) -> Xi {
    draw(&mut rng::stream(seed, index))
}

impl Xi {
    pub fn zeros() -> Self {
        Self(vec![0.0; XI_LEN])
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        let mut s = MEAN;
        for i in 0..KL_TERMS {
            let ci = ((i + 1) as f64 * PI * x1).cos();
            for j in 0..KL_TERMS {
                s += self.0[i * KL_TERMS + j] * weight(i + 1, j + 1) * ci * ((j + 1) as f64 * PI * x2).cos();
            }
        }
        s
    }

    /// Values at the `(n+1)²` nodes `(a/n, b/n)`, row-major with `x₁` slow.
    pub fn on_grid(&self, n: usize) -> Vec<f64> {
        let m = n + 1;
        let table: Vec<f64> = (1..=KL_TERMS).flat_map(|k| (0..m).map(move |a| (k as f64 * PI * a as f64 / n as f64).cos())).collect();
        // inner[j][a] = Σ_i w_ij ξ_ij cos(iπ x_a)
        let mut inner = vec![0.0; KL_TERMS * m];
        for i in 0..KL_TERMS {
            for j in 0..KL_TERMS {
                let c = self.0[i * KL_TERMS + j] * weight(i + 1, j + 1);
                if c != 0.0 {
                    let row = &table[i * m..(i + 1) * m];
                    for (dst, t) in inner[j * m..(j + 1) * m].iter_mut().zip(row) {
                        *dst += c * t;
                    }
                }
            }
        }
        let mut u = vec![MEAN; m * m];
        for a in 0..m {
            for b in 0..m {
                let mut s = 0.0;
                for j in 0..KL_TERMS {
                    s += inner[j * m + a] * table[j * m + b];
                }
                u[a * m + b] += s;
            }
        }
        u
    }
}
