//! Plain fully connected baseline, one network per direction.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::mlp::MlpShape;
use super::train::relative_error;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fnn {
    pub shape: MlpShape,
    pub params: Vec<f64>,
}

impl Fnn {
    /// Widths `[dim, h, h, h, h, dim]`.
    pub fn init(dim: usize, hidden: usize, seed: u64) -> Self {
        let shape = MlpShape::new(vec![dim, hidden, hidden, hidden, hidden, dim]);
        let mut params = vec![0.0; shape.param_count()];
        shape.init(&mut params, &mut rng::stream(seed, 0xf22));
        Self { shape, params }
    }

    pub fn predict(&self, x: &Array2<f64>) -> Array2<f64> {
        self.shape.forward(&self.params, x.view())
    }

    /// `(1/2)Σ‖(t − f(x))⊙w‖²` and its gradient.
    pub fn loss_and_grad(&self, x: &Array2<f64>, t: &Array2<f64>, w: &[f64]) -> (f64, Vec<f64>) {
        let (p, cache) = self.shape.forward_cached(&self.params, x.view());
        let mut d = &p - t;
        let mut l = 0.0;
        for mut row in d.rows_mut() {
            for (v, w) in row.iter_mut().zip(w) {
                l += 0.5 * (*v * w).powi(2);
                *v *= w * w;
            }
        }
        let mut g = vec![0.0; self.params.len()];
        self.shape.backward(&self.params, &cache, d, &mut g);
        (l, g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FnnRecord {
    pub step: usize,
    pub e_a: f64,
    pub e_g: f64,
}

/// Full-batch Adam on one direction; returns the best-e_g model and the history.
#[allow(clippy::too_many_arguments)]
pub fn train_fnn(
    mut net: Fnn,
    x_tr: &Array2<f64>,
    t_tr: &Array2<f64>,
    x_te: &Array2<f64>,
    t_te: &Array2<f64>,
    w: &[f64],
    adam: AdamConfig,
    steps: usize,
    record_every: usize,
) -> Result<(Fnn, Vec<FnnRecord>)> {
    if record_every == 0 {
        return Err(Error::Param("record interval must be positive".into()));
    }
    let mut opt = Adam::new(adam, net.params.len());
    let mut best = (f64::INFINITY, net.clone());
    let mut hist = Vec::new();
    for step in 0..=steps {
        if step % record_every == 0 || step == steps {
            let e_a = relative_error(t_tr, &net.predict(x_tr), w)?;
            let e_g = relative_error(t_te, &net.predict(x_te), w)?;
            hist.push(FnnRecord { step, e_a, e_g });
            if e_g < best.0 {
                best = (e_g, net.clone());
            }
        }
        if step == steps {
            break;
        }
        let (l, g) = net.loss_and_grad(x_tr, t_tr, w);
        if !l.is_finite() {
            return Err(Error::Diverged(step));
        }
        opt.step(&mut net.params, &g);
    }
    Ok((best.1, hist))
}
