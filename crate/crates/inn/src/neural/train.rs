//! Weighted bidirectional loss, its gradient, error metrics and the training loop.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::coupling::CouplingInn;
use crate::error::{Error, Result};
use crate::rng;

/// Rows per gradient work unit. Fixed so the reduction order does not depend
/// on the thread count.
const CHUNK: usize = 100;

/// Paired samples in reduced coordinates, one sample per row.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedSet {
    pub u: Array2<f64>,
    pub y: Array2<f64>,
}

impl PairedSet {
    pub fn new(u: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        if u.nrows() != y.nrows() {
            return Err(Error::Dim { expected: u.nrows(), got: y.nrows() });
        }
        Ok(Self { u, y })
    }

    pub fn len(&self) -> usize {
        self.u.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self { u: self.u.select(Axis(0), idx), y: self.y.select(Axis(0), idx) }
    }
}

/// Per-component weights of the two loss terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
}

impl LossWeights {
    pub fn uniform(dim: usize) -> Self {
        Self { u: vec![1.0; dim], y: vec![1.0; dim] }
    }

    fn check(&self, dim: usize) -> Result<()> {
        for w in [&self.u, &self.y] {
            if w.len() != dim {
                return Err(Error::Dim { expected: dim, got: w.len() });
            }
            if w.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Param("loss weights must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

fn weighted_sq(diff: &Array2<f64>, w: &[f64]) -> f64 {
    let w = ArrayView1::from(w);
    diff.rows().into_iter().map(|r| r.iter().zip(w.iter()).map(|(d, w)| (d * w).powi(2)).sum::<f64>()).sum()
}

/// `(c0/2)Σ‖(u − Φ⁻¹(y))⊙w_u‖² + (1/2)Σ‖(y − Φ(u))⊙w_y‖²`.
pub fn loss(model: &CouplingInn, set: &PairedSet, c0: f64, w: &LossWeights) -> Result<f64> {
    w.check(model.arch.dim)?;
    let yh = model.forward_batch(set.u.view())?;
    let uh = model.inverse_batch(set.y.view())?;
    Ok(0.5 * c0 * weighted_sq(&(&set.u - &uh), &w.u) + 0.5 * weighted_sq(&(&set.y - &yh), &w.y))
}

fn chunk_loss_grad(model: &CouplingInn, u: ArrayView2<f64>, y: ArrayView2<f64>, c0: f64, w: &LossWeights) -> (f64, Vec<f64>) {
    let mut g = vec![0.0; model.param_count()];
    let wy2 = Array1::from_iter(w.y.iter().map(|v| v * v));
    let wu2 = Array1::from_iter(w.u.iter().map(|v| v * v));
    let mut l = 0.0;
    if w.y.iter().any(|&v| v != 0.0) {
        model.forward_backward(u, &mut g, |yh| {
            let diff = yh - &y;
            l += 0.5 * weighted_sq(&diff, &w.y);
            diff * &wy2
        });
    }
    if c0 != 0.0 && w.u.iter().any(|&v| v != 0.0) {
        model.inverse_backward(y, &mut g, |uh| {
            let diff = uh - &u;
            l += 0.5 * c0 * weighted_sq(&diff, &w.u);
            diff * &(&wu2 * c0)
        });
    }
    (l, g)
}

/// Loss and its exact gradient with respect to the flat parameter vector.
pub fn loss_and_grad(model: &CouplingInn, set: &PairedSet, c0: f64, w: &LossWeights) -> Result<(f64, Vec<f64>)> {
    w.check(model.arch.dim)?;
    if set.is_empty() {
        return Err(Error::Param("empty batch".into()));
    }
    let starts: Vec<usize> = (0..set.len()).step_by(CHUNK).collect();
    let parts: Vec<(f64, Vec<f64>)> = starts
        .par_iter()
        .map(|&s0| {
            let e = (s0 + CHUNK).min(set.len());
            chunk_loss_grad(model, set.u.slice(s![s0..e, ..]), set.y.slice(s![s0..e, ..]), c0, w)
        })
        .collect();
    let mut g = vec![0.0; model.param_count()];
    let mut l = 0.0;
    for (pl, pg) in parts {
        l += pl;
        for (a, b) in g.iter_mut().zip(&pg) {
            *a += b;
        }
    }
    Ok((l, g))
}

/// Weighted relative error `sqrt(Σ‖(t − p)⊙w‖² / Σ‖t⊙w‖²)`.
pub fn relative_error(target: &Array2<f64>, pred: &Array2<f64>, w: &[f64]) -> Result<f64> {
    let den = weighted_sq(target, w);
    if den == 0.0 {
        return Err(Error::Param("relative error with zero target norm".into()));
    }
    Ok((weighted_sq(&(target - pred), w) / den).sqrt())
}

/// Forward and inverse relative errors on one set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirErrors {
    pub fwd: f64,
    pub inv: f64,
}

pub fn relative_errors(model: &CouplingInn, set: &PairedSet, w: &LossWeights) -> Result<DirErrors> {
    let yh = model.forward_batch(set.u.view())?;
    let uh = model.inverse_batch(set.y.view())?;
    Ok(DirErrors { fwd: relative_error(&set.y, &yh, &w.y)?, inv: relative_error(&set.u, &uh, &w.u)? })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub c0: f64,
    pub adam: AdamConfig,
    pub max_steps: usize,
    /// Minibatch size; `None` means full batch.
    pub batch_size: Option<usize>,
    pub seed: u64,
    /// Metrics are recorded every this many steps.
    pub record_every: usize,
    /// Stop once neither best e_g has improved for this many records.
    pub early_stop: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { c0: 1e-3, adam: AdamConfig::default(), max_steps: 20_000, batch_size: None, seed: 0, record_every: 100, early_stop: None }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0) || !(self.adam.lr > 0.0) {
            return Err(Error::Param("c0 and learning rate must be positive".into()));
        }
        if self.record_every == 0 || self.batch_size == Some(0) {
            return Err(Error::Param("record interval and batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub step: usize,
    pub loss: f64,
    pub e_a_fwd: f64,
    pub e_g_fwd: f64,
    pub e_a_inv: f64,
    pub e_g_inv: f64,
}

pub const HISTORY_HEADER: &str = "step,loss,e_a_fwd,e_g_fwd,e_a_inv,e_g_inv";

pub fn history_csv(history: &[Record]) -> String {
    let mut s = String::from(HISTORY_HEADER);
    s.push('\n');
    for r in history {
        s.push_str(&format!("{},{:e},{:e},{:e},{:e},{:e}\n", r.step, r.loss, r.e_a_fwd, r.e_g_fwd, r.e_a_inv, r.e_g_inv));
    }
    s
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub step: usize,
    pub model: CouplingInn,
    pub e_g: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub final_model: CouplingInn,
    pub steps: usize,
    pub best_fwd: Snapshot,
    pub best_inv: Snapshot,
    pub history: Vec<Record>,
}

impl TrainOutcome {
    /// Inverse e_g reaches its minimum before the last record and ends at
    /// least `factor` times higher.
    pub fn inverse_semi_convergence(&self, factor: f64) -> bool {
        let Some(last) = self.history.last() else { return false };
        let (imin, min) =
            self.history.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, r)| if r.e_g_inv < acc.1 { (i, r.e_g_inv) } else { acc });
        imin + 1 < self.history.len() && last.e_g_inv >= factor * min
    }
}

/// Adam on the bidirectional loss, recording metrics every `record_every` steps.
pub fn train(
    mut model: CouplingInn,
    train_set: &PairedSet,
    test_set: &PairedSet,
    w: &LossWeights,
    cfg: &TrainConfig,
    mut on_record: impl FnMut(&Record),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    w.check(model.arch.dim)?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::Param("training and test sets must be nonempty".into()));
    }
    let mut adam = Adam::new(cfg.adam, model.param_count());
    let mut batch_rng = rng::stream(cfg.seed, 0xba7c);
    let mut history = Vec::new();
    let mut best_fwd = Snapshot { step: 0, model: model.clone(), e_g: f64::INFINITY };
    let mut best_inv = best_fwd.clone();
    let mut stale = 0usize;
    let mut step = 0usize;

    let mut record = |model: &CouplingInn, step: usize, loss: f64, history: &mut Vec<Record>| -> Result<bool> {
        let a = relative_errors(model, train_set, w)?;
        let g = relative_errors(model, test_set, w)?;
        let r = Record { step, loss, e_a_fwd: a.fwd, e_g_fwd: g.fwd, e_a_inv: a.inv, e_g_inv: g.inv };
        on_record(&r);
        history.push(r);
        let mut improved = false;
        if g.fwd < best_fwd.e_g {
            best_fwd = Snapshot { step, model: model.clone(), e_g: g.fwd };
            improved = true;
        }
        if g.inv < best_inv.e_g {
            best_inv = Snapshot { step, model: model.clone(), e_g: g.inv };
            improved = true;
        }
        Ok(improved)
    };

    let full_loss = |m: &CouplingInn| loss(m, train_set, cfg.c0, w);
    record(&model, 0, full_loss(&model)?, &mut history)?;
    while step < cfg.max_steps {
        let (l, g) = match cfg.batch_size {
            Some(b) if b < train_set.len() => {
                let idx = sample(&mut batch_rng, train_set.len(), b).into_vec();
                loss_and_grad(&model, &train_set.select(&idx), cfg.c0, w)?
            }
            _ => loss_and_grad(&model, train_set, cfg.c0, w)?,
        };
        if !l.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged(step));
        }
        adam.step(&mut model.params, &g);
        if model.params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged(step + 1));
        }
        step += 1;
        if step.is_multiple_of(cfg.record_every) || step == cfg.max_steps {
            let l = full_loss(&model)?;
            if !l.is_finite() {
                return Err(Error::Diverged(step));
            }
            if record(&model, step, l, &mut history)? {
                stale = 0;
            } else {
                stale += 1;
                if cfg.early_stop.is_some_and(|win| stale >= win) {
                    break;
                }
            }
        }
    }
    Ok(TrainOutcome { final_model: model, steps: step, best_fwd, best_inv, history })
}
