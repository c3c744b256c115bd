//! Odd/even affine-coupling INN.
//!
//! Each block updates the odd coordinates conditioned on the even ones and
//! then the even coordinates conditioned on the updated odd ones:
//!
//! ```text
//! a' = a ⊙ exp(clamp(φ_W(b)))  + φ_b(b)
//! b' = b ⊙ exp(clamp(φ_W(a'))) + φ_b(a')
//! ```
//!
//! where `a = g_o(u)`, `b = g_e(u)` and `g_c` interleaves the halves back.
//! The two subnets of a block are shared by both half-steps.

use nalgebra::DMatrix;
use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::mlp::{MlpCache, MlpShape};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arch {
    /// Ambient dimension (even).
    pub dim: usize,
    pub hidden: usize,
    pub hidden_layers: usize,
    pub blocks: usize,
    pub s_max: f64,
}

impl Default for Arch {
    fn default() -> Self {
        Self { dim: 10, hidden: 32, hidden_layers: 3, blocks: 3, s_max: 5.0 }
    }
}

impl Arch {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 || !self.dim.is_multiple_of(2) {
            return Err(Error::Param(format!("coupling dimension must be even, got {}", self.dim)));
        }
        if self.hidden == 0 || self.blocks == 0 || !(self.s_max > 0.0) {
            return Err(Error::Param("hidden width, block count and s_max must be positive".into()));
        }
        Ok(())
    }

    pub fn subnet(&self) -> MlpShape {
        let half = self.dim / 2;
        let mut w = vec![half];
        w.extend(std::iter::repeat_n(self.hidden, self.hidden_layers));
        w.push(half);
        MlpShape::new(w)
    }

    pub fn block_params(&self) -> usize {
        2 * self.subnet().param_count()
    }

    pub fn param_count(&self) -> usize {
        self.blocks * self.block_params()
    }
}

/// Clamped exponent `s_max·tanh(s/s_max)`.
#[inline]
pub fn clamp_exp(raw: f64, s_max: f64) -> f64 {
    s_max * (raw / s_max).tanh()
}

#[inline]
fn clamp_deriv(raw: f64, s_max: f64) -> f64 {
    let t = (raw / s_max).tanh();
    1.0 - t * t
}

fn odd(u: ArrayView2<f64>) -> Array2<f64> {
    u.slice(s![.., ..;2]).to_owned()
}

fn even(u: ArrayView2<f64>) -> Array2<f64> {
    u.slice(s![.., 1..;2]).to_owned()
}

fn interleave(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.nrows(), 2 * a.ncols()));
    out.slice_mut(s![.., ..;2]).assign(a);
    out.slice_mut(s![.., 1..;2]).assign(b);
    out
}

struct HalfCache {
    cond_s: MlpCache,
    cond_t: MlpCache,
    raw: Array2<f64>,
    /// `exp(±clamp(raw))` as applied.
    e: Array2<f64>,
    /// The uncoupled half on the "input" side of the affine map.
    x: Array2<f64>,
}

/// One block's two subnets over a parameter slice.
#[derive(Clone, Copy)]
pub(crate) struct BlockView<'a> {
    net: &'a MlpShape,
    p: &'a [f64],
    s_max: f64,
}

impl<'a> BlockView<'a> {
    fn split(&self) -> (&'a [f64], &'a [f64]) {
        self.p.split_at(self.net.param_count())
    }

    fn scale_shift(&self, cond: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
        let (ps, pt) = self.split();
        (self.net.forward(ps, cond), self.net.forward(pt, cond))
    }

    fn half_fwd(&self, cond: ArrayView2<f64>, x: &Array2<f64>) -> Array2<f64> {
        let (raw, t) = self.scale_shift(cond);
        let sm = self.s_max;
        let mut y = x.clone();
        ndarray::Zip::from(&mut y).and(&raw).and(&t).for_each(|y, &r, &t| *y = *y * clamp_exp(r, sm).exp() + t);
        y
    }

    fn half_inv(&self, cond: ArrayView2<f64>, y: &Array2<f64>) -> Array2<f64> {
        let (raw, t) = self.scale_shift(cond);
        let sm = self.s_max;
        let mut x = y.clone();
        ndarray::Zip::from(&mut x).and(&raw).and(&t).for_each(|x, &r, &t| *x = (*x - t) * (-clamp_exp(r, sm)).exp());
        x
    }

    fn half_cached(&self, cond: ArrayView2<f64>, input: &Array2<f64>, inverse: bool) -> (Array2<f64>, HalfCache) {
        let (ps, pt) = self.split();
        let (raw, cond_s) = self.net.forward_cached(ps, cond);
        let (t, cond_t) = self.net.forward_cached(pt, cond);
        let sm = self.s_max;
        let sign = if inverse { -1.0 } else { 1.0 };
        let e = raw.mapv(|r| (sign * clamp_exp(r, sm)).exp());
        let out = if inverse { (input - &t) * &e } else { input * &e + &t };
        let x = if inverse { out.clone() } else { input.clone() };
        (out, HalfCache { cond_s, cond_t, raw, e, x })
    }

    /// Backward through a half-step. Returns `(d_input, d_cond)`.
    fn half_backward(&self, c: &HalfCache, d_out: &Array2<f64>, inverse: bool, g: &mut [f64]) -> (Array2<f64>, Array2<f64>) {
        let np = self.net.param_count();
        let (ps, pt) = self.split();
        let (gs, gt) = g.split_at_mut(np);
        let sm = self.s_max;
        // forward: out = x·e + t          with e = exp(s)
        // inverse: out = (y − t)·e        with e = exp(−s); `x` holds out
        let d_in = d_out * &c.e;
        let mut d_raw = Array2::zeros(d_out.raw_dim());
        if inverse {
            ndarray::Zip::from(&mut d_raw).and(d_out).and(&c.x).and(&c.raw).for_each(|dr, &d, &x, &r| {
                *dr = -d * x * clamp_deriv(r, sm);
            });
        } else {
            ndarray::Zip::from(&mut d_raw).and(&d_in).and(&c.x).and(&c.raw).for_each(|dr, &d, &x, &r| {
                *dr = d * x * clamp_deriv(r, sm);
            });
        }
        let d_t = if inverse { -&d_in } else { d_out.clone() };
        let mut d_cond = self.net.backward(ps, &c.cond_s, d_raw, gs);
        d_cond += &self.net.backward(pt, &c.cond_t, d_t, gt);
        (d_in, d_cond)
    }

    pub(crate) fn forward(&self, u: ArrayView2<f64>) -> Array2<f64> {
        let a = odd(u);
        let b = even(u);
        let a1 = self.half_fwd(b.view(), &a);
        let b1 = self.half_fwd(a1.view(), &b);
        interleave(&a1, &b1)
    }

    pub(crate) fn inverse(&self, v: ArrayView2<f64>) -> Array2<f64> {
        let a1 = odd(v);
        let b1 = even(v);
        let b = self.half_inv(a1.view(), &b1);
        let a = self.half_inv(b.view(), &a1);
        interleave(&a, &b)
    }
}

struct BlockCache {
    first: HalfCache,
    second: HalfCache,
}

/// Trainable coupling INN; all parameters live in one flat vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingInn {
    pub arch: Arch,
    pub params: Vec<f64>,
}

impl CouplingInn {
    /// Glorot-uniform weights and zero biases from a seeded stream.
    pub fn init(arch: Arch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let net = arch.subnet();
        let mut params = vec![0.0; arch.param_count()];
        let mut r = rng::stream(seed, 0x1417);
        for chunk in params.chunks_mut(net.param_count()) {
            net.init(chunk, &mut r);
        }
        Ok(Self { arch, params })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn views<'a>(&'a self, net: &'a MlpShape, p: &'a [f64]) -> Vec<BlockView<'a>> {
        p.chunks(self.arch.block_params()).map(|bp| BlockView { net, p: bp, s_max: self.arch.s_max }).collect()
    }

    fn check_batch(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.arch.dim {
            return Err(Error::Dim { expected: self.arch.dim, got: x.ncols() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coupling input"));
        }
        Ok(())
    }

    pub fn forward_batch(&self, u: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_batch(&u)?;
        Ok(self.forward_with(&self.params, u))
    }

    pub fn inverse_batch(&self, y: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_batch(&y)?;
        Ok(self.inverse_with(&self.params, y))
    }

    pub fn forward(&self, u: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, u.len()), u).map_err(|e| Error::Format(e.to_string()))?;
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, y.len()), y).map_err(|e| Error::Format(e.to_string()))?;
        Ok(self.inverse_batch(x)?.into_raw_vec_and_offset().0)
    }

    pub(crate) fn forward_with(&self, p: &[f64], u: ArrayView2<f64>) -> Array2<f64> {
        let net = self.arch.subnet();
        let mut x = u.to_owned();
        for b in self.views(&net, p) {
            x = b.forward(x.view());
        }
        x
    }

    pub(crate) fn inverse_with(&self, p: &[f64], y: ArrayView2<f64>) -> Array2<f64> {
        let net = self.arch.subnet();
        let mut x = y.to_owned();
        for b in self.views(&net, p).iter().rev() {
            x = b.inverse(x.view());
        }
        x
    }

    /// Forward pass with caches; backward accumulates into `g` and returns input gradients.
    pub(crate) fn forward_backward<F>(&self, u: ArrayView2<f64>, g: &mut [f64], seed_grad: F) -> Array2<f64>
    where
        F: FnOnce(&Array2<f64>) -> Array2<f64>,
    {
        let net = self.arch.subnet();
        let views = self.views(&net, &self.params);
        let mut caches = Vec::with_capacity(views.len());
        let mut x = u.to_owned();
        for b in &views {
            let a = odd(x.view());
            let e = even(x.view());
            let (a1, first) = b.half_cached(e.view(), &a, false);
            let (b1, second) = b.half_cached(a1.view(), &e, false);
            caches.push(BlockCache { first, second });
            x = interleave(&a1, &b1);
        }
        let d_out = seed_grad(&x);
        let bp = self.arch.block_params();
        let mut d = d_out;
        for (k, b) in views.iter().enumerate().rev() {
            let gk = &mut g[k * bp..(k + 1) * bp];
            let c = &caches[k];
            let da1 = odd(d.view());
            let db1 = even(d.view());
            // second half: b1 = b·e(a1) + t(a1)
            let (db, da1_extra) = b.half_backward(&c.second, &db1, false, gk);
            let da1 = da1 + da1_extra;
            // first half: a1 = a·e(b) + t(b)
            let (da, db_extra) = b.half_backward(&c.first, &da1, false, gk);
            let db = db + db_extra;
            d = interleave(&da, &db);
        }
        d
    }

    /// Inverse pass with caches; same contract as [`Self::forward_backward`].
    pub(crate) fn inverse_backward<F>(&self, y: ArrayView2<f64>, g: &mut [f64], seed_grad: F) -> Array2<f64>
    where
        F: FnOnce(&Array2<f64>) -> Array2<f64>,
    {
        let net = self.arch.subnet();
        let views = self.views(&net, &self.params);
        let mut caches: Vec<Option<BlockCache>> = (0..views.len()).map(|_| None).collect();
        let mut x = y.to_owned();
        for (k, b) in views.iter().enumerate().rev() {
            let a1 = odd(x.view());
            let b1 = even(x.view());
            let (bb, second) = b.half_cached(a1.view(), &b1, true);
            let (aa, first) = b.half_cached(bb.view(), &a1, true);
            caches[k] = Some(BlockCache { first, second });
            x = interleave(&aa, &bb);
        }
        let d_out = seed_grad(&x);
        let bp = self.arch.block_params();
        let mut d = d_out;
        for (k, b) in views.iter().enumerate() {
            let gk = &mut g[k * bp..(k + 1) * bp];
            let c = caches[k].as_ref().unwrap();
            let da = odd(d.view());
            let db = even(d.view());
            // a = (a1 − t(b))·exp(−s(b))
            let (da1, db_extra) = b.half_backward(&c.first, &da, true, gk);
            let db = db + db_extra;
            // b = (b1 − t(a1))·exp(−s(a1))
            let (db1, da1_extra) = b.half_backward(&c.second, &db, true, gk);
            let da1 = da1 + da1_extra;
            d = interleave(&da1, &db1);
        }
        d
    }

    /// Extract block `k` as a standalone layer.
    pub fn block(&self, k: usize) -> CouplingBlock {
        let bp = self.arch.block_params();
        CouplingBlock { arch: self.arch.clone(), params: self.params[k * bp..(k + 1) * bp].to_vec() }
    }
}

/// A single coupling block as a standalone invertible layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingBlock {
    pub arch: Arch,
    pub params: Vec<f64>,
}

impl CouplingBlock {
    pub fn dim(&self) -> usize {
        self.arch.dim
    }

    fn with<T>(&self, f: impl FnOnce(BlockView) -> T) -> T {
        let net = self.arch.subnet();
        f(BlockView { net: &net, p: &self.params, s_max: self.arch.s_max })
    }

    pub fn apply(&self, x: &mut [f64]) {
        let out = self.with(|b| b.forward(ArrayView2::from_shape((1, x.len()), x).unwrap()));
        x.copy_from_slice(out.as_slice().unwrap());
    }

    pub fn unapply(&self, y: &mut [f64]) {
        let out = self.with(|b| b.inverse(ArrayView2::from_shape((1, y.len()), y).unwrap()));
        y.copy_from_slice(out.as_slice().unwrap());
    }

    /// Clamped exponent and shift produced from a conditioning half.
    pub fn conditioner(&self, cond: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.with(|b| {
            let c = ArrayView2::from_shape((1, cond.len()), cond).unwrap();
            let (raw, t) = b.scale_shift(c);
            let sm = self.arch.s_max;
            (raw.iter().map(|&r| clamp_exp(r, sm)).collect(), t.into_raw_vec_and_offset().0)
        })
    }

    /// Jacobian from one reverse pass per output coordinate.
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let inn = CouplingInn { arch: Arch { blocks: 1, ..self.arch.clone() }, params: self.params.clone() };
        let batch = Array2::from_shape_fn((d, d), |(_, j)| x[j]);
        let mut scratch = vec![0.0; self.params.len()];
        let grads = inn.forward_backward(batch.view(), &mut scratch, |_| Array2::eye(d));
        DMatrix::from_fn(d, d, |i, j| grads[[i, j]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::train::{loss, loss_and_grad, LossWeights, PairedSet};
    use ndarray::Array2;
    use rand::Rng;

    fn random_batch(n: usize, seed: u64) -> Array2<f64> {
        let mut r = rng::stream(seed, 7);
        Array2::from_shape_fn((n, 10), |_| r.random_range(-1.0..1.0))
    }

    #[test]
    fn param_count_matches_formula() {
        let a = Arch::default();
        assert_eq!(a.subnet().param_count(), 6 * 32 + 33 * 32 * 2 + 33 * 5);
        assert_eq!(a.param_count(), 3 * 2 * 2469);
    }

    #[test]
    fn same_seed_same_params() {
        let a = CouplingInn::init(Arch::default(), 3).unwrap();
        let b = CouplingInn::init(Arch::default(), 3).unwrap();
        let c = CouplingInn::init(Arch::default(), 4).unwrap();
        assert_eq!(a.params, b.params);
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn zero_params_is_identity() {
        let m = CouplingInn { arch: Arch::default(), params: vec![0.0; Arch::default().param_count()] };
        let x = random_batch(5, 1);
        assert_eq!(m.forward_batch(x.view()).unwrap(), x);
        assert_eq!(m.inverse_batch(x.view()).unwrap(), x);
    }

    #[test]
    fn round_trip() {
        for seed in 0..3 {
            let m = CouplingInn::init(Arch::default(), seed).unwrap();
            let x = random_batch(100, seed);
            let y = m.forward_batch(x.view()).unwrap();
            let back = m.inverse_batch(y.view()).unwrap();
            let again = m.forward_batch(back.view()).unwrap();
            assert!((&back - &x).iter().all(|v| v.abs() < 1e-10));
            assert!((&again - &y).iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn clamp_saturates() {
        assert!((clamp_exp(100.0, 5.0) - 5.0).abs() < 1e-12);
        assert!((clamp_exp(-100.0, 5.0) + 5.0).abs() < 1e-12);
        assert!((clamp_exp(1e-3, 5.0) - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn clamp_active_in_block() {
        // one hidden layer; φ_W emits 100 everywhere through its output bias
        let arch = Arch { dim: 2, hidden: 1, hidden_layers: 1, blocks: 1, s_max: 5.0 };
        let net = arch.subnet();
        let mut p = vec![0.0; arch.param_count()];
        p[net.param_count() - 1] = 100.0;
        let m = CouplingInn { arch, params: p };
        let y = m.forward(&[1.0, 1.0]).unwrap();
        assert!((y[0] - 5f64.exp()).abs() < 1e-9);
        assert!((y[1] - 5f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn non_finite_rejected() {
        let m = CouplingInn::init(Arch::default(), 0).unwrap();
        let mut x = vec![0.0; 10];
        x[3] = f64::NAN;
        assert!(m.forward(&x).is_err());
        assert!(m.inverse(&x).is_err());
        assert!(m.forward(&[0.0; 9]).is_err());
    }

    fn fd_check(c0: f64, seed: u64) {
        let mut m = CouplingInn::init(Arch::default(), seed).unwrap();
        let mut r = rng::stream(seed, 99);
        for v in m.params.iter_mut() {
            *v += 0.05 * r.random_range(-1.0..1.0);
        }
        let set = PairedSet::new(random_batch(30, seed + 10), random_batch(30, seed + 20)).unwrap();
        let w = LossWeights { u: (1..=10).map(|i| 1.0 / i as f64).collect(), y: vec![0.5; 10] };
        let (l, g) = loss_and_grad(&m, &set, c0, &w).unwrap();
        assert!((l - loss(&m, &set, c0, &w).unwrap()).abs() <= 1e-12 * l.max(1.0));
        let h = 1e-5;
        for _ in 0..50 {
            let k = r.random_range(0..m.params.len());
            let orig = m.params[k];
            m.params[k] = orig + h;
            let lp = loss(&m, &set, c0, &w).unwrap();
            m.params[k] = orig - h;
            let lm = loss(&m, &set, c0, &w).unwrap();
            m.params[k] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let scale = fd.abs().max(g[k].abs()).max(1e-6);
            assert!((fd - g[k]).abs() / scale < 1e-4, "param {k}: fd {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        fd_check(1.0, 0);
        fd_check(1e-3, 1);
    }

    #[test]
    fn block_jacobian_matches_finite_differences() {
        let m = CouplingInn::init(Arch::default(), 5).unwrap();
        let b = m.block(1);
        let x: Vec<f64> = (0..10).map(|i| 0.1 * i as f64 - 0.4).collect();
        let j = b.jacobian(&x);
        let h = 1e-6;
        for c in 0..10 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            b.apply(&mut xp);
            b.apply(&mut xm);
            for r in 0..10 {
                let fd = (xp[r] - xm[r]) / (2.0 * h);
                assert!((fd - j[(r, c)]).abs() < 1e-6, "({r},{c}) {fd} vs {}", j[(r, c)]);
            }
        }
    }

    #[test]
    fn blocks_compose_to_model() {
        let m = CouplingInn::init(Arch::default(), 2).unwrap();
        let x: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let mut z = x.clone();
        for k in 0..3 {
            m.block(k).apply(&mut z);
        }
        let y = m.forward(&x).unwrap();
        assert!(y.iter().zip(&z).all(|(a, b)| (a - b).abs() < 1e-14));
        for k in (0..3).rev() {
            m.block(k).unapply(&mut z);
        }
        assert!(x.iter().zip(&z).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}
