//! Fully connected ReLU nets over a flat parameter slice, batched with ndarray.

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Layer widths `[in, h, …, h, out]`; ReLU after every layer but the last.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub widths: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct MlpCache {
    /// `inputs[l]` is what layer `l` consumed.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
}

impl MlpShape {
    pub fn new(widths: Vec<usize>) -> Self {
        assert!(widths.len() >= 2 && widths.iter().all(|&w| w > 0));
        Self { widths }
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut off = 0;
        self.widths.windows(2).map(move |w| {
            let o = off;
            off += (w[0] + 1) * w[1];
            (o, w[0], w[1])
        })
    }

    fn weight<'a>(&self, p: &'a [f64], off: usize, i: usize, o: usize) -> (ArrayView2<'a, f64>, ArrayView1<'a, f64>) {
        let w = ArrayView2::from_shape((i, o), &p[off..off + i * o]).unwrap();
        let b = ArrayView1::from(&p[off + i * o..off + (i + 1) * o]);
        (w, b)
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(&self, p: &mut [f64], rng: &mut R) {
        for (off, i, o) in self.layers() {
            let a = (6.0 / (i + o) as f64).sqrt();
            for v in &mut p[off..off + i * o] {
                *v = rng.random_range(-a..a);
            }
            for v in &mut p[off + i * o..off + (i + 1) * o] {
                *v = 0.0;
            }
        }
    }

    pub fn forward(&self, p: &[f64], x: ArrayView2<f64>) -> Array2<f64> {
        let nl = self.widths.len() - 1;
        let mut a = x.to_owned();
        for (l, (off, i, o)) in self.layers().enumerate() {
            let (w, b) = self.weight(p, off, i, o);
            let mut z = a.dot(&w);
            z += &b;
            if l + 1 < nl {
                z.mapv_inplace(|v| v.max(0.0));
            }
            a = z;
        }
        a
    }

    pub fn forward_cached(&self, p: &[f64], x: ArrayView2<f64>) -> (Array2<f64>, MlpCache) {
        let nl = self.widths.len() - 1;
        let mut inputs = Vec::with_capacity(nl);
        let mut pre = Vec::with_capacity(nl - 1);
        let mut a = x.to_owned();
        for (l, (off, i, o)) in self.layers().enumerate() {
            let (w, b) = self.weight(p, off, i, o);
            let mut z = a.dot(&w);
            z += &b;
            inputs.push(a);
            if l + 1 < nl {
                let act = z.mapv(|v| v.max(0.0));
                pre.push(z);
                a = act;
            } else {
                a = z;
            }
        }
        (a, MlpCache { inputs, pre })
    }

    /// Accumulates parameter gradients into `g` and returns the input gradient.
    pub fn backward(&self, p: &[f64], cache: &MlpCache, d_out: Array2<f64>, g: &mut [f64]) -> Array2<f64> {
        let layers: Vec<_> = self.layers().collect();
        let mut dz = d_out;
        for l in (0..layers.len()).rev() {
            let (off, i, o) = layers[l];
            let (w, _) = self.weight(p, off, i, o);
            {
                let (gw, gb) = g[off..off + (i + 1) * o].split_at_mut(i * o);
                let mut gw = ArrayViewMut2::from_shape((i, o), gw).unwrap();
                ndarray::linalg::general_mat_mul(1.0, &cache.inputs[l].t(), &dz, 1.0, &mut gw);
                let mut gb = ArrayViewMut1::from(gb);
                gb += &dz.sum_axis(Axis(0));
            }
            let mut da = dz.dot(&w.t());
            if l > 0 {
                ndarray::Zip::from(&mut da).and(&cache.pre[l - 1]).for_each(|d, &z| {
                    if z < 0.0 {
                        *d = 0.0;
                    }
                });
            }
            dz = da;
        }
        dz
    }
}
