//! PCA reduction of the PDE pairs and the reduced training problem.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{CouplingInn, LossWeights, PairedSet};
use crate::pca::PcaBasis;
use crate::pde::kl::weights as kl_weights;
use crate::pde::PairDataset;

/// How the network input is formed from `ξ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFeatures {
    /// `ξ_ij/(i³ + j³)`, the coefficients of `u − 2` in the cosine basis.
    #[default]
    KlWeighted,
    /// `ξ` as drawn.
    Raw,
}

impl std::str::FromStr for InputFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kl_weighted" | "kl" => Ok(Self::KlWeighted),
            "raw" => Ok(Self::Raw),
            _ => Err(Error::Param(format!("unknown feature map {s:?}"))),
        }
    }
}

pub fn input_features(xi: ArrayView2<f64>, kind: InputFeatures) -> Array2<f64> {
    match kind {
        InputFeatures::Raw => xi.to_owned(),
        InputFeatures::KlWeighted => {
            let w = ndarray::Array1::from(kl_weights());
            &xi * &w.insert_axis(Axis(0))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Reduced dimension `d = d_X = d_Y`.
    pub d: usize,
    /// `|T_r|`, taken from the front of the dataset.
    pub n_train: usize,
    /// `|T_e|`, taken from the back.
    pub n_test: usize,
    /// Fit the bases on every non-test sample rather than on `T_r` alone.
    pub pca_on_pool: bool,
    pub features: InputFeatures,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { d: 10, n_train: 100, n_test: 500, pca_on_pool: false, features: InputFeatures::KlWeighted }
    }
}

#[derive(Clone, Debug)]
pub struct Reduced {
    pub basis_x: PcaBasis,
    pub basis_y: PcaBasis,
    pub train: PairedSet,
    pub test: PairedSet,
    pub weights: LossWeights,
    pub features: InputFeatures,
}

pub fn split_indices(m: usize, cfg: &SplitConfig) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    if cfg.n_train == 0 || cfg.n_test == 0 || cfg.n_train + cfg.n_test > m {
        return Err(Error::Param(format!("split {}+{} does not fit {m} samples", cfg.n_train, cfg.n_test)));
    }
    let train: Vec<usize> = (0..cfg.n_train).collect();
    let test: Vec<usize> = (m - cfg.n_test..m).collect();
    let pool: Vec<usize> = if cfg.pca_on_pool { (0..m - cfg.n_test).collect() } else { train.clone() };
    Ok((train, test, pool))
}

/// Encode both sides with bases fitted on the PCA pool; loss weights are the
/// normalized leading eigenvalues.
pub fn reduce(ds: &PairDataset, cfg: &SplitConfig) -> Result<Reduced> {
    let (_, _, pool) = split_indices(ds.len(), cfg)?;
    let x = input_features(ds.xi.view(), cfg.features);
    let basis_x = PcaBasis::fit(x.select(Axis(0), &pool).view(), cfg.d)?;
    let basis_y = PcaBasis::fit(ds.y.select(Axis(0), &pool).view(), cfg.d)?;
    reduce_with(ds, cfg, basis_x, basis_y)
}

/// Like [`reduce`] with previously fitted bases.
pub fn reduce_with(ds: &PairDataset, cfg: &SplitConfig, basis_x: PcaBasis, basis_y: PcaBasis) -> Result<Reduced> {
    let (train, test, _) = split_indices(ds.len(), cfg)?;
    if basis_x.d_u != basis_y.d_u {
        return Err(Error::Dim { expected: basis_x.d_u, got: basis_y.d_u });
    }
    let x = input_features(ds.xi.view(), cfg.features);
    let enc = |idx: &[usize]| -> Result<PairedSet> {
        let u = basis_x.encode_batch(x.select(Axis(0), idx).view())?;
        let y = basis_y.encode_batch(ds.y.select(Axis(0), idx).view())?;
        PairedSet::new(u, y)
    };
    let weights = LossWeights { u: basis_x.weight_vector()?, y: basis_y.weight_vector()? };
    Ok(Reduced { train: enc(&train)?, test: enc(&test)?, basis_x, basis_y, weights, features: cfg.features })
}

/// Relative errors of the decoded predictions against the full-size targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmbientErrors {
    /// `‖G*_Y Φ(G_X x) − y‖ / ‖y‖` over the whole set.
    pub fwd: f64,
    /// `‖G*_X Φ⁻¹(G_Y y) − x‖ / ‖x‖`.
    pub inv: f64,
}

pub fn ambient_errors(
    model: &CouplingInn,
    basis_x: &PcaBasis,
    basis_y: &PcaBasis,
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
) -> Result<AmbientErrors> {
    let y_hat = basis_y.decode_batch(model.forward_batch(basis_x.encode_batch(x)?.view())?.view())?;
    let x_hat = basis_x.decode_batch(model.inverse_batch(basis_y.encode_batch(y)?.view())?.view())?;
    let rel = |t: ArrayView2<f64>, p: &Array2<f64>| -> Result<f64> {
        let den = t.iter().map(|v| v * v).sum::<f64>();
        if den == 0.0 {
            return Err(Error::Param("zero target norm".into()));
        }
        Ok(((&t - p).iter().map(|v| v * v).sum::<f64>() / den).sqrt())
    };
    Ok(AmbientErrors { fwd: rel(y, &y_hat)?, inv: rel(x, &x_hat)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn kl_features_scale_columns() {
        let xi = Array2::<f64>::ones((2, 400));
        let f = input_features(xi.view(), InputFeatures::KlWeighted);
        assert!((f[[0, 0]] - 0.5).abs() < 1e-15);
        assert!((f[[1, 1]] - 1.0 / 9.0).abs() < 1e-15);
        assert!((f[[1, 20]] - 1.0 / 9.0).abs() < 1e-15);
        let raw = input_features(array![[2.0, 3.0]].view(), InputFeatures::Raw);
        assert_eq!(raw, array![[2.0, 3.0]]);
    }

    #[test]
    fn split_is_disjoint() {
        let cfg = SplitConfig { n_train: 3, n_test: 2, ..SplitConfig::default() };
        let (tr, te, pool) = split_indices(10, &cfg).unwrap();
        assert!(tr.iter().all(|i| !te.contains(i)));
        assert!(pool.iter().all(|i| !te.contains(i)));
        assert!(split_indices(4, &cfg).is_err());
    }
}
