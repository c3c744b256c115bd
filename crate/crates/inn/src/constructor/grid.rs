//! Uniform grid data `x^α = α/n`, `α ∈ {0, …, n−1}^d`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dist2;

/// Grid samples with `α₁` the most significant index.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDataset {
    pub d: usize,
    pub n: usize,
    pub y: Vec<Vec<f64>>,
}

/// On-disk layout: `y` flattened row-major, one grid point per row.
#[derive(Serialize, Deserialize)]
struct GridFile {
    d: usize,
    n: usize,
    y: Vec<f64>,
}

impl GridDataset {
    pub fn new(d: usize, n: usize, y: Vec<Vec<f64>>) -> Result<Self> {
        if d < 2 || n < 2 {
            return Err(Error::Param(format!("grid needs d >= 2 and n >= 2, got d={d}, n={n}")));
        }
        let count = n.checked_pow(d as u32).ok_or_else(|| Error::Param("grid too large".into()))?;
        if y.len() != count {
            return Err(Error::Dim { expected: count, got: y.len() });
        }
        for v in &y {
            if v.len() != d {
                return Err(Error::Dim { expected: d, got: v.len() });
            }
            if v.iter().any(|t| !t.is_finite()) {
                return Err(Error::NonFinite("grid values"));
            }
        }
        Ok(Self { d, n, y })
    }

    pub fn from_fn(d: usize, n: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        if d < 2 || n < 2 {
            return Err(Error::Param(format!("grid needs d >= 2 and n >= 2, got d={d}, n={n}")));
        }
        let count = n.checked_pow(d as u32).ok_or_else(|| Error::Param("grid too large".into()))?;
        let y = (0..count).map(|i| f(&grid_point(d, n, i))).collect();
        Self::new(d, n, y)
    }

    /// Number of grid points `N = n^d`.
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn x(&self, i: usize) -> Vec<f64> {
        grid_point(self.d, self.n, i)
    }

    pub fn xs(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    /// `max_α ‖y^α − x^α‖₂`.
    pub fn max_displacement(&self) -> f64 {
        (0..self.len()).map(|i| dist2(&self.y[i], &self.x(i))).fold(0.0, f64::max)
    }

    /// Data estimates `(max ‖Δy‖/‖Δx‖, max ‖Δx‖/‖Δy‖)` over all pairs.
    /// Errors if two grid points share a value.
    pub fn lipschitz_estimates(&self) -> Result<(f64, f64)> {
        let xs = self.xs();
        let mut lf: f64 = 0.0;
        let mut li: f64 = 0.0;
        for a in 0..self.len() {
            for b in a + 1..self.len() {
                let dx = dist2(&xs[a], &xs[b]);
                let dy = dist2(&self.y[a], &self.y[b]);
                if dy == 0.0 {
                    return Err(Error::Param(format!("grid points {a} and {b} have the same value")));
                }
                lf = lf.max(dy / dx);
                li = li.max(dx / dy);
            }
        }
        Ok((lf, li))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = GridFile { d: self.d, n: self.n, y: self.y.concat() };
        fs::write(path, serde_json::to_string(&f)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f: GridFile = serde_json::from_str(&fs::read_to_string(path)?)?;
        if f.d == 0 || !f.y.len().is_multiple_of(f.d) {
            return Err(Error::Format("grid values do not split into d-vectors".into()));
        }
        Self::new(f.d, f.n, f.y.chunks(f.d).map(<[f64]>::to_vec).collect())
    }
}

/// Multi-index of point `i` (`α₁` most significant).
pub fn grid_index(d: usize, n: usize, mut i: usize) -> Vec<usize> {
    let mut a = vec![0; d];
    for k in (0..d).rev() {
        a[k] = i % n;
        i /= n;
    }
    a
}

pub fn grid_point(d: usize, n: usize, i: usize) -> Vec<f64> {
    grid_index(d, n, i).into_iter().map(|a| a as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_and_values() {
        assert_eq!(grid_index(2, 3, 5), vec![1, 2]);
        assert_eq!(grid_point(2, 2, 1), vec![0.0, 0.5]);
        let g = GridDataset::from_fn(2, 2, |x| x.to_vec()).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.max_displacement(), 0.0);
        let (lf, li) = g.lipschitz_estimates().unwrap();
        assert!((lf - 1.0).abs() < 1e-15 && (li - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(GridDataset::new(1, 2, vec![vec![0.0]; 2]).is_err());
        assert!(GridDataset::new(2, 2, vec![vec![0.0, 0.0]; 3]).is_err());
        assert!(GridDataset::new(2, 2, vec![vec![0.0, f64::NAN]; 4]).is_err());
        let g = GridDataset::new(2, 2, vec![vec![0.0, 0.0]; 4]).unwrap();
        assert!(g.lipschitz_estimates().is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.json");
        let g = GridDataset::from_fn(3, 2, |x| vec![x[0] + 0.1, x[1] * 2.0, 1.0 / 3.0]).unwrap();
        g.save(&p).unwrap();
        assert_eq!(GridDataset::load(&p).unwrap(), g);
    }
}
