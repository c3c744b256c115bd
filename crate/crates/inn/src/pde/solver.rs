//! Cell-centred flux discretization of `−∇·(u∇y) = 1`, `y = 0` on the boundary
//! of the unit square, solved by Jacobi-preconditioned CG.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSpec {
    /// `1/h`.
    pub cells: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub u_min: f64,
}

impl Default for SolveSpec {
    fn default() -> Self {
        Self { cells: 50, tol: 1e-10, max_iter: 20_000, u_min: 1e-3 }
    }
}

impl SolveSpec {
    pub fn with_cells(cells: usize) -> Self {
        Self { cells, ..Self::default() }
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn nodes(&self) -> usize {
        (self.cells + 1) * (self.cells + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells < 2 || !(self.tol > 0.0) || self.max_iter == 0 || !(self.u_min > 0.0) {
            return Err(Error::Param(format!("invalid solve spec {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    /// Nodal values, row-major with `x₁` slow, boundary included.
    pub y: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
    /// `yᵀAy` on the interior unknowns.
    pub energy: f64,
}

impl Solution {
    pub fn at(&self, spec: &SolveSpec, a: usize, b: usize) -> f64 {
        self.y[a * (spec.cells + 1) + b]
    }
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

struct System {
    m: usize,
    /// Face coefficients: east of `(a, b)` and north of `(a, b)`.
    east: Vec<f64>,
    north: Vec<f64>,
    diag: Vec<f64>,
}

impl System {
    fn new(u: &[f64], m: usize) -> Self {
        let mut east = vec![0.0; m * m];
        let mut north = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                let k = a * m + b;
                if a + 1 < m {
                    east[k] = harmonic(u[k], u[k + m]);
                }
                if b + 1 < m {
                    north[k] = harmonic(u[k], u[k + 1]);
                }
            }
        }
        let mut diag = vec![0.0; m * m];
        for a in 1..m - 1 {
            for b in 1..m - 1 {
                let k = a * m + b;
                diag[k] = east[k] + east[k - m] + north[k] + north[k - 1];
            }
        }
        Self { m, east, north, diag }
    }

    /// `A·x` on interior nodes; boundary entries of `x` are ignored.
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let m = self.m;
        for a in 1..m - 1 {
            for b in 1..m - 1 {
                let k = a * m + b;
                let mut s = self.diag[k] * x[k];
                if a + 1 < m - 1 {
                    s -= self.east[k] * x[k + m];
                }
                if a > 1 {
                    s -= self.east[k - m] * x[k - m];
                }
                if b + 1 < m - 1 {
                    s -= self.north[k] * x[k + 1];
                }
                if b > 1 {
                    s -= self.north[k - 1] * x[k - 1];
                }
                out[k] = s;
            }
        }
    }
}

fn interior_dot(m: usize, x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for a in 1..m - 1 {
        for b in 1..m - 1 {
            s += x[a * m + b] * y[a * m + b];
        }
    }
    s
}

/// Solve with nodal coefficient values `u` on the `(1/h + 1)²` grid.
pub fn solve(u: &[f64], spec: &SolveSpec) -> Result<Solution> {
    spec.validate()?;
    let m = spec.cells + 1;
    if u.len() != m * m {
        return Err(Error::Dim { expected: m * m, got: u.len() });
    }
    let u_lo = u.iter().copied().fold(f64::INFINITY, f64::min);
    if !(u_lo >= spec.u_min) {
        return Err(Error::Param(format!("coefficient {u_lo:e} is below u_min {:e}", spec.u_min)));
    }
    let sys = System::new(u, m);
    let h2 = spec.h() * spec.h();
    let mut rhs = vec![0.0; m * m];
    for a in 1..m - 1 {
        for b in 1..m - 1 {
            rhs[a * m + b] = h2;
        }
    }
    let b_norm = interior_dot(m, &rhs, &rhs).sqrt();

    let mut x = vec![0.0; m * m];
    let mut r = rhs.clone();
    let precond = |r: &[f64], z: &mut [f64]| {
        for a in 1..m - 1 {
            for b in 1..m - 1 {
                let k = a * m + b;
                z[k] = r[k] / sys.diag[k];
            }
        }
    };
    let mut z = vec![0.0; m * m];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; m * m];
    let mut rz = interior_dot(m, &r, &z);
    let mut rel = 1.0;
    let mut it = 0;
    while it < spec.max_iter {
        rel = interior_dot(m, &r, &r).sqrt() / b_norm;
        if rel <= spec.tol {
            break;
        }
        sys.apply(&p, &mut ap);
        let alpha = rz / interior_dot(m, &p, &ap);
        for k in 0..m * m {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        precond(&r, &mut z);
        let rz_new = interior_dot(m, &r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..m * m {
            p[k] = z[k] + beta * p[k];
        }
        it += 1;
    }
    // true residual, not the recurrence
    sys.apply(&x, &mut ap);
    let mut res = 0.0;
    for a in 1..m - 1 {
        for b in 1..m - 1 {
            let k = a * m + b;
            res += (rhs[k] - ap[k]).powi(2);
        }
    }
    let true_rel = res.sqrt() / b_norm;
    if !(rel <= spec.tol) || !(true_rel <= spec.tol * 10.0) {
        return Err(Error::Convergence(format!("CG stopped at relative residual {true_rel:e} after {it} iterations")));
    }
    let energy = interior_dot(m, &x, &ap);
    Ok(Solution { y: x, iterations: it, rel_residual: true_rel, energy })
}

/// Double sine series of the solution of `−Δy = 1` with zero boundary values,
/// summed over odd modes `k, l ≤ terms`.
pub fn series_oracle(x1: f64, x2: f64, terms: usize) -> f64 {
    let mut s = 0.0;
    for k in (1..=terms).step_by(2) {
        let kf = k as f64;
        let sk = (kf * PI * x1).sin();
        for l in (1..=terms).step_by(2) {
            let lf = l as f64;
            s += sk * (lf * PI * x2).sin() / (kf * lf * (kf * kf + lf * lf));
        }
    }
    16.0 / PI.powi(4) * s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_symmetries() {
        let v = series_oracle(0.3, 0.8, 200);
        assert!((v - series_oracle(0.8, 0.3, 200)).abs() < 1e-15);
        assert!((v - series_oracle(0.7, 0.8, 200)).abs() < 1e-12);
        assert!(series_oracle(0.0, 0.4, 200).abs() < 1e-15);
    }

    #[test]
    fn unit_coefficient_center() {
        let spec = SolveSpec::default();
        let sol = solve(&vec![1.0; spec.nodes()], &spec).unwrap();
        let c = sol.at(&spec, 25, 25);
        let h = spec.h();
        assert!((c - series_oracle(0.5, 0.5, 200)).abs() <= 5.0 * h * h);
        assert!(sol.rel_residual <= 1e-10);
    }

    #[test]
    fn rejects_small_coefficient() {
        let spec = SolveSpec::with_cells(4);
        let mut u = vec![1.0; spec.nodes()];
        u[7] = 1e-4;
        assert!(solve(&u, &spec).is_err());
    }
}
