//! Choice of `r` and the squared-L² error bounds for `F_nn = F̃_nn ∘ H^r`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper clamp on `r`, keeping `h^r` numerically invertible.
pub const R_MAX: f64 = 1.0 - 1e-12;

/// Smallest admissible `r`:
/// `max((1 − (L̃ + L)⁻²)^{1/d}, 1 − (L̃⁻ + L⁻)⁻¹, (1 − n⁻²)^{1/d})`, clamped to [`R_MAX`].
///
/// `lip_tilde`/`lip_tilde_inv` are the certificate products, `lip_f`/`lip_f_inv`
/// the constants of the target map.
pub fn choose_r(lip_tilde: f64, lip_tilde_inv: f64, lip_f: f64, lip_f_inv: f64, n: usize, d: usize) -> Result<f64> {
    let s1 = lip_tilde + lip_f;
    let s2 = lip_tilde_inv + lip_f_inv;
    if !(s1 > 1.0 && s2 > 1.0) || !s1.is_finite() || !s2.is_finite() {
        return Err(Error::Param(format!("degenerate Lipschitz sums {s1} and {s2}; both must exceed 1")));
    }
    if n < 2 || d == 0 {
        return Err(Error::Param("choose_r needs n >= 2 and d >= 1".into()));
    }
    let inv_d = 1.0 / d as f64;
    let t1 = (1.0 - s1.powi(-2)).powf(inv_d);
    let t2 = 1.0 - 1.0 / s2;
    let t3 = (1.0 - (n as f64).powi(-2)).powf(inv_d);
    Ok(t1.max(t2).max(t3).min(R_MAX))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBounds {
    /// Bound on `‖F_nn − F‖²` over `K`.
    pub forward: f64,
    /// Bound on `‖F_nn⁻¹ − F⁻¹‖²` over `F(K)`.
    pub inverse: f64,
}

/// `2[(3 + L²)d + 3c_ε²]n⁻²` and `2L^d[(2(2 + L)² + 1)d + 2L⁻c_ε + 6]n⁻²`.
pub fn theoretical_error_bound(lip_f: f64, lip_f_inv: f64, n: usize, d: usize, c_eps: f64) -> ErrorBounds {
    let n2 = (n as f64).powi(-2);
    ErrorBounds { forward: c_nn(lip_f, d, c_eps) * n2, inverse: c_nn_inverse(lip_f, lip_f_inv, d, c_eps) * n2 }
}

/// `c_nn = 2[(3 + L²)d + 3c_ε²]`.
pub fn c_nn(lip_f: f64, d: usize, c_eps: f64) -> f64 {
    2.0 * ((3.0 + lip_f * lip_f) * d as f64 + 3.0 * c_eps * c_eps)
}

/// `c_nn' = 2L^d[(2(2 + L)² + 1)d + 2L⁻c_ε + 6]`.
pub fn c_nn_inverse(lip_f: f64, lip_f_inv: f64, d: usize, c_eps: f64) -> f64 {
    let df = d as f64;
    2.0 * lip_f.powi(d as i32) * ((2.0 * (2.0 + lip_f).powi(2) + 1.0) * df + 2.0 * lip_f_inv * c_eps + 6.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn choose_r_example() {
        // sums equal 10: first and third terms coincide at sqrt(0.99)
        let r = choose_r(5.0, 5.0, 5.0, 5.0, 10, 2).unwrap();
        assert!((r - 0.99f64.sqrt()).abs() < 1e-15);
        assert!((r - 0.994987).abs() < 1e-6);
    }

    #[test]
    fn choose_r_monotone_and_clamped() {
        let a = choose_r(10.0, 10.0, 1.0, 1.0, 4, 2).unwrap();
        let b = choose_r(100.0, 100.0, 1.0, 1.0, 4, 2).unwrap();
        assert!(b > a);
        let c = choose_r(1e20, 1e20, 1.0, 1.0, 4, 2).unwrap();
        assert_eq!(c, R_MAX);
        assert!(c < 1.0);
        assert!(choose_r(0.2, 0.2, 0.3, 0.3, 4, 2).is_err());
    }

    #[test]
    fn bound_examples() {
        let b = theoretical_error_bound(1.0, 1.0, 10, 2, 1.0);
        assert!((b.forward - 0.22).abs() < 1e-15);
        assert_eq!(c_nn(1.0, 2, 1.0), 22.0);
        let b2 = theoretical_error_bound(1.0, 1.0, 20, 2, 1.0);
        assert!((b.forward / 4.0 - b2.forward).abs() <= 1e-12 * b2.forward);
        assert!((b.inverse / 4.0 - b2.inverse).abs() <= 1e-12 * b2.inverse);
        // L = 1, L⁻ = 1, d = 2, c_ε = 1: 2[(2·9 + 1)·2 + 2 + 6] = 92
        assert!((c_nn_inverse(1.0, 1.0, 2, 1.0) - 92.0).abs() < 1e-12);
        // L = 2: 2·4·[(2·16 + 1)·2 + 2 + 6] = 592
        assert!((c_nn_inverse(2.0, 1.0, 2, 1.0) - 592.0).abs() < 1e-12);
    }
}
