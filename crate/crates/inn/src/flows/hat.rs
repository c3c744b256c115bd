//! ReLU building blocks shared by all localized layers.

#[inline]
pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Right-continuous ReLU derivative (`σ'(0) = 1`).
#[inline]
pub fn relu_deriv(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Hat function `ℓ₀`: zero outside `[0, 2]`, peak `1/2` at `x = 1`.
#[inline]
pub fn hat(x: f64) -> f64 {
    if x <= 0.0 || x >= 2.0 {
        0.0
    } else if x <= 1.0 {
        0.5 * x
    } else {
        1.0 - 0.5 * x
    }
}

/// `ℓ₀` through its two-layer ReLU form `σ(1 − σ(x/2)) − σ(1 − σ(x))`.
#[inline]
pub fn hat_relu(x: f64) -> f64 {
    ell1(x) + ell2(x)
}

#[inline]
pub fn hat_deriv(x: f64) -> f64 {
    if !(0.0..2.0).contains(&x) {
        0.0
    } else if x < 1.0 {
        0.5
    } else {
        -0.5
    }
}

/// First half of the hat split: `ℓ₁(u) = σ(1 − σ(u/2))`.
#[inline]
pub fn ell1(u: f64) -> f64 {
    relu(1.0 - relu(0.5 * u))
}

/// Second half of the hat split: `ℓ₂(u) = −σ(1 − σ(u))`.
#[inline]
pub fn ell2(u: f64) -> f64 {
    -relu(1.0 - relu(u))
}

#[inline]
pub fn ell1_deriv(u: f64) -> f64 {
    if (0.0..2.0).contains(&u) {
        -0.5
    } else {
        0.0
    }
}

#[inline]
pub fn ell2_deriv(u: f64) -> f64 {
    if (0.0..1.0).contains(&u) {
        1.0
    } else {
        0.0
    }
}

/// Localized bump `2ℓ₀((t − c)/w + 1)`: equals 1 at `t = c`, vanishes for `|t − c| ≥ w`.
#[inline]
pub fn bump(t: f64, center: f64, half_width: f64) -> f64 {
    2.0 * hat((t - center) / half_width + 1.0)
}

#[inline]
pub fn bump_deriv(t: f64, center: f64, half_width: f64) -> f64 {
    2.0 * hat_deriv((t - center) / half_width + 1.0) / half_width
}
