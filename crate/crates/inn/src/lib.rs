//! Invertible networks for bi-Lipschitz maps.
//!
//! The crate has two halves. The constructive half ([`flows`], [`constructor`],
//! [`lifted`]) builds coupling-type invertible maps in closed form that
//! interpolate grid data and carry a Lipschitz certificate. The learning half
//! ([`pca`], [`neural`], [`pde`]) generates an elliptic-PDE dataset, reduces
//! both sides with non-centered PCA and trains an affine-coupling INN on the
//! reduced coordinates in both directions at once.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blob;
pub mod constructor;
pub mod error;
pub mod flows;
pub mod lifted;
pub mod linalg;
pub mod lipschitz;
pub mod neural;
pub mod pca;
pub mod pde;
pub mod pipeline;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
