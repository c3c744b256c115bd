//! The elliptic benchmark: random KL coefficients, a finite-volume solver and
//! the paired dataset format.

pub mod dataset;
pub mod kl;
pub mod solver;

pub use dataset::{generate, PairDataset};
pub use kl::{sample_xi, Xi, KL_TERMS, XI_LEN};
pub use solver::{series_oracle, solve, Solution, SolveSpec};
