//! Explicit construction of `F_nn` from grid samples of a bi-Lipschitz map.

pub mod bounds;
pub mod build;
pub mod grid;
pub mod rate;
pub mod synthetic;

pub use bounds::{choose_r, theoretical_error_bound, ErrorBounds};
pub use build::{construct_f_nn, Certificate, ConstructedMap, StageBound};
pub use grid::GridDataset;
pub use rate::{empirical_inverse_l2_error, empirical_l2_error, rate_study, RateStudy};
pub use synthetic::{RandomBiLipschitz, SineShear, TargetMap};
