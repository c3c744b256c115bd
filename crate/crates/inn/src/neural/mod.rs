//! Trainable affine-coupling INN and a fully connected baseline.

pub mod adam;
pub mod checkpoint;
pub mod coupling;
pub mod fnn;
pub mod mlp;
pub mod train;

pub use adam::{Adam, AdamConfig};
pub use coupling::{Arch, CouplingBlock, CouplingInn};
pub use train::{loss, loss_and_grad, relative_errors, train, LossWeights, PairedSet, Record, TrainConfig, TrainOutcome};
