//! Minimal dense/recurrent neural toolkit: exact analytic gradients, Adam,
//! inverted dropout, early stopping, and a finite-difference gradient
//! checker. All arithmetic is in double precision.

pub mod activation;
pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod layer;
pub mod loss;
pub mod matrix;
pub mod network;
pub mod train;

pub use activation::Activation;
pub use adam::{Adam, AdamConfig};
pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, GradCheckReport};
pub use layer::{Dense, Gru, ModalityMap};
pub use loss::{bce_multilabel, predict_probs, LossKind, WeightedTarget};
pub use matrix::Matrix;
pub use network::{LayerSpec, Network, NetworkSpec};
pub use train::{train, TrainConfig, TrainReport, TrainSample};
