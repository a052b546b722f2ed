//! Active ensemble deep learning for patch classification.
//!
//! Small convolutional networks are trained on labeled patches; parameter
//! snapshots captured near convergence form a committee whose averaged class
//! probabilities rank unlabeled candidates for labeling.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). Experiments
//! run in double precision; the `*64` aliases below name those instantiations.

pub mod active;
pub mod data;
pub mod engine;
pub mod error;
pub mod harness;
pub mod scalar;
pub mod zoo;

pub use engine::Tensor;
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type ParameterSet64 = zoo::ParameterSet<f64>;
pub type PatchDataset64 = data::PatchDataset<f64>;
pub type ProbabilityMatrix64 = active::ProbabilityMatrix<f64>;
pub type SnapshotCommittee64 = active::SnapshotCommittee<f64>;
