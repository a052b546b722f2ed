//! The three patch-classification networks, their parameter sets, and
//! batched execution (inference, backpropagation, and training steps).

mod builders;
mod exec;
mod graph;
mod params;

pub use builders::{build_dccnn, build_hresnet, build_wcrn};
pub use exec::{backward, forward, forward_batch, predict_chunked, train_step, ForwardPass};
pub use graph::{Architecture, LayerKind, NetworkGraph, Node, ParamSpec};
pub use params::ParameterSet;

pub(crate) use params::Reader;
