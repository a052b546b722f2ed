//! Patch datasets: the binary file format, a synthetic PolSAR-like
//! generator, mirror augmentation, pool splits, and channel normalization.

mod augment;
mod dataset;
mod normalize;
mod split;
mod synth;

pub use augment::{augment_mirror, mirror, Mirror};
pub use dataset::{read_header, DatasetHeader, PatchDataset, Split};
pub use normalize::{normalize_channels, ChannelStats};
pub use split::seed_split;
pub use synth::{generate_synthetic, ClassTexture, SyntheticSpec};
