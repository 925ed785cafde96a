//! Training of classifiers on label-noisy data via additive parameter
//! decomposition.
//!
//! The model parameters `w` are split into two same-shaped summands,
//! `w = sigma + gamma`, trained jointly through their sum but under
//! opposite epoch-indexed constraints: sigma's per-epoch movement is
//! penalized more as training proceeds, gamma's magnitude is penalized
//! less. Only `sigma` is used for prediction. The crate also ships the
//! surrounding apparatus: an MLP with analytic gradients, four simulated
//! label-noise generators with auditing, synthetic datasets plus an IDX
//! reader, and a deterministic training harness with early stopping on a
//! noisy validation split.

pub mod data;
pub mod decomp;
pub mod error;
pub mod mlp;
pub mod noise;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use rng::SeededRng;
pub use tensor::Tensor;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
