//! Content-based artwork recommendation from visual features.
//!
//! The crate covers the whole offline pipeline:
//!
//! - [`imaging`]: decoding and per-pixel color-space conversion.
//! - [`evf`]: explicit, human-interpretable visual features (brightness,
//!   saturation, sharpness, colorfulness, naturalness, RGB contrast,
//!   entropy) and local binary pattern histograms.
//! - [`store`]: per-item feature matrices, including externally produced
//!   deep embeddings, with a bit-exact binary container.
//! - [`recsys`]: similarity-based scoring of inventory against a user's
//!   purchase history.
//! - [`eval`]: time-forward replay of purchase logs and top-k ranking metrics.
//! - [`correlation`]: relating embedding dimensions to explicit features.
//! - [`layout`]: t-SNE projection snapped to a regular grid by linear assignment.
//! - [`synth`]: seeded synthetic datasets with the same shape as a real
//!   gallery's catalog, purchase log and embeddings.

pub mod correlation;
pub mod error;
pub mod eval;
pub mod evf;
pub mod imaging;
pub mod layout;
pub mod recsys;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
