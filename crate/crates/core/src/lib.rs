//! Residual CNN training and translation-invariance analysis for SAR target
//! chips.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: tensors and hand-wired layer primitives (forward and backward)
//! - [`model`]: the 18-layer residual classifier, checkpoints
//! - [`data`]: chip formats (MSTAR Phoenix, portable `SARC`), datasets, crops
//! - [`synth`]: a deterministic synthetic SAR-like chip generator
//! - [`train`]: the center-crop and random-crop training pipelines
//! - [`eval`]: confusion matrices, accuracy-translation maps and their exports
//!
//! The `satm` binary wraps all of it behind subcommands.

pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod rng;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use nn::tensor::{Scalar, Tensor};
pub use rng::Rng;
