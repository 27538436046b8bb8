//! Urban- and time-aware CP completion of spatiotemporal traffic tensors.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense third-order tensor algebra (products, unfoldings,
//!   CP reconstruction, pseudo-inverse).
//! - [`urban`]: POI diversity features per region and the cosine urban
//!   similarity matrix.
//! - [`temporal`]: sample entropy, Lomb-Scargle period detection and the
//!   period-offset Toeplitz temporal matrix.
//! - [`solver`]: the regularized CP completion objective and its alternating
//!   least squares solver, plus the plain regularized ALS baseline.
//! - [`pipeline`]: trajectory ingestion, grid segmentation, tensor
//!   construction, corruption masks, metrics and file formats.
//! - [`cli`]: the batch front end behind the `stcomplete` binary.

pub mod cli;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod solver;
pub mod synthetic;
pub mod temporal;
pub mod tensor;
pub mod urban;

pub use error::{Error, Result};
pub use tensor::{FactorSet, Matrix, Mode, Tensor3, Vector};
