//! From raw trajectories to traffic tensors, plus corruption masks, metrics
//! and persistence.

pub mod construct;
pub mod grid;
pub mod ingest;
pub mod io;
pub mod mask;
pub mod metrics;

pub use construct::{build_tensor, BuildStats, TensorBuildMode, TimeBinning};
pub use grid::{grid_segment, BoundingBox, GridSpec};
pub use ingest::{load_trajectories, IngestReport, TrajectoryFormat, TrajectoryPoint};
pub use mask::{random_mask, structured_mask, MaskKind, MaskSpec, MaskTensor};
pub use metrics::{relative_error, sparsity_log};
