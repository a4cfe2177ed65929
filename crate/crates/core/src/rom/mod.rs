//! POD bases, reduced operators and pdROM steppers.

pub mod bbm;
pub mod eb;
mod error;
mod pod;
mod snapshots;

pub use error::{rom_error, ErrorNorm};
pub use pod::{pod_basis, pod_size_for_tol, BasisMode, PodSize, ReducedBasis};
pub use snapshots::{SnapshotMeta, SnapshotRecorder, SnapshotSet};
