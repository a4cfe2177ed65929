//! Dispersive water-wave solvers with POD and empirical-interpolation reduction.

pub mod bbm;
pub mod driver;
pub mod eb;
pub mod eim;
pub mod error;
pub mod harness;
pub mod numcore;
pub mod rom;
pub mod timing;

pub use error::{Error, Result};
