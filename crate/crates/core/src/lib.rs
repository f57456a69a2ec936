//! Slice-to-volume registration and standard plane guidance.
//!
//! A 2D slice is located inside a 3D reference volume as a pose (unit
//! quaternion plus translation in normalized coordinates), and the rotation
//! and translation that carry it onto a standard plane are reported.

pub mod alignment;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod io;
pub mod optim;
pub mod preprocess;
pub mod registration;
pub mod service;
pub mod similarity;
pub mod volume;

pub use error::{Error, Result};
