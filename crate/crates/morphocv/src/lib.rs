//! Orchestration for top-view animal morphometry: the 2D and 3D analysis
//! workflows, dataset evaluation, file outputs and the HTTP service.
//!
//! Numerical work lives in `morphocv_core`; this crate wires inputs to it.

pub mod error;
pub mod files;
pub mod pipeline;
pub mod service;

pub use error::{AppError, Result};
