//! Morphometry and volumetry for top-view animal images.
//!
//! * [`raster`]: grids, depth CSV and label PNG I/O.
//! * [`geometry`]: components, hulls, minimum-area rotated boxes, 2D features.
//! * [`depth`]: mask, mean-fill, Gaussian smoothing, heights and volume.
//! * [`segmentation`]: external label masks and a height-threshold segmenter.
//! * [`evaluation`]: mask IoU matching and average precision.
//! * [`render`]: heatmaps, instance overlays and PNG encoding.
//! * [`features`]: feature records and the feature CSV.

pub mod depth;
pub mod error;
pub mod evaluation;
pub mod features;
mod font;
pub mod geometry;
pub mod numfmt;
pub mod raster;
pub mod render;
pub mod segmentation;

pub use error::{Error, Result};
