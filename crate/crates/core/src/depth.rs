//! Depth-map volumetry for a single top-view instance.
//!
//! The pipeline order is fixed: mask the depth map, mean-fill every zero
//! cell, smooth with a truncated Gaussian, convert to heights above ground,
//! then aggregate over the mask.

use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::error::{Error, Result};
use crate::features::{FeatureRecord, Features3D};
use crate::geometry::{centroid, features_2d};
use crate::numfmt::round_sig6;
use crate::raster::{BinaryMask, Calibration, DepthGrid, InstanceMeta};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    pub cal: Calibration,
    /// Gaussian standard deviation in pixels; `0` disables smoothing.
    pub sigma: f64,
}

impl PipelineParams {
    pub fn new(cal: Calibration, sigma: f64) -> Result<Self> {
        let params = Self { cal, sigma };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        self.cal.validate()?;
        if self.sigma.is_nan() || self.sigma < 0.0 {
            return Err(Error::NegativeSigma(self.sigma));
        }
        if !self.sigma.is_finite() {
            return Err(Error::InvalidParameter("sigma must be finite".into()));
        }
        Ok(())
    }
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            cal: Calibration::default(),
            sigma: 0.0,
        }
    }
}

/// Elementwise product of depth and mask.
pub fn clean_roi(depth: &DepthGrid, mask: &BinaryMask) -> Result<DepthGrid> {
    if depth.dims() != mask.dims() {
        return Err(Error::dims(depth.dims(), mask.dims()));
    }
    let values = depth
        .values()
        .iter()
        .zip(mask.values())
        .map(|(&d, &m)| if m { d } else { 0.0 })
        .collect();
    Ok(DepthGrid::from_raw(depth.rows(), depth.cols(), values))
}

/// Replaces every zero cell with the mean of the nonzero cells.
pub fn fill_zeros_with_mean(cleaned: &DepthGrid) -> Result<DepthGrid> {
    let (sum, count) = cleaned
        .values()
        .iter()
        .filter(|&&v| v != 0.0)
        .fold((0.0, 0usize), |(s, n), &v| (s + v, n + 1));
    if count == 0 {
        return Err(Error::EmptyRoi);
    }
    let mean = sum / count as f64;
    let values = cleaned
        .values()
        .iter()
        .map(|&v| if v == 0.0 { mean } else { v })
        .collect();
    Ok(DepthGrid::from_raw(cleaned.rows(), cleaned.cols(), values))
}

/// Normalized 1D Gaussian weights for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / denom).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Mirror index without edge repetition: `... c b | a b c ...`.
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Separable Gaussian smoothing with reflect borders. `sigma = 0` returns
/// the input unchanged.
pub fn gaussian_filter(grid: &DepthGrid, sigma: f64) -> Result<DepthGrid> {
    if sigma.is_nan() || sigma < 0.0 {
        return Err(Error::NegativeSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(grid.clone());
    }
    let values = smooth_values(grid.rows(), grid.cols(), grid.values(), sigma);
    Ok(DepthGrid::from_raw(grid.rows(), grid.cols(), values))
}

/// Row pass then column pass, each summing taps in ascending offset order.
fn smooth_values(rows: usize, cols: usize, values: &[f64], sigma: f64) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;

    let mut horizontal = vec![0.0; rows * cols];
    for r in 0..rows {
        let src = &values[r * cols..(r + 1) * cols];
        let dst = &mut horizontal[r * cols..(r + 1) * cols];
        for (c, out) in dst.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (t, w) in kernel.iter().enumerate() {
                let k = c as isize + t as isize - radius;
                acc += w * src[reflect_index(k, cols)];
            }
            *out = acc;
        }
    }

    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for (t, w) in kernel.iter().enumerate() {
                let k = r as isize + t as isize - radius;
                acc += w * horizontal[reflect_index(k, rows) * cols + c];
            }
            out[r * cols + c] = acc;
        }
    }
    out
}

/// Heights above the ground plane in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightField {
    rows: usize,
    cols: usize,
    heights: Vec<f64>,
}

impl HeightField {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.heights[row * self.cols + col]
    }
}

/// `max(0, camera_to_ground - depth)` per cell.
pub fn height_field(filtered: &DepthGrid, cal: &Calibration) -> HeightField {
    let ground = cal.camera_to_ground_m;
    HeightField {
        rows: filtered.rows(),
        cols: filtered.cols(),
        heights: filtered
            .values()
            .iter()
            .map(|&d| (ground - d).max(0.0))
            .collect(),
    }
}

/// Runs clean, fill, smooth and height conversion.
pub fn process_heights(
    depth: &DepthGrid,
    mask: &BinaryMask,
    params: &PipelineParams,
) -> Result<HeightField> {
    params.validate()?;
    if depth.dims() != mask.dims() {
        return Err(Error::dims(depth.dims(), mask.dims()));
    }
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let cleaned = clean_roi(depth, mask)?;
    let filled = fill_zeros_with_mean(&cleaned)?;
    let filtered = gaussian_filter(&filled, params.sigma)?;
    Ok(height_field(&filtered, &params.cal))
}

/// Height and volume features aggregated over the mask pixels.
pub fn aggregate_3d(heights: &HeightField, mask: &BinaryMask, ppm: f64) -> Result<Features3D> {
    let center = centroid(mask)?;
    let (sum, count) = mask.pixels().fold((0.0, 0usize), |(s, n), (r, c)| {
        (s + heights.get(r, c), n + 1)
    });
    let row = (center.row.floor() as usize).min(heights.rows - 1);
    let col = (center.col.floor() as usize).min(heights.cols - 1);
    Ok(Features3D {
        height_average_m: sum / count as f64,
        height_centroid_m: heights.get(row, col),
        volume: sum / (ppm * ppm),
    })
}

/// Full 2D + 3D feature record for one instance.
pub fn features_3d(
    depth: &DepthGrid,
    mask: &BinaryMask,
    meta: &InstanceMeta,
    params: &PipelineParams,
) -> Result<FeatureRecord> {
    let heights = process_heights(depth, mask, params)?;
    let two_d = features_2d(mask, &params.cal)?;
    let three_d = aggregate_3d(&heights, mask, params.cal.ppm)?;
    Ok(FeatureRecord::new(meta.clone(), two_d, Some(three_d)))
}

pub const DEFAULT_SURFACE_MAX_DIM: usize = 256;

/// Downsampled height field for interactive 3D display.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    pub rows: usize,
    pub cols: usize,
    pub stride: usize,
    pub heights: Vec<Vec<f64>>,
}

impl SurfaceGrid {
    pub const UNIT: &'static str = "m";

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("surface serializes")
    }
}

impl Serialize for SurfaceGrid {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rounded: Vec<Vec<f64>> = self
            .heights
            .iter()
            .map(|row| row.iter().map(|&h| round_sig6(h)).collect())
            .collect();
        let mut s = serializer.serialize_struct("SurfaceGrid", 5)?;
        s.serialize_field("rows", &self.rows)?;
        s.serialize_field("cols", &self.cols)?;
        s.serialize_field("stride", &self.stride)?;
        s.serialize_field("unit", Self::UNIT)?;
        s.serialize_field("heights", &rounded)?;
        s.end()
    }
}

pub fn surface_from_heights(heights: &HeightField, max_dim: usize) -> Result<SurfaceGrid> {
    if max_dim == 0 {
        return Err(Error::InvalidParameter("max_dim must be >= 1".into()));
    }
    let stride = heights.rows.max(heights.cols).div_ceil(max_dim);
    let grid: Vec<Vec<f64>> = (0..heights.rows)
        .step_by(stride)
        .map(|r| {
            (0..heights.cols)
                .step_by(stride)
                .map(|c| heights.get(r, c))
                .collect()
        })
        .collect();
    Ok(SurfaceGrid {
        rows: grid.len(),
        cols: grid.first().map_or(0, Vec::len),
        stride,
        heights: grid,
    })
}

pub fn surface_export(
    depth: &DepthGrid,
    mask: &BinaryMask,
    params: &PipelineParams,
    max_dim: usize,
) -> Result<SurfaceGrid> {
    surface_from_heights(&process_heights(depth, mask, params)?, max_dim)
}
