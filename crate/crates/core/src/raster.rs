//! Grid data model and file I/O for depth maps and label masks.
//!
//! All grids are row-major. Row index grows downward and column index grows
//! rightward; pixel `(i, j)` covers the unit square `[i, i+1) x [j, j+1)`.

use std::collections::BTreeSet;
use std::io::Cursor;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::format_sig6;

/// Camera-to-surface distances in meters. `0.0` marks a missing reading.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthGrid {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DepthGrid {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        check_shape(rows, cols, values.len())?;
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonNumericCell {
                    row: k / cols,
                    col: k % cols,
                    token: v.to_string(),
                });
            }
            if v < 0.0 {
                return Err(Error::NegativeDepth {
                    row: k / cols,
                    col: k % cols,
                    value: v,
                });
            }
        }
        Ok(Self { rows, cols, values })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    /// Construction for values already known to satisfy the invariants.
    pub(crate) fn from_raw(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), rows * cols);
        debug_assert!(values.iter().all(|v| v.is_finite() && *v >= 0.0));
        Self { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Instance ids per pixel; `0` is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    rows: usize,
    cols: usize,
    values: Vec<u32>,
}

impl LabelGrid {
    pub fn new(rows: usize, cols: usize, values: Vec<u32>) -> Result<Self> {
        check_shape(rows, cols, values.len())?;
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.values[row * self.cols + col]
    }

    /// Distinct nonzero ids in ascending order.
    pub fn instance_ids(&self) -> Vec<u32> {
        self.values
            .iter()
            .copied()
            .filter(|&v| v != 0)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn mask_of(&self, id: u32) -> BinaryMask {
        BinaryMask {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| v == id).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    rows: usize,
    cols: usize,
    values: Vec<bool>,
}

impl BinaryMask {
    pub fn new(rows: usize, cols: usize, values: Vec<bool>) -> Result<Self> {
        check_shape(rows, cols, values.len())?;
        Ok(Self { rows, cols, values })
    }

    pub fn empty(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![false; rows * cols])
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        check_shape(rows, cols, rows * cols)?;
        let values = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.values[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.values[row * self.cols + col] = on;
    }

    pub fn popcount(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.values.iter().any(|&v| v)
    }

    /// Foreground pixels in raster order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cols = self.cols;
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(move |(k, _)| (k / cols, k % cols))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub id: u32,
    pub label: String,
    pub score: f64,
}

impl InstanceMeta {
    pub const DEFAULT_LABEL: &'static str = "object";
    pub const DEFAULT_SCORE: f64 = 1.0;

    pub fn new(id: u32, label: impl Into<String>, score: f64) -> Result<Self> {
        if id == 0 {
            return Err(Error::InvalidParameter(
                "instance id 0 is reserved for background".into(),
            ));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidParameter(format!(
                "score {score} outside [0, 1]"
            )));
        }
        Ok(Self {
            id,
            label: label.into(),
            score,
        })
    }

    pub fn with_defaults(id: u32) -> Self {
        Self {
            id,
            label: Self::DEFAULT_LABEL.to_string(),
            score: Self::DEFAULT_SCORE,
        }
    }
}

/// Pixel-to-metric calibration of a top-view camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Pixels per meter.
    pub ppm: f64,
    /// Camera to ground plane distance in meters.
    pub camera_to_ground_m: f64,
}

impl Calibration {
    pub const DEFAULT_PPM: f64 = 1.0;
    pub const DEFAULT_CAMERA_TO_GROUND_M: f64 = 2.5;

    pub fn new(ppm: f64, camera_to_ground_m: f64) -> Result<Self> {
        let cal = Self {
            ppm,
            camera_to_ground_m,
        };
        cal.validate()?;
        Ok(cal)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ppm.is_finite() && self.ppm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ppm must be > 0, got {}",
                self.ppm
            )));
        }
        if !(self.camera_to_ground_m.is_finite() && self.camera_to_ground_m > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "camera distance must be > 0, got {}",
                self.camera_to_ground_m
            )));
        }
        Ok(())
    }
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            ppm: Self::DEFAULT_PPM,
            camera_to_ground_m: Self::DEFAULT_CAMERA_TO_GROUND_M,
        }
    }
}

fn check_shape(rows: usize, cols: usize, len: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidGrid(format!(
            "dimensions must be >= 1, got {rows}x{cols}"
        )));
    }
    if rows.checked_mul(cols) != Some(len) {
        return Err(Error::InvalidGrid(format!(
            "{len} values do not fill a {rows}x{cols} grid"
        )));
    }
    Ok(())
}

/// Parses a header-less, comma-separated depth map.
pub fn read_depth_csv(bytes: &[u8]) -> Result<DepthGrid> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);

    let mut cols = None;
    let mut rows = 0usize;
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::NonNumericCell {
            row: rows,
            col: 0,
            token: e.to_string(),
        })?;
        // A lone empty field is a blank line, e.g. a trailing CRLF.
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let expected = *cols.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRows {
                row: rows,
                expected,
                found: record.len(),
            });
        }
        for (col, token) in record.iter().enumerate() {
            let value: f64 = token.parse().map_err(|_| Error::NonNumericCell {
                row: rows,
                col,
                token: token.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonNumericCell {
                    row: rows,
                    col,
                    token: token.to_string(),
                });
            }
            if value < 0.0 {
                return Err(Error::NegativeDepth {
                    row: rows,
                    col,
                    value,
                });
            }
            values.push(value);
        }
        rows += 1;
    }
    match cols {
        None => Err(Error::EmptyFile),
        Some(cols) => Ok(DepthGrid::from_raw(rows, cols, values)),
    }
}

/// Serializes a depth grid with six significant digits and LF line endings.
pub fn write_depth_csv(grid: &DepthGrid) -> Vec<u8> {
    let mut out = String::with_capacity(grid.values.len() * 8);
    for row in grid.values.chunks(grid.cols) {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format_sig6(*v));
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// Reads an 8-bit grayscale PNG whose pixel values are instance ids.
pub fn read_label_png(bytes: &[u8]) -> Result<LabelGrid> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Decode(e.to_string()))?;
    let (color, depth) = reader.output_color_type();
    if color != png::ColorType::Grayscale {
        return Err(Error::UnsupportedPngFormat(format!(
            "expected single-channel grayscale, got {color:?}"
        )));
    }
    if depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedPngFormat(format!(
            "expected 8-bit samples, got {depth:?}"
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Decode("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Decode(e.to_string()))?;
    let (rows, cols) = (info.height as usize, info.width as usize);
    let values = buf[..info.buffer_size()]
        .chunks(info.line_size)
        .take(rows)
        .flat_map(|line| line[..cols].iter().map(|&v| u32::from(v)))
        .collect();
    LabelGrid::new(rows, cols, values)
}

/// Writes a label grid as an 8-bit grayscale PNG. Ids above 255 are rejected.
pub fn write_label_png(labels: &LabelGrid) -> Result<Vec<u8>> {
    let data = labels
        .values
        .iter()
        .map(|&v| {
            u8::try_from(v).map_err(|_| {
                Error::InvalidParameter(format!("instance id {v} does not fit in an 8-bit PNG"))
            })
        })
        .collect::<Result<Vec<u8>>>()?;
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, labels.cols as u32, labels.rows as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Decode(e.to_string()))?;
        writer
            .write_image_data(&data)
            .map_err(|e| Error::Decode(e.to_string()))?;
    }
    Ok(out)
}

/// Per-instance metadata accompanying a label PNG.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub instances: Vec<SidecarEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarEntry {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl Sidecar {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let sidecar: Sidecar =
            serde_json::from_slice(bytes).map_err(|e| Error::Sidecar(e.to_string()))?;
        let mut seen = BTreeSet::new();
        for entry in &sidecar.instances {
            if entry.id == 0 {
                return Err(Error::Sidecar(
                    "instance id 0 is reserved for background".into(),
                ));
            }
            if !seen.insert(entry.id) {
                return Err(Error::Sidecar(format!(
                    "duplicate instance id {}",
                    entry.id
                )));
            }
            if let Some(score) = entry.score {
                if !(0.0..=1.0).contains(&score) {
                    return Err(Error::Sidecar(format!(
                        "score {score} of instance {} outside [0, 1]",
                        entry.id
                    )));
                }
            }
        }
        Ok(sidecar)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sidecar serializes")
    }
}
