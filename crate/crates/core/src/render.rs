//! Heatmaps, instance overlays and PNG encoding.

use std::io::Cursor;

use crate::error::{Error, Result};
use crate::font::{glyph, GLYPH_HEIGHT, GLYPH_WIDTH};
use crate::geometry::{Point, RotatedBox};
use crate::raster::DepthGrid;
use crate::segmentation::InstanceSet;

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    rows: usize,
    cols: usize,
    pixels: Vec<Rgb>,
}

impl RgbImage {
    pub fn new(rows: usize, cols: usize, pixels: Vec<Rgb>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows.checked_mul(cols) != Some(pixels.len()) {
            return Err(Error::InvalidGrid(format!(
                "{} pixels do not fill a {rows}x{cols} image",
                pixels.len()
            )));
        }
        Ok(Self { rows, cols, pixels })
    }

    pub fn filled(rows: usize, cols: usize, color: Rgb) -> Result<Self> {
        Self::new(rows, cols, vec![color; rows * cols])
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

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> Rgb {
        self.pixels[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, color: Rgb) {
        self.pixels[row * self.cols + col] = color;
    }

    fn set_signed(&mut self, row: isize, col: isize, color: Rgb) {
        if row >= 0 && col >= 0 && (row as usize) < self.rows && (col as usize) < self.cols {
            self.set(row as usize, col as usize, color);
        }
    }
}

/// `round(255 * x)`, half away from zero.
fn channel(x: f64) -> u8 {
    (255.0 * x.clamp(0.0, 1.0)).round() as u8
}

/// Piecewise-linear jet-like colormap over `v` in `[0, 1]`.
pub fn colormap(v: f64) -> Rgb {
    let band = |center: f64| (1.5 - (4.0 * v - center).abs()).clamp(0.0, 1.0);
    [channel(band(3.0)), channel(band(2.0)), channel(band(1.0))]
}

/// Normalizes depth over the nonzero cells and maps it through [`colormap`].
/// Missing cells render at `v = 1`; a flat map renders at `v = 0`.
pub fn depth_to_heatmap(depth: &DepthGrid) -> RgbImage {
    let (lo, hi) = depth
        .values()
        .iter()
        .filter(|&&z| z != 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &z| {
            (lo.min(z), hi.max(z))
        });
    // Also true when no cell is nonzero (lo = +inf, hi = -inf).
    let flat = hi <= lo;
    let pixels = depth
        .values()
        .iter()
        .map(|&z| {
            let v = if flat {
                0.0
            } else if z == 0.0 {
                1.0
            } else {
                (z - lo) / (hi - lo)
            };
            colormap(v)
        })
        .collect();
    RgbImage {
        rows: depth.rows(),
        cols: depth.cols(),
        pixels,
    }
}

/// Fully saturated HSV color at `hue_deg`.
pub fn hue_to_rgb(hue_deg: f64) -> Rgb {
    let h = hue_deg.rem_euclid(360.0) / 60.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [channel(r), channel(g), channel(b)]
}

pub const GOLDEN_ANGLE_DEG: f64 = 137.508;

pub fn instance_hue(index: usize) -> f64 {
    (index as f64 * GOLDEN_ANGLE_DEG) % 360.0
}

pub fn instance_color(index: usize) -> Rgb {
    hue_to_rgb(instance_hue(index))
}

/// 50 % blend, rounding half away from zero.
pub fn blend_half(base: Rgb, color: Rgb) -> Rgb {
    let mix = |a: u8, b: u8| (u16::from(a) + u16::from(b)).div_ceil(2) as u8;
    [
        mix(base[0], color[0]),
        mix(base[1], color[1]),
        mix(base[2], color[2]),
    ]
}

const EDGE_HALF_WIDTH: f64 = 1.0;

fn distance_to_segment(p: Point, a: Point, b: Point) -> f64 {
    let (dr, dc) = (b.row - a.row, b.col - a.col);
    let len2 = dr * dr + dc * dc;
    let t = if len2 > 0.0 {
        (((p.row - a.row) * dr + (p.col - a.col) * dc) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (er, ec) = (a.row + t * dr - p.row, a.col + t * dc - p.col);
    (er * er + ec * ec).sqrt()
}

/// Paints pixels whose centers lie within one pixel of the segment.
fn draw_segment(img: &mut RgbImage, a: Point, b: Point, color: Rgb) {
    let r0 = (a.row.min(b.row) - 2.0).floor().max(0.0) as usize;
    let r1 = ((a.row.max(b.row) + 2.0).ceil().max(0.0) as usize).min(img.rows);
    let c0 = (a.col.min(b.col) - 2.0).floor().max(0.0) as usize;
    let c1 = ((a.col.max(b.col) + 2.0).ceil().max(0.0) as usize).min(img.cols);
    for r in r0..r1 {
        for c in c0..c1 {
            let center = Point::new(r as f64 + 0.5, c as f64 + 0.5);
            if distance_to_segment(center, a, b) <= EDGE_HALF_WIDTH {
                img.set(r, c, color);
            }
        }
    }
}

pub fn draw_box(img: &mut RgbImage, rect: &RotatedBox, color: Rgb) {
    for k in 0..4 {
        draw_segment(img, rect.corners[k], rect.corners[(k + 1) % 4], color);
    }
}

/// Draws `text` with its top-left glyph cell at `(top, left)` over a black
/// backing box, clipped to the image.
pub fn draw_text(img: &mut RgbImage, text: &str, top: isize, left: isize, color: Rgb) {
    let advance = (GLYPH_WIDTH + 1) as isize;
    let n = text.chars().count() as isize;
    for r in top - 1..top + GLYPH_HEIGHT as isize + 1 {
        for c in left - 1..left + n * advance {
            img.set_signed(r, c, [0, 0, 0]);
        }
    }
    for (k, ch) in text.chars().enumerate() {
        let x0 = left + k as isize * advance;
        for (dx, column) in glyph(ch).iter().enumerate() {
            for dy in 0..GLYPH_HEIGHT {
                if column >> dy & 1 == 1 {
                    img.set_signed(top + dy as isize, x0 + dx as isize, color);
                }
            }
        }
    }
}

/// Text block height including its backing margin.
const LABEL_HEIGHT: f64 = (GLYPH_HEIGHT + 2) as f64;

/// Blends each instance mask in its color, outlines its box and writes
/// `"label score"` above the box's top-most corner. `boxes` is either empty
/// or aligned with `instances.metas()`.
pub fn render_overlay(
    base: &RgbImage,
    instances: &InstanceSet,
    boxes: &[RotatedBox],
) -> Result<RgbImage> {
    if base.dims() != instances.dims() {
        return Err(Error::dims(base.dims(), instances.dims()));
    }
    if !boxes.is_empty() && boxes.len() != instances.len() {
        return Err(Error::InvalidParameter(format!(
            "{} boxes for {} instances",
            boxes.len(),
            instances.len()
        )));
    }
    let mut out = base.clone();
    let colors: Vec<Rgb> = (0..instances.len()).map(instance_color).collect();
    let index_of = |id: u32| instances.metas().binary_search_by_key(&id, |m| m.id).ok();

    for (k, &id) in instances.labels().values().iter().enumerate() {
        if id == 0 {
            continue;
        }
        if let Some(i) = index_of(id) {
            out.pixels[k] = blend_half(out.pixels[k], colors[i]);
        }
    }
    for (i, rect) in boxes.iter().enumerate() {
        draw_box(&mut out, rect, colors[i]);
    }
    for (i, rect) in boxes.iter().enumerate() {
        let meta = &instances.metas()[i];
        let top_corner = rect
            .corners
            .iter()
            .copied()
            .min_by(|a, b| a.row.total_cmp(&b.row).then(a.col.total_cmp(&b.col)))
            .expect("four corners");
        let top = (top_corner.row - EDGE_HALF_WIDTH - LABEL_HEIGHT)
            .floor()
            .max(1.0) as isize;
        let left = top_corner.col.floor().max(1.0) as isize;
        draw_text(
            &mut out,
            &format!("{} {:.3}", meta.label, meta.score),
            top,
            left,
            colors[i],
        );
    }
    Ok(out)
}

/// Encodes an 8-bit RGB, non-interlaced PNG.
pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, img.cols as u32, img.rows as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().expect("in-memory PNG header");
        writer
            .write_image_data(img.pixels.as_flattened())
            .expect("in-memory PNG data");
    }
    out
}

/// Decodes any 8- or 16-bit grayscale / RGB PNG, with or without alpha, to
/// RGB. Alpha is dropped; palettes are expanded; 16-bit samples are
/// truncated to 8 bits.
pub fn decode_png(bytes: &[u8]) -> Result<RgbImage> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Decode(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Decode("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Decode(e.to_string()))?;
    let channels = info.color_type.samples();
    let (rows, cols) = (info.height as usize, info.width as usize);
    let mut pixels = Vec::with_capacity(rows * cols);
    for line in buf[..info.buffer_size()].chunks(info.line_size).take(rows) {
        for px in line[..cols * channels].chunks(channels) {
            pixels.push(match channels {
                1 | 2 => [px[0], px[0], px[0]],
                _ => [px[0], px[1], px[2]],
            });
        }
    }
    RgbImage::new(rows, cols, pixels)
}
