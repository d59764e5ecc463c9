#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use morphocv_core::raster::{write_depth_csv, write_label_png, DepthGrid, LabelGrid};

/// Depth map over a 2.5 m ground with square plateaus `(row, col, side)` at 1.5 m.
pub fn plateau_depth(rows: usize, cols: usize, plateaus: &[(usize, usize, usize)]) -> DepthGrid {
    let values = (0..rows * cols)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            let inside = plateaus
                .iter()
                .any(|&(r0, c0, k)| (r0..r0 + k).contains(&r) && (c0..c0 + k).contains(&c));
            if inside {
                1.5
            } else {
                2.5
            }
        })
        .collect();
    DepthGrid::new(rows, cols, values).unwrap()
}

/// The reference scene: one 10x10 plateau on a 20x20 grid.
pub fn plateau_csv() -> Vec<u8> {
    write_depth_csv(&plateau_depth(20, 20, &[(5, 5, 10)]))
}

/// Label grid with rectangles `(id, row, col, height, width)`.
pub fn label_grid(
    rows: usize,
    cols: usize,
    rects: &[(u32, usize, usize, usize, usize)],
) -> LabelGrid {
    let mut values = vec![0u32; rows * cols];
    for &(id, r0, c0, h, w) in rects {
        for r in r0..r0 + h {
            for c in c0..c0 + w {
                values[r * cols + c] = id;
            }
        }
    }
    LabelGrid::new(rows, cols, values).unwrap()
}

pub fn label_png(rows: usize, cols: usize, rects: &[(u32, usize, usize, usize, usize)]) -> Vec<u8> {
    write_label_png(&label_grid(rows, cols, rects)).unwrap()
}

pub fn morphocv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morphocv"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub const BOUNDARY: &str = "morphocv-test-boundary";

/// `multipart/form-data` body with `(name, filename, bytes)` parts; text
/// fields have no filename.
pub fn multipart_body(parts: &[(&str, Option<&str>, &[u8])]) -> Vec<u8> {
    let mut body = Vec::new();
    for (name, filename, bytes) in parts {
        body.extend_from_slice(format!("--{BOUNDARY}\r\n").as_bytes());
        match filename {
            Some(f) => body.extend_from_slice(
                format!(
                    "Content-Disposition: form-data; name=\"{name}\"; filename=\"{f}\"\r\n\
                     Content-Type: application/octet-stream\r\n\r\n"
                )
                .as_bytes(),
            ),
            None => body.extend_from_slice(
                format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n").as_bytes(),
            ),
        }
        body.extend_from_slice(bytes);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

pub fn multipart_content_type() -> String {
    format!("multipart/form-data; boundary={BOUNDARY}")
}
