#![allow(dead_code)]

use morphocv_core::geometry::Point;
use morphocv_core::raster::{BinaryMask, DepthGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Pixels whose centers fall inside a rectangle of the given long side,
/// short side and long-side angle (degrees from +col toward +row).
pub fn rasterize_rect(
    rows: usize,
    cols: usize,
    center: Point,
    length: f64,
    width: f64,
    angle_deg: f64,
) -> BinaryMask {
    let (s, c) = angle_deg.to_radians().sin_cos();
    BinaryMask::from_fn(rows, cols, |r, col| {
        let dr = r as f64 + 0.5 - center.row;
        let dc = col as f64 + 0.5 - center.col;
        let along = dc * c + dr * s;
        let across = -dc * s + dr * c;
        along.abs() <= length / 2.0 && across.abs() <= width / 2.0
    })
    .unwrap()
}

/// Every corner of every foreground pixel.
pub fn pixel_corners(mask: &BinaryMask) -> Vec<Point> {
    mask.pixels()
        .flat_map(|(r, c)| {
            let (r, c) = (r as f64, c as f64);
            [
                Point::new(r, c),
                Point::new(r + 1.0, c),
                Point::new(r, c + 1.0),
                Point::new(r + 1.0, c + 1.0),
            ]
        })
        .collect()
}

/// Smallest enclosing-rectangle area over directions 0.0, 0.1, ..., 179.9
/// degrees, by projecting every pixel corner.
pub fn angle_sweep_min_area(mask: &BinaryMask) -> f64 {
    let pts = pixel_corners(mask);
    (0..1800)
        .map(|step| {
            let (s, c) = (step as f64 * 0.1).to_radians().sin_cos();
            let (mut u0, mut u1, mut n0, mut n1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
            for p in &pts {
                let u = p.col * c + p.row * s;
                let n = -p.col * s + p.row * c;
                u0 = u0.min(u);
                u1 = u1.max(u);
                n0 = n0.min(n);
                n1 = n1.max(n);
            }
            (u1 - u0) * (n1 - n0)
        })
        .fold(f64::MAX, f64::min)
}

/// Random blob: union of a few random discs, kept to its largest shape.
pub fn random_blob(rng: &mut ChaCha8Rng, size: usize) -> BinaryMask {
    let discs: Vec<(f64, f64, f64)> = (0..rng.random_range(1..5))
        .map(|_| {
            (
                rng.random_range(10.0..size as f64 - 10.0),
                rng.random_range(10.0..size as f64 - 10.0),
                rng.random_range(2.0..9.0),
            )
        })
        .collect();
    BinaryMask::from_fn(size, size, |r, c| {
        discs.iter().any(|&(cr, cc, rad)| {
            let (dr, dc) = (r as f64 + 0.5 - cr, c as f64 + 0.5 - cc);
            dr * dr + dc * dc <= rad * rad
        })
    })
    .unwrap()
}

/// `k x k` plateau at depth `1.5` over a `2.5` m ground, top-left at `(r0, c0)`.
pub fn plateau_scene(
    rows: usize,
    cols: usize,
    r0: usize,
    c0: usize,
    k: usize,
) -> (DepthGrid, BinaryMask) {
    let inside = move |r: usize, c: usize| (r0..r0 + k).contains(&r) && (c0..c0 + k).contains(&c);
    let values = (0..rows * cols)
        .map(|i| if inside(i / cols, i % cols) { 1.5 } else { 2.5 })
        .collect();
    (
        DepthGrid::new(rows, cols, values).unwrap(),
        BinaryMask::from_fn(rows, cols, inside).unwrap(),
    )
}

/// Angular distance between two undirected directions, in degrees.
pub fn angle_diff_mod_180(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}
