//! Mask geometry: connected components, convex hull, minimum-area rotated
//! rectangle and the 2D morphometric feature set.
//!
//! Geometry is measured on pixel corners, so a solid `R x C` block spans
//! exactly `R` rows and `C` columns. Hulls are counterclockwise in the
//! `(col, row)` plane.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Calibration};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub row: f64,
    pub col: f64,
}

impl Point {
    pub const fn new(row: f64, col: f64) -> Self {
        Self { row, col }
    }

    fn sub(self, other: Point) -> Point {
        Point::new(self.row - other.row, self.col - other.col)
    }

    fn add(self, other: Point) -> Point {
        Point::new(self.row + other.row, self.col + other.col)
    }

    fn scale(self, k: f64) -> Point {
        Point::new(self.row * k, self.col * k)
    }

    fn dot(self, other: Point) -> f64 {
        self.row * other.row + self.col * other.col
    }
}

/// `(b - o) x (a - o)` style turn test in the `(col, row)` plane; positive
/// for a counterclockwise turn `o -> a -> b`.
fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.col - o.col) * (b.row - o.row) - (a.row - o.row) * (b.col - o.col)
}

/// Minimum-area enclosing rectangle of a mask.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotatedBox {
    pub center: Point,
    /// Long side, in pixels.
    pub length: f64,
    /// Short side, in pixels.
    pub width: f64,
    /// Direction of the long side, measured from the +col axis toward the
    /// +row axis, in `[0, 180)`.
    pub angle_deg: f64,
    /// Counterclockwise in the `(col, row)` plane.
    pub corners: [Point; 4],
}

impl RotatedBox {
    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    /// Corner minimizing `row + col` (ties: smaller row).
    pub fn top_left(&self) -> Point {
        self.extreme_corner(-1.0)
    }

    /// Corner maximizing `row + col` (ties: larger row).
    pub fn bottom_right(&self) -> Point {
        self.extreme_corner(1.0)
    }

    /// `sign` +1 maximizes, -1 minimizes. Keys within rounding noise of the
    /// extreme count as tied, so 45 degree boxes pick the same corner
    /// wherever they sit.
    fn extreme_corner(&self, sign: f64) -> Point {
        let key = |p: &Point| sign * (p.row + p.col);
        let best = self.corners.iter().map(key).fold(f64::MIN, f64::max);
        let eps = 1e-9 * (1.0 + best.abs() + self.length);
        self.corners
            .iter()
            .copied()
            .filter(|p| key(p) >= best - eps)
            .max_by(|a, b| (sign * a.row).total_cmp(&(sign * b.row)))
            .expect("four corners")
    }

    /// Whether `p` lies inside the rectangle, allowing `tol` of slack.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        let origin = self.corners[0];
        let e1 = self.corners[1].sub(origin);
        let e2 = self.corners[3].sub(origin);
        let d = p.sub(origin);
        let (l1, l2) = (e1.dot(e1).sqrt(), e2.dot(e2).sqrt());
        let s = if l1 > 0.0 { d.dot(e1) / l1 } else { 0.0 };
        let t = if l2 > 0.0 { d.dot(e2) / l2 } else { 0.0 };
        s >= -tol && s <= l1 + tol && t >= -tol && t <= l2 + tol
    }
}

/// Splits the foreground into 8-connected components.
///
/// Components are ordered by descending popcount, then by the raster
/// position of their first foreground pixel.
pub fn connected_components(mask: &BinaryMask) -> Vec<BinaryMask> {
    let (rows, cols) = mask.dims();
    let mut labels = vec![0u32; rows * cols];
    let mut parent: Vec<u32> = vec![0];

    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }

    // First pass: provisional labels from the already-visited neighbours
    // (W, NW, N, NE), recording equivalences.
    for r in 0..rows {
        for c in 0..cols {
            if !mask.get(r, c) {
                continue;
            }
            let mut neighbours = [0u32; 4];
            let mut n = 0;
            if c > 0 {
                neighbours[n] = labels[r * cols + c - 1];
                n += 1;
            }
            if r > 0 {
                let above = (r - 1) * cols;
                if c > 0 {
                    neighbours[n] = labels[above + c - 1];
                    n += 1;
                }
                neighbours[n] = labels[above + c];
                n += 1;
                if c + 1 < cols {
                    neighbours[n] = labels[above + c + 1];
                    n += 1;
                }
            }
            let mut current = 0u32;
            for &l in neighbours[..n].iter().filter(|&&l| l != 0) {
                let root = find(&mut parent, l);
                if current == 0 {
                    current = root;
                } else if root != current {
                    let (lo, hi) = if root < current {
                        (root, current)
                    } else {
                        (current, root)
                    };
                    parent[hi as usize] = lo;
                    current = lo;
                }
            }
            if current == 0 {
                current = parent.len() as u32;
                parent.push(current);
            }
            labels[r * cols + c] = current;
        }
    }

    // Second pass: resolve roots and gather members.
    let mut slot_of_root: Vec<Option<usize>> = vec![None; parent.len()];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (k, &label) in labels.iter().enumerate() {
        if label == 0 {
            continue;
        }
        let root = find(&mut parent, label) as usize;
        let slot = *slot_of_root[root].get_or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[slot].push(k);
    }

    // Slots are created in raster order of first pixel, so a stable sort on
    // size alone yields the required tie-break.
    members.sort_by_key(|m| std::cmp::Reverse(m.len()));
    members
        .into_iter()
        .map(|pixels| {
            let mut values = vec![false; rows * cols];
            for k in pixels {
                values[k] = true;
            }
            BinaryMask::new(rows, cols, values).expect("same shape as input")
        })
        .collect()
}

/// Counterclockwise convex hull (Andrew's monotone chain); collinear points
/// and duplicates are dropped.
pub fn convex_hull(points: &[Point]) -> Result<Vec<Point>> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.col.total_cmp(&b.col).then(a.row.total_cmp(&b.row)));
    pts.dedup();
    if pts.len() < 3 {
        return Ok(pts);
    }

    let mut hull: Vec<Point> = Vec::with_capacity(pts.len() + 1);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    Ok(hull)
}

/// Integer-valued top-left of the mask's axis-aligned extent, plus the
/// row-extreme pixel corners relative to it. The hull of these points equals
/// the hull of all foreground pixel corners.
fn boundary_corners(mask: &BinaryMask) -> Option<(Point, Vec<Point>)> {
    let (rows, cols) = mask.dims();
    let mut spans = Vec::new();
    let mut min_col = usize::MAX;
    for r in 0..rows {
        let row = &mask.values()[r * cols..(r + 1) * cols];
        let first = row.iter().position(|&v| v);
        let last = row.iter().rposition(|&v| v);
        if let (Some(first), Some(last)) = (first, last) {
            spans.push((r, first, last));
            min_col = min_col.min(first);
        }
    }
    let min_row = spans.first()?.0;
    let origin = Point::new(min_row as f64, min_col as f64);
    let mut points = Vec::with_capacity(spans.len() * 4);
    for (r, first, last) in spans {
        let top = (r - min_row) as f64;
        let left = (first - min_col) as f64;
        let right = (last + 1 - min_col) as f64;
        points.push(Point::new(top, left));
        points.push(Point::new(top + 1.0, left));
        points.push(Point::new(top, right));
        points.push(Point::new(top + 1.0, right));
    }
    Some((origin, points))
}

fn direction_angle_deg(dir: Point) -> f64 {
    let mut a = dir.row.atan2(dir.col).to_degrees().rem_euclid(180.0);
    if a >= 180.0 {
        a -= 180.0;
    }
    a + 0.0
}

struct Candidate {
    area: f64,
    length: f64,
    width: f64,
    angle_deg: f64,
    base: Point,
    u: Point,
    n: Point,
    u_min: f64,
    u_max: f64,
    n_max: f64,
}

impl Candidate {
    fn new(base: Point, u: Point, u_min: f64, u_max: f64, n_max: f64) -> Self {
        let n = Point::new(u.col, -u.row);
        let along = u_max - u_min;
        let across = n_max;
        let angle_u = direction_angle_deg(u);
        let angle_n = direction_angle_deg(n);
        let scale = along.max(across);
        let (length, width, angle_deg) = if (along - across).abs() <= 1e-12 * scale {
            (along, across, angle_u.min(angle_n))
        } else if along > across {
            (along, across, angle_u)
        } else {
            (across, along, angle_n)
        };
        Self {
            area: along * across,
            length,
            width,
            angle_deg,
            base,
            u,
            n,
            u_min,
            u_max,
            n_max,
        }
    }

    fn beats(&self, other: &Candidate) -> bool {
        let tol = 1e-12 * other.area.max(1.0);
        if self.area < other.area - tol {
            return true;
        }
        self.area <= other.area + tol && self.angle_deg < other.angle_deg
    }
}

/// Minimum-area rectangles over a counterclockwise hull by rotating
/// calipers: for every hull edge, the rectangle with one side on that edge.
fn calipers(hull: &[Point]) -> Candidate {
    let h = hull.len();
    debug_assert!(h >= 3);
    let at = |k: usize| hull[k % h];

    let edge_frame = |i: usize| {
        let d = at(i + 1).sub(at(i));
        let len = d.dot(d).sqrt();
        let u = d.scale(1.0 / len);
        // Left normal in the (col, row) plane; the hull interior is on this side.
        let n = Point::new(u.col, -u.row);
        (u, n)
    };

    let (u0, n0) = edge_frame(0);
    let argmax = |f: &dyn Fn(Point) -> f64| -> usize {
        (0..h)
            .max_by(|&a, &b| {
                f(hull[a])
                    .partial_cmp(&f(hull[b]))
                    .unwrap_or(Ordering::Equal)
            })
            .expect("non-empty hull")
    };
    let mut right = argmax(&|p| p.dot(u0));
    let mut top = argmax(&|p| p.dot(n0));
    let mut left = argmax(&|p| -p.dot(u0));

    let mut best: Option<Candidate> = None;
    for i in 0..h {
        let (u, n) = edge_frame(i);
        let base = at(i);
        // Each extreme vertex only ever moves counterclockwise as the edge
        // direction rotates; the projection is unimodal along the hull.
        let advance = |mut j: usize, f: &dyn Fn(Point) -> f64| {
            for _ in 0..h {
                let next = (j + 1) % h;
                if f(hull[next]) > f(hull[j]) {
                    j = next;
                } else {
                    break;
                }
            }
            j
        };
        right = advance(right, &|p: Point| p.sub(base).dot(u));
        top = advance(top, &|p: Point| p.sub(base).dot(n));
        left = advance(left, &|p: Point| -p.sub(base).dot(u));

        let u_max = at(right).sub(base).dot(u);
        let u_min = at(left).sub(base).dot(u);
        let n_max = at(top).sub(base).dot(n);
        let candidate = Candidate::new(base, u, u_min.min(0.0), u_max.max(0.0), n_max.max(0.0));
        if best.as_ref().is_none_or(|b| candidate.beats(b)) {
            best = Some(candidate);
        }
    }
    best.expect("hull has edges")
}

/// Exact minimum-area rotated rectangle enclosing every foreground pixel.
pub fn min_rotated_rect(mask: &BinaryMask) -> Result<RotatedBox> {
    let (origin, points) = boundary_corners(mask).ok_or(Error::EmptyMask)?;
    let hull = convex_hull(&points)?;
    let best = calipers(&hull);

    let local = |a: f64, b: f64| best.base.add(best.u.scale(a)).add(best.n.scale(b));
    let corners = [
        local(best.u_min, 0.0).add(origin),
        local(best.u_max, 0.0).add(origin),
        local(best.u_max, best.n_max).add(origin),
        local(best.u_min, best.n_max).add(origin),
    ];
    let center = local(0.5 * (best.u_min + best.u_max), 0.5 * best.n_max).add(origin);
    Ok(RotatedBox {
        center,
        length: best.length,
        width: best.width,
        angle_deg: best.angle_deg,
        corners,
    })
}

/// Mean of foreground pixel centers.
pub fn centroid(mask: &BinaryMask) -> Result<Point> {
    let mut first: Option<(usize, usize)> = None;
    let (mut sum_r, mut sum_c, mut n) = (0u64, 0u64, 0u64);
    for (r, c) in mask.pixels() {
        let (r0, c0) = *first.get_or_insert((r, c));
        // Offsets may be negative in columns; keep them in i64 space.
        sum_r += (r - r0) as u64;
        sum_c = sum_c.wrapping_add((c as i64 - c0 as i64) as u64);
        n += 1;
    }
    let (r0, c0) = first.ok_or(Error::EmptyMask)?;
    let nf = n as f64;
    Ok(Point::new(
        r0 as f64 + (sum_r as f64 / nf + 0.5),
        c0 as f64 + ((sum_c as i64) as f64 / nf + 0.5),
    ))
}

/// The 2D morphometric feature set, in pixels or (after calibration) meters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Features2D {
    pub dorsal_length: f64,
    pub abdominal_width: f64,
    pub area: f64,
    pub centroid: Point,
    pub bbox_topleft: Point,
    pub bbox_bottomright: Point,
    pub rotated_angle_deg: f64,
}

impl Features2D {
    /// Pixel-unit features of a non-empty mask.
    pub fn measure(mask: &BinaryMask) -> Result<Self> {
        let rect = min_rotated_rect(mask)?;
        Ok(Self {
            dorsal_length: rect.length,
            abdominal_width: rect.width,
            area: mask.popcount() as f64,
            centroid: centroid(mask)?,
            bbox_topleft: rect.top_left(),
            bbox_bottomright: rect.bottom_right(),
            rotated_angle_deg: rect.angle_deg,
        })
    }

    /// Converts pixel units to meters: lengths and coordinates divide by
    /// `ppm`, areas by `ppm^2`; the angle is untouched.
    pub fn scaled(&self, ppm: f64) -> Self {
        let len = |v: f64| v / ppm;
        let pt = |p: Point| Point::new(p.row / ppm, p.col / ppm);
        Self {
            dorsal_length: len(self.dorsal_length),
            abdominal_width: len(self.abdominal_width),
            area: self.area / (ppm * ppm),
            centroid: pt(self.centroid),
            bbox_topleft: pt(self.bbox_topleft),
            bbox_bottomright: pt(self.bbox_bottomright),
            rotated_angle_deg: self.rotated_angle_deg,
        }
    }
}

pub fn features_2d(mask: &BinaryMask, cal: &Calibration) -> Result<Features2D> {
    cal.validate()?;
    Ok(Features2D::measure(mask)?.scaled(cal.ppm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(rows: usize, cols: usize, r0: usize, c0: usize, h: usize, w: usize) -> BinaryMask {
        BinaryMask::from_fn(rows, cols, |r, c| {
            (r0..r0 + h).contains(&r) && (c0..c0 + w).contains(&c)
        })
        .unwrap()
    }

    fn from_pixels(rows: usize, cols: usize, pixels: &[(usize, usize)]) -> BinaryMask {
        let mut m = BinaryMask::empty(rows, cols).unwrap();
        for &(r, c) in pixels {
            m.set(r, c, true);
        }
        m
    }

    #[test]
    fn components_of_two_blocks() {
        let mut m = block(6, 8, 0, 0, 2, 2);
        for (r, c) in block(6, 8, 3, 5, 2, 2).pixels().collect::<Vec<_>>() {
            m.set(r, c, true);
        }
        let comps = connected_components(&m);
        assert_eq!(comps.len(), 2);
        assert!(comps.iter().all(|c| c.popcount() == 4));
        // Equal size: raster order of first pixel.
        assert!(comps[0].get(0, 0));
        assert!(comps[1].get(3, 5));
    }

    #[test]
    fn components_empty_and_diagonal() {
        assert!(connected_components(&BinaryMask::empty(3, 3).unwrap()).is_empty());
        let diag = from_pixels(3, 3, &[(0, 0), (1, 1)]);
        assert_eq!(connected_components(&diag).len(), 1);
        let anti = from_pixels(3, 3, &[(0, 2), (1, 1), (2, 0)]);
        assert_eq!(connected_components(&anti).len(), 1);
    }

    #[test]
    fn components_merge_u_shape_and_order_by_size() {
        // A U shape whose arms only join at the bottom row, plus a small blob.
        let m = from_pixels(
            5,
            7,
            &[
                (0, 0),
                (1, 0),
                (2, 0),
                (2, 1),
                (2, 2),
                (1, 2),
                (0, 2),
                (0, 5),
            ],
        );
        let comps = connected_components(&m);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].popcount(), 7);
        assert_eq!(comps[1].popcount(), 1);
    }

    #[test]
    fn hull_of_square_and_collinear() {
        let sq = [
            Point::new(0.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
        ];
        let hull = convex_hull(&sq).unwrap();
        assert_eq!(hull.len(), 4);
        for p in &sq {
            assert!(hull.contains(p));
        }
        for i in 0..4 {
            assert!(cross(hull[i], hull[(i + 1) % 4], hull[(i + 2) % 4]) > 0.0);
        }

        let line = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(2.0, 2.0),
        ];
        let hull = convex_hull(&line).unwrap();
        assert_eq!(hull, vec![Point::new(0.0, 0.0), Point::new(2.0, 2.0)]);

        assert_eq!(convex_hull(&[]).unwrap_err(), Error::EmptyInput);
        assert_eq!(
            convex_hull(&[Point::new(1.0, 2.0)]).unwrap(),
            vec![Point::new(1.0, 2.0)]
        );
    }

    #[test]
    fn rect_of_axis_aligned_block() {
        let rect = min_rotated_rect(&block(12, 24, 0, 0, 10, 20)).unwrap();
        assert_eq!(rect.length, 20.0);
        assert_eq!(rect.width, 10.0);
        assert_eq!(rect.angle_deg, 0.0);
        assert_eq!(rect.center, Point::new(5.0, 10.0));
        assert_eq!(rect.top_left(), Point::new(0.0, 0.0));
        assert_eq!(rect.bottom_right(), Point::new(10.0, 20.0));
    }

    #[test]
    fn rect_of_tall_block_is_vertical() {
        let rect = min_rotated_rect(&block(30, 12, 2, 1, 20, 10)).unwrap();
        assert_eq!(rect.length, 20.0);
        assert_eq!(rect.width, 10.0);
        assert_eq!(rect.angle_deg, 90.0);
    }

    #[test]
    fn rect_of_single_pixel() {
        let rect = min_rotated_rect(&from_pixels(5, 10, &[(3, 7)])).unwrap();
        assert_eq!(rect.length, 1.0);
        assert_eq!(rect.width, 1.0);
        assert_eq!(rect.angle_deg, 0.0);
        assert_eq!(rect.center, Point::new(3.5, 7.5));
    }

    #[test]
    fn rect_of_thin_line() {
        let line: Vec<_> = (0..10).map(|c| (2, c)).collect();
        let rect = min_rotated_rect(&from_pixels(4, 10, &line)).unwrap();
        assert_eq!(rect.length, 10.0);
        assert_eq!(rect.width, 1.0);
        assert_eq!(rect.angle_deg, 0.0);
    }

    #[test]
    fn rect_of_empty_mask_fails() {
        assert_eq!(
            min_rotated_rect(&BinaryMask::empty(3, 3).unwrap()).unwrap_err(),
            Error::EmptyMask
        );
    }

    #[test]
    fn centroid_cases() {
        assert_eq!(
            centroid(&block(5, 5, 0, 0, 3, 3)).unwrap(),
            Point::new(1.5, 1.5)
        );
        assert_eq!(
            centroid(&from_pixels(2, 2, &[(0, 0)])).unwrap(),
            Point::new(0.5, 0.5)
        );
        let l = centroid(&from_pixels(2, 2, &[(0, 0), (1, 0), (1, 1)])).unwrap();
        assert!((l.row - 1.1666667).abs() < 1e-7);
        assert!((l.col - 0.8333333).abs() < 1e-7);
        // First pixel is not the left-most one.
        let v = centroid(&from_pixels(3, 3, &[(0, 2), (1, 0)])).unwrap();
        assert_eq!(v, Point::new(1.0, 1.5));
        assert_eq!(
            centroid(&BinaryMask::empty(2, 2).unwrap()).unwrap_err(),
            Error::EmptyMask
        );
    }

    #[test]
    fn features_in_pixels_and_meters() {
        let m = block(12, 24, 0, 0, 10, 20);
        let px = features_2d(&m, &Calibration::default()).unwrap();
        assert_eq!(px.dorsal_length, 20.0);
        assert_eq!(px.abdominal_width, 10.0);
        assert_eq!(px.area, 200.0);
        assert_eq!(px.rotated_angle_deg, 0.0);

        let cal = Calibration::new(100.0, 2.5).unwrap();
        let m100 = features_2d(&m, &cal).unwrap();
        assert!((m100.dorsal_length - 0.20).abs() < 1e-15);
        assert!((m100.abdominal_width - 0.10).abs() < 1e-15);
        assert!((m100.area - 0.02).abs() < 1e-15);

        let one = features_2d(&from_pixels(3, 3, &[(1, 1)]), &Calibration::default()).unwrap();
        assert_eq!(
            (one.area, one.dorsal_length, one.abdominal_width),
            (1.0, 1.0, 1.0)
        );
    }
}
