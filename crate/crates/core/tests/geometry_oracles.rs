mod common;

use common::*;
use morphocv_core::geometry::{
    centroid, connected_components, convex_hull, features_2d, min_rotated_rect, Features2D, Point,
};
use morphocv_core::raster::{BinaryMask, Calibration};
use proptest::prelude::*;
use rand::Rng;

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.col - o.col) * (b.row - o.row) - (a.row - o.row) * (b.col - o.col)
}

/// O(n^3) hull vertices: endpoints of every segment with all other points
/// strictly on its left or on the segment itself.
fn brute_force_hull_vertices(points: &[Point]) -> Vec<Point> {
    let mut vertices: Vec<Point> = Vec::new();
    for (i, &a) in points.iter().enumerate() {
        for (j, &b) in points.iter().enumerate() {
            if i == j || a == b {
                continue;
            }
            let is_edge = points.iter().all(|&p| {
                let x = cross(a, b, p);
                if x > 0.0 {
                    return true;
                }
                if x < 0.0 {
                    return false;
                }
                // Collinear: must lie within the segment.
                let t = (p.col - a.col) * (b.col - a.col) + (p.row - a.row) * (b.row - a.row);
                let len2 = (b.col - a.col).powi(2) + (b.row - a.row).powi(2);
                (0.0..=len2).contains(&t)
            });
            if is_edge {
                for v in [a, b] {
                    if !vertices.contains(&v) {
                        vertices.push(v);
                    }
                }
            }
        }
    }
    vertices
}

fn sorted(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort_by(|a, b| a.row.total_cmp(&b.row).then(a.col.total_cmp(&b.col)));
    pts
}

#[test]
fn hull_of_triangle_cloud_is_its_vertices() {
    let mut rng = rng(7);
    let vertices = [
        Point::new(0.0, 0.0),
        Point::new(40.0, 10.0),
        Point::new(5.0, 50.0),
    ];
    let mut pts = vertices.to_vec();
    for _ in 0..100 {
        let (mut a, mut b): (f64, f64) = (rng.random(), rng.random());
        if a + b > 1.0 {
            (a, b) = (1.0 - a, 1.0 - b);
        }
        // Strictly interior barycentric combination.
        let (a, b) = (0.01 + 0.97 * a, 0.01 + 0.97 * b);
        let c = 1.0 - a - b;
        pts.push(Point::new(
            a * vertices[0].row + b * vertices[1].row + c * vertices[2].row,
            a * vertices[0].col + b * vertices[1].col + c * vertices[2].col,
        ));
    }
    let hull = convex_hull(&pts).unwrap();
    assert_eq!(
        sorted(hull.clone()),
        sorted(brute_force_hull_vertices(&pts))
    );
    assert_eq!(sorted(hull), sorted(vertices.to_vec()));
}

#[test]
fn hull_matches_brute_force_on_random_clouds() {
    let mut rng = rng(11);
    for _ in 0..30 {
        let n = rng.random_range(3..40);
        // Integer lattice points exercise duplicates and collinearity.
        let pts: Vec<Point> = (0..n)
            .map(|_| {
                Point::new(
                    rng.random_range(0..12) as f64,
                    rng.random_range(0..12) as f64,
                )
            })
            .collect();
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(
            sorted(hull.clone()),
            sorted(brute_force_hull_vertices(&pts))
        );
        if hull.len() >= 3 {
            for i in 0..hull.len() {
                let (a, b, c) = (
                    hull[i],
                    hull[(i + 1) % hull.len()],
                    hull[(i + 2) % hull.len()],
                );
                assert!(cross(a, b, c) > 0.0, "hull must turn counterclockwise");
            }
        }
    }
}

fn assert_encloses(mask: &BinaryMask) {
    let rect = min_rotated_rect(mask).unwrap();
    for p in pixel_corners(mask) {
        assert!(rect.contains(p, 1e-6), "corner {p:?} outside {rect:?}");
    }
    // Rectangle shape: opposite sides and diagonals agree.
    let d = |a: Point, b: Point| ((a.row - b.row).powi(2) + (a.col - b.col).powi(2)).sqrt();
    let c = rect.corners;
    assert!((d(c[0], c[1]) - d(c[2], c[3])).abs() < 1e-6);
    assert!((d(c[1], c[2]) - d(c[3], c[0])).abs() < 1e-6);
    assert!((d(c[0], c[2]) - d(c[1], c[3])).abs() < 1e-6);
    assert!(rect.length >= rect.width);
    assert!((0.0..180.0).contains(&rect.angle_deg));
}

#[test]
fn thirty_degree_rectangle_matches_sweep_oracle() {
    let mask = rasterize_rect(80, 80, Point::new(40.0, 40.0), 40.0, 16.0, 30.0);
    let rect = min_rotated_rect(&mask).unwrap();
    let oracle = angle_sweep_min_area(&mask);
    assert!(
        rect.area() <= oracle * 1.005,
        "{} vs oracle {oracle}",
        rect.area()
    );
    assert!(
        rect.area() >= oracle * (1.0 - 1e-3),
        "calipers cannot beat the true minimum by much"
    );
    assert_encloses(&mask);
}

#[test]
fn rotation_robustness_every_fifteen_degrees() {
    for k in 0..12 {
        let theta = 15.0 * k as f64;
        let (length, width) = (36.0, 14.0);
        let mask = rasterize_rect(70, 70, Point::new(35.0, 35.0), length, width, theta);
        let rect = min_rotated_rect(&mask).unwrap();
        assert!(
            (rect.length - length).abs() <= 1.5,
            "theta {theta}: length {}",
            rect.length
        );
        assert!(
            (rect.width - width).abs() <= 1.5,
            "theta {theta}: width {}",
            rect.width
        );
        assert!(
            angle_diff_mod_180(rect.angle_deg, theta) <= 2.0,
            "theta {theta}: angle {}",
            rect.angle_deg
        );
    }
}

#[test]
fn random_blobs_are_minimal_and_enclosed() {
    let mut rng = rng(2024);
    for _ in 0..50 {
        let mask = random_blob(&mut rng, 48);
        let rect = min_rotated_rect(&mask).unwrap();
        let oracle = angle_sweep_min_area(&mask);
        assert!(rect.area() <= 1.005 * oracle, "{} vs {oracle}", rect.area());
        assert_encloses(&mask);
    }
}

#[test]
fn components_partition_foreground() {
    let mut rng = rng(3);
    for _ in 0..20 {
        let bits = (0..576).map(|_| rng.random_bool(0.35)).collect();
        let mask = BinaryMask::new(24, 24, bits).unwrap();
        let comps = connected_components(&mask);
        let total: usize = comps.iter().map(BinaryMask::popcount).sum();
        assert_eq!(total, mask.popcount());
        for w in comps.windows(2) {
            assert!(w[0].popcount() >= w[1].popcount());
        }
        for (r, c) in mask.pixels() {
            assert_eq!(comps.iter().filter(|m| m.get(r, c)).count(), 1);
        }
        // No 8-neighbour pair is split across components.
        for (i, a) in comps.iter().enumerate() {
            for (r, c) in a.pixels() {
                for (dr, dc) in [
                    (-1i32, -1i32),
                    (-1, 0),
                    (-1, 1),
                    (0, -1),
                    (0, 1),
                    (1, -1),
                    (1, 0),
                    (1, 1),
                ] {
                    let (nr, nc) = (r as i32 + dr, c as i32 + dc);
                    if nr < 0 || nc < 0 || nr >= 24 || nc >= 24 {
                        continue;
                    }
                    for (j, b) in comps.iter().enumerate() {
                        if j != i {
                            assert!(!b.get(nr as usize, nc as usize));
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn diagonal_boxes_pick_the_same_extreme_corners_after_shifts() {
    // At 45 degrees two corners tie on row + col; the pick must not depend
    // on rounding noise.
    let mask = rasterize_rect(40, 40, Point::new(20.0, 20.0), 30.0, 12.0, 45.0);
    let base = Features2D::measure(&mask).unwrap();
    for (dr, dc) in [(1, 0), (0, 1), (7, 3), (19, 16), (33, 2)] {
        let moved = Features2D::measure(&shifted(&mask, dr, dc)).unwrap();
        for (a, b) in [
            (base.bbox_topleft, moved.bbox_topleft),
            (base.bbox_bottomright, moved.bbox_bottomright),
        ] {
            assert!((a.row + dr as f64 - b.row).abs() < 1e-9, "({dr},{dc})");
            assert!((a.col + dc as f64 - b.col).abs() < 1e-9, "({dr},{dc})");
        }
    }
}

fn shifted(mask: &BinaryMask, dr: usize, dc: usize) -> BinaryMask {
    BinaryMask::from_fn(mask.rows() + dr, mask.cols() + dc, |r, c| {
        r >= dr && c >= dc && mask.get(r - dr, c - dc)
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_masks_are_enclosed(bits in proptest::collection::vec(any::<bool>(), 144)) {
        let mask = BinaryMask::new(12, 12, bits).unwrap();
        prop_assume!(!mask.is_empty());
        assert_encloses(&mask);
        let c = centroid(&mask).unwrap();
        let rect = min_rotated_rect(&mask).unwrap();
        prop_assert!(rect.contains(c, 1e-9));
    }

    #[test]
    fn translation_equivariance(
        bits in proptest::collection::vec(any::<bool>(), 100),
        dr in 0usize..30,
        dc in 0usize..30,
    ) {
        let mask = BinaryMask::new(10, 10, bits).unwrap();
        prop_assume!(!mask.is_empty());
        let moved = shifted(&mask, dr, dc);
        let (a, b) = (min_rotated_rect(&mask).unwrap(), min_rotated_rect(&moved).unwrap());
        prop_assert_eq!(a.length, b.length);
        prop_assert_eq!(a.width, b.width);
        prop_assert_eq!(a.angle_deg, b.angle_deg);
        let close = |p: Point, q: Point| {
            (p.row + dr as f64 - q.row).abs() < 1e-9 && (p.col + dc as f64 - q.col).abs() < 1e-9
        };
        for k in 0..4 {
            prop_assert!(close(a.corners[k], b.corners[k]));
        }
        prop_assert!(close(a.center, b.center));

        let (fa, fb) = (Features2D::measure(&mask).unwrap(), Features2D::measure(&moved).unwrap());
        prop_assert_eq!(fa.area, fb.area);
        prop_assert_eq!(fa.dorsal_length, fb.dorsal_length);
        prop_assert_eq!(fa.abdominal_width, fb.abdominal_width);
        prop_assert_eq!(fa.rotated_angle_deg, fb.rotated_angle_deg);
        prop_assert!(close(fa.centroid, fb.centroid));
        prop_assert!(close(fa.bbox_topleft, fb.bbox_topleft));
        prop_assert!(close(fa.bbox_bottomright, fb.bbox_bottomright));
    }

    #[test]
    fn ppm_scaling_law(
        bits in proptest::collection::vec(any::<bool>(), 64),
        ppm in 0.5f64..500.0,
    ) {
        let mask = BinaryMask::new(8, 8, bits).unwrap();
        prop_assume!(!mask.is_empty());
        let px = features_2d(&mask, &Calibration::default()).unwrap();
        let m = features_2d(&mask, &Calibration::new(ppm, 2.5).unwrap()).unwrap();
        prop_assert_eq!(m.dorsal_length, px.dorsal_length / ppm);
        prop_assert_eq!(m.abdominal_width, px.abdominal_width / ppm);
        prop_assert_eq!(m.area, px.area / (ppm * ppm));
        prop_assert_eq!(m.centroid.row, px.centroid.row / ppm);
        prop_assert_eq!(m.bbox_bottomright.col, px.bbox_bottomright.col / ppm);
        prop_assert_eq!(m.rotated_angle_deg.to_bits(), px.rotated_angle_deg.to_bits());
        prop_assert!(px.dorsal_length >= px.abdominal_width);
        prop_assert_eq!(px.area, mask.popcount() as f64);
    }
}
