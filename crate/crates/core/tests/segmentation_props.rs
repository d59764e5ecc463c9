mod common;

use common::rng;
use morphocv_core::geometry::connected_components;
use morphocv_core::raster::{DepthGrid, LabelGrid};
use morphocv_core::segmentation::{
    load_external, segment_depth_threshold, threshold_foreground, ThresholdParams,
};
use proptest::prelude::*;
use rand::Rng;

fn random_depth(seed: u64) -> DepthGrid {
    let mut rng = rng(seed);
    let values = (0..32 * 32)
        .map(|_| match rng.random_range(0..10) {
            0 => 0.0,
            1..=4 => 2.5,
            _ => rng.random_range(1.0..2.6),
        })
        .collect();
    DepthGrid::new(32, 32, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn threshold_instances_partition_filtered_foreground(seed in any::<u64>(), min_area in 1usize..30) {
        let depth = random_depth(seed);
        let params = ThresholdParams { min_area_px: min_area, ..ThresholdParams::default() };
        let set = segment_depth_threshold(&depth, &params).unwrap();
        let foreground = threshold_foreground(&depth, &params).unwrap();
        let kept: Vec<_> = connected_components(&foreground)
            .into_iter()
            .filter(|c| c.popcount() >= min_area)
            .collect();
        prop_assert_eq!(set.len(), kept.len());
        // Ids follow component order, so masks coincide one-to-one.
        for (k, component) in kept.iter().enumerate() {
            prop_assert_eq!(&set.mask(k as u32 + 1), component);
        }
        // Disjoint by construction of a label grid; covered pixels equal the
        // union of kept components.
        let covered = set.labels().values().iter().filter(|&&v| v != 0).count();
        prop_assert_eq!(covered, kept.iter().map(|c| c.popcount()).sum::<usize>());
    }

    #[test]
    fn segmentation_is_deterministic(seed in any::<u64>()) {
        let depth = random_depth(seed);
        let a = segment_depth_threshold(&depth, &ThresholdParams::default()).unwrap();
        let b = segment_depth_threshold(&depth, &ThresholdParams::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn external_loading_is_lossless(values in proptest::collection::vec(0u32..6, 1..200)) {
        let n = values.len();
        let labels = LabelGrid::new(1, n, values.clone()).unwrap();
        let set = load_external(labels.clone(), None).unwrap();
        let mut rebuilt = vec![0u32; n];
        for meta in set.metas() {
            for (k, &on) in set.mask(meta.id).values().iter().enumerate() {
                if on {
                    prop_assert_eq!(rebuilt[k], 0);
                    rebuilt[k] = meta.id;
                }
            }
        }
        prop_assert_eq!(rebuilt, values);
    }
}
