//! Instance sources: externally produced label masks, or a classical
//! height-threshold segmenter for depth scenes.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::connected_components;
use crate::raster::{BinaryMask, Calibration, DepthGrid, InstanceMeta, LabelGrid, Sidecar};

/// Label grid plus per-instance metadata, sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSet {
    labels: LabelGrid,
    metas: Vec<InstanceMeta>,
}

impl InstanceSet {
    /// Checks that `metas` and the nonzero ids of `labels` coincide.
    pub fn new(labels: LabelGrid, mut metas: Vec<InstanceMeta>) -> Result<Self> {
        metas.sort_by_key(|m| m.id);
        let ids = labels.instance_ids();
        let meta_ids: Vec<u32> = metas.iter().map(|m| m.id).collect();
        if ids != meta_ids {
            return Err(Error::InvalidParameter(format!(
                "instance metadata ids {meta_ids:?} do not match label ids {ids:?}"
            )));
        }
        if let Some(m) = metas.iter().find(|m| !(0.0..=1.0).contains(&m.score)) {
            return Err(Error::InvalidParameter(format!(
                "score {} of instance {} outside [0, 1]",
                m.score, m.id
            )));
        }
        Ok(Self { labels, metas })
    }

    pub fn labels(&self) -> &LabelGrid {
        &self.labels
    }

    pub fn metas(&self) -> &[InstanceMeta] {
        &self.metas
    }

    pub fn dims(&self) -> (usize, usize) {
        self.labels.dims()
    }

    pub fn len(&self) -> usize {
        self.metas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metas.is_empty()
    }

    pub fn meta(&self, id: u32) -> Option<&InstanceMeta> {
        self.metas.iter().find(|m| m.id == id)
    }

    pub fn mask(&self, id: u32) -> BinaryMask {
        self.labels.mask_of(id)
    }

    /// Pixel count per instance id.
    pub fn areas(&self) -> BTreeMap<u32, usize> {
        let mut areas: BTreeMap<u32, usize> = self.metas.iter().map(|m| (m.id, 0)).collect();
        for &v in self.labels.values() {
            if let Some(a) = areas.get_mut(&v) {
                *a += 1;
            }
        }
        areas
    }

    /// Instances by descending area, then ascending id.
    pub fn ordered_by_area(&self) -> Vec<(&InstanceMeta, usize)> {
        let areas = self.areas();
        let mut out: Vec<_> = self.metas.iter().map(|m| (m, areas[&m.id])).collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.id.cmp(&b.0.id)));
        out
    }

    pub fn largest(&self) -> Option<&InstanceMeta> {
        self.ordered_by_area().first().map(|(m, _)| *m)
    }
}

/// Builds an instance set from an external label mask and optional sidecar;
/// ids without sidecar entries get label `"object"` and score `1.0`.
pub fn load_external(labels: LabelGrid, sidecar: Option<&Sidecar>) -> Result<InstanceSet> {
    let ids = labels.instance_ids();
    let mut entries = BTreeMap::new();
    if let Some(sidecar) = sidecar {
        for entry in &sidecar.instances {
            if ids.binary_search(&entry.id).is_err() {
                return Err(Error::UnknownSidecarId(entry.id));
            }
            entries.insert(entry.id, entry);
        }
    }
    let metas = ids
        .iter()
        .map(|&id| match entries.get(&id) {
            None => Ok(InstanceMeta::with_defaults(id)),
            Some(e) => InstanceMeta::new(
                id,
                e.label
                    .clone()
                    .unwrap_or_else(|| InstanceMeta::DEFAULT_LABEL.to_string()),
                e.score.unwrap_or(InstanceMeta::DEFAULT_SCORE),
            ),
        })
        .collect::<Result<Vec<_>>>()?;
    InstanceSet::new(labels, metas)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdParams {
    /// Minimum height above ground, meters.
    pub min_height_m: f64,
    /// Components smaller than this are dropped.
    pub min_area_px: usize,
    pub cal: Calibration,
}

impl ThresholdParams {
    pub const DEFAULT_MIN_HEIGHT_M: f64 = 0.05;
    pub const DEFAULT_MIN_AREA_PX: usize = 25;

    pub fn validate(&self) -> Result<()> {
        self.cal.validate()?;
        if !(self.min_height_m.is_finite() && self.min_height_m > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "min height must be > 0, got {}",
                self.min_height_m
            )));
        }
        if self.min_area_px == 0 {
            return Err(Error::InvalidParameter("min area must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for ThresholdParams {
    fn default() -> Self {
        Self {
            min_height_m: Self::DEFAULT_MIN_HEIGHT_M,
            min_area_px: Self::DEFAULT_MIN_AREA_PX,
            cal: Calibration::default(),
        }
    }
}

/// Foreground = valid readings more than `min_height_m` above ground.
pub fn threshold_foreground(depth: &DepthGrid, params: &ThresholdParams) -> Result<BinaryMask> {
    params.validate()?;
    let ground = params.cal.camera_to_ground_m;
    BinaryMask::new(
        depth.rows(),
        depth.cols(),
        depth
            .values()
            .iter()
            .map(|&d| d > 0.0 && ground - d > params.min_height_m)
            .collect(),
    )
}

/// Height-threshold segmentation. Ids follow component order (largest
/// first); every instance gets the default label and score.
pub fn segment_depth_threshold(depth: &DepthGrid, params: &ThresholdParams) -> Result<InstanceSet> {
    let foreground = threshold_foreground(depth, params)?;
    let mut labels = vec![0u32; depth.rows() * depth.cols()];
    let mut metas = Vec::new();
    for component in connected_components(&foreground)
        .into_iter()
        .filter(|c| c.popcount() >= params.min_area_px)
    {
        let id = metas.len() as u32 + 1;
        for (k, _) in component.values().iter().enumerate().filter(|(_, &v)| v) {
            labels[k] = id;
        }
        metas.push(InstanceMeta::with_defaults(id));
    }
    InstanceSet::new(LabelGrid::new(depth.rows(), depth.cols(), labels)?, metas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::SidecarEntry;

    fn plateau_scene(extra_pixel: bool) -> DepthGrid {
        DepthGrid::new(
            20,
            20,
            (0..400)
                .map(|k| {
                    let (r, c) = (k / 20, k % 20);
                    let in_block = (5..15).contains(&r) && (5..15).contains(&c);
                    if in_block || (extra_pixel && (r, c) == (1, 1)) {
                        1.5
                    } else {
                        2.5
                    }
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn external_defaults_missing_ids() {
        let labels = LabelGrid::new(1, 4, vec![1, 1, 0, 2]).unwrap();
        let sidecar = Sidecar {
            instances: vec![SidecarEntry {
                id: 1,
                label: Some("pig".into()),
                score: Some(0.9),
            }],
        };
        let set = load_external(labels, Some(&sidecar)).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.meta(1).unwrap().label, "pig");
        assert_eq!(set.meta(2).unwrap(), &InstanceMeta::with_defaults(2));
    }

    #[test]
    fn external_empty_and_unknown_id() {
        let set = load_external(LabelGrid::zeros(3, 3).unwrap(), None).unwrap();
        assert!(set.is_empty());

        let sidecar = Sidecar {
            instances: vec![SidecarEntry {
                id: 9,
                label: None,
                score: None,
            }],
        };
        let err = load_external(LabelGrid::new(1, 2, vec![1, 0]).unwrap(), Some(&sidecar));
        assert_eq!(err.unwrap_err(), Error::UnknownSidecarId(9));
    }

    #[test]
    fn threshold_finds_plateau() {
        let set =
            segment_depth_threshold(&plateau_scene(false), &ThresholdParams::default()).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.mask(1).popcount(), 100);
    }

    #[test]
    fn threshold_drops_small_components() {
        let set =
            segment_depth_threshold(&plateau_scene(true), &ThresholdParams::default()).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.mask(1).popcount(), 100);
        assert!(!set.mask(1).get(1, 1));
    }

    #[test]
    fn threshold_on_ground_is_empty() {
        let ground = DepthGrid::filled(10, 10, 2.5).unwrap();
        assert!(
            segment_depth_threshold(&ground, &ThresholdParams::default())
                .unwrap()
                .is_empty()
        );
        // Missing readings are never foreground.
        let missing = DepthGrid::filled(10, 10, 0.0).unwrap();
        assert!(
            segment_depth_threshold(&missing, &ThresholdParams::default())
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn ordering_by_area_then_id() {
        let labels = LabelGrid::new(1, 7, vec![1, 0, 2, 2, 0, 3, 3]).unwrap();
        let set = load_external(labels, None).unwrap();
        let order: Vec<u32> = set.ordered_by_area().iter().map(|(m, _)| m.id).collect();
        assert_eq!(order, vec![2, 3, 1]);
        assert_eq!(set.largest().unwrap().id, 2);
    }
}
