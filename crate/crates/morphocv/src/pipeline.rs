//! The two analysis workflows plus dataset evaluation, independent of any
//! transport.

use std::fmt;
use std::str::FromStr;

use morphocv_core::depth::{
    aggregate_3d, process_heights, surface_from_heights, PipelineParams, SurfaceGrid,
    DEFAULT_SURFACE_MAX_DIM,
};
use morphocv_core::evaluation::{evaluate, ApResult};
use morphocv_core::features::{write_features_csv_with_schema, FeatureRecord, Schema};
use morphocv_core::geometry::{features_2d, min_rotated_rect};
use morphocv_core::raster::{DepthGrid, LabelGrid, Sidecar};
use morphocv_core::render::{depth_to_heatmap, render_overlay, RgbImage};
use morphocv_core::segmentation::{
    load_external, segment_depth_threshold, InstanceSet, ThresholdParams,
};
use morphocv_core::Error as CoreError;
use serde::Serialize;

use crate::error::{AppError, Result};

pub const MULTIPLE_INSTANCES_WARNING: &str = "multiple instances; largest selected";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Segmenter {
    /// Instances come from a label raster.
    External,
    /// Height-threshold segmentation of the depth map.
    Threshold,
}

impl fmt::Display for Segmenter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Segmenter::External => "external",
            Segmenter::Threshold => "threshold",
        })
    }
}

impl FromStr for Segmenter {
    type Err = AppError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "external" => Ok(Segmenter::External),
            "threshold" => Ok(Segmenter::Threshold),
            other => Err(AppError::BadRequest(format!(
                "unknown segmenter {other:?} (expected external or threshold)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisRequest {
    pub depth: Option<DepthGrid>,
    pub labels: Option<LabelGrid>,
    pub sidecar: Option<Sidecar>,
    /// Background for the 2D overlay; falls back to the depth heatmap, then black.
    pub image: Option<RgbImage>,
    pub params: PipelineParams,
    pub segmenter: Segmenter,
    /// Only the height and area limits are read; calibration comes from `params`.
    pub threshold: ThresholdParams,
}

impl AnalysisRequest {
    pub fn new(segmenter: Segmenter, params: PipelineParams) -> Self {
        Self {
            depth: None,
            labels: None,
            sidecar: None,
            image: None,
            params,
            segmenter,
            threshold: ThresholdParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        match self.segmenter {
            Segmenter::External if self.labels.is_none() => {
                return Err(AppError::MissingInput(
                    "external segmenter needs a label image".into(),
                ))
            }
            Segmenter::Threshold if self.depth.is_none() => {
                return Err(AppError::MissingInput(
                    "threshold segmenter needs a depth map".into(),
                ))
            }
            _ => {}
        }
        if let (Some(depth), Some(labels)) = (&self.depth, &self.labels) {
            check_dims(depth.dims(), labels.dims())?;
        }
        if let Some(image) = &self.image {
            let reference = self
                .labels
                .as_ref()
                .map(LabelGrid::dims)
                .or(self.depth.as_ref().map(DepthGrid::dims));
            if let Some(dims) = reference {
                check_dims(image.dims(), dims)?;
            }
        }
        Ok(())
    }

    pub fn threshold_params(&self) -> ThresholdParams {
        ThresholdParams {
            cal: self.params.cal,
            ..self.threshold
        }
    }

    /// Resolves the mask source to a non-empty instance set.
    pub fn instances(&self) -> Result<InstanceSet> {
        self.validate()?;
        let set = match self.segmenter {
            Segmenter::External => {
                let labels = self.labels.clone().expect("validated");
                load_external(labels, self.sidecar.as_ref())?
            }
            Segmenter::Threshold => segment_depth_threshold(
                self.depth.as_ref().expect("validated"),
                &self.threshold_params(),
            )?,
        };
        if set.is_empty() {
            return Err(AppError::NoInstances);
        }
        Ok(set)
    }
}

fn check_dims(left: (usize, usize), right: (usize, usize)) -> Result<()> {
    if left != right {
        return Err(CoreError::DimensionMismatch {
            left_rows: left.0,
            left_cols: left.1,
            right_rows: right.0,
            right_cols: right.1,
        }
        .into());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisResult {
    pub features: Vec<FeatureRecord>,
    pub overlay: RgbImage,
    pub surface: Option<SurfaceGrid>,
    pub warnings: Vec<String>,
}

impl AnalysisResult {
    pub fn schema(&self) -> Schema {
        if self.surface.is_some() {
            Schema::ThreeD
        } else {
            Schema::TwoD
        }
    }

    /// The feature table; identical bytes wherever it is written.
    pub fn csv(&self) -> Result<Vec<u8>> {
        Ok(write_features_csv_with_schema(
            &self.features,
            self.schema(),
        )?)
    }
}

fn overlay_base(request: &AnalysisRequest, dims: (usize, usize)) -> Result<RgbImage> {
    if let Some(image) = &request.image {
        return Ok(image.clone());
    }
    if let Some(depth) = &request.depth {
        return Ok(depth_to_heatmap(depth));
    }
    Ok(RgbImage::filled(dims.0, dims.1, [0, 0, 0])?)
}

/// Per-instance 2D features, largest instance first (ties by id).
pub fn analyze_2d(request: &AnalysisRequest) -> Result<AnalysisResult> {
    let instances = request.instances()?;
    let features = instances
        .ordered_by_area()
        .into_iter()
        .map(|(meta, _)| {
            let two_d = features_2d(&instances.mask(meta.id), &request.params.cal)?;
            Ok(FeatureRecord::new(meta.clone(), two_d, None))
        })
        .collect::<Result<Vec<_>>>()?;
    let boxes = instances
        .metas()
        .iter()
        .map(|m| min_rotated_rect(&instances.mask(m.id)))
        .collect::<morphocv_core::Result<Vec<_>>>()?;
    let base = overlay_base(request, instances.dims())?;
    let overlay = render_overlay(&base, &instances, &boxes)?;
    Ok(AnalysisResult {
        features,
        overlay,
        surface: None,
        warnings: Vec::new(),
    })
}

/// 2D and 3D features of the largest instance, its overlay on the depth
/// heatmap and the exported height surface.
pub fn analyze_3d(request: &AnalysisRequest) -> Result<AnalysisResult> {
    let depth = request
        .depth
        .as_ref()
        .ok_or_else(|| AppError::MissingInput("3D analysis needs a depth map".into()))?;
    let instances = request.instances()?;
    let meta = instances.largest().expect("non-empty").clone();
    let mut warnings = Vec::new();
    if instances.len() > 1 {
        warnings.push(MULTIPLE_INSTANCES_WARNING.to_string());
    }

    let mask = instances.mask(meta.id);
    let heights = process_heights(depth, &mask, &request.params)?;
    let two_d = features_2d(&mask, &request.params.cal)?;
    let three_d = aggregate_3d(&heights, &mask, request.params.cal.ppm)?;
    let surface = surface_from_heights(&heights, DEFAULT_SURFACE_MAX_DIM)?;

    let (rows, cols) = mask.dims();
    let selected = InstanceSet::new(
        LabelGrid::new(
            rows,
            cols,
            mask.values()
                .iter()
                .map(|&on| if on { meta.id } else { 0 })
                .collect(),
        )?,
        vec![meta.clone()],
    )?;
    let overlay = render_overlay(
        &depth_to_heatmap(depth),
        &selected,
        &[min_rotated_rect(&mask)?],
    )?;

    Ok(AnalysisResult {
        features: vec![FeatureRecord::new(meta, two_d, Some(three_d))],
        overlay,
        surface: Some(surface),
        warnings,
    })
}

/// One image's prediction and ground-truth label rasters with optional sidecars.
#[derive(Debug, Clone)]
pub struct EvalPair {
    pub name: String,
    pub pred: Option<(LabelGrid, Option<Sidecar>)>,
    pub gt: (LabelGrid, Option<Sidecar>),
}

/// Pooled AP over image pairs. A missing prediction counts as an image with
/// no detections.
pub fn evaluate_pairs(pairs: Vec<EvalPair>, thresholds: &[f64]) -> Result<ApResult> {
    let sets = pairs
        .into_iter()
        .map(|pair| {
            let gt = load_external(pair.gt.0, pair.gt.1.as_ref())?;
            let pred = match pair.pred {
                Some((labels, sidecar)) => {
                    check_dims(labels.dims(), gt.dims())?;
                    load_external(labels, sidecar.as_ref())?
                }
                None => load_external(LabelGrid::zeros(gt.dims().0, gt.dims().1)?, None)?,
            };
            Ok((pred, gt))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(evaluate(&sets, thresholds)?)
}

/// Heatmap rendering of a depth map.
pub fn render_depth(depth: &DepthGrid) -> RgbImage {
    depth_to_heatmap(depth)
}

/// Parses a comma-separated threshold list such as `0.5,0.75`.
pub fn parse_thresholds(text: &str) -> Result<Vec<f64>> {
    let values = text
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| AppError::BadRequest(format!("invalid IoU threshold {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(AppError::BadRequest(
            "at least one IoU threshold is required".into(),
        ));
    }
    Ok(values)
}
