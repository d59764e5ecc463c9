//! Filesystem inputs and atomic result writing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use morphocv_core::evaluation::ApResult;
use morphocv_core::raster::{read_depth_csv, read_label_png, DepthGrid, LabelGrid, Sidecar};
use morphocv_core::render::{decode_png, encode_png, RgbImage};

use crate::error::{AppError, Result};
use crate::pipeline::{AnalysisResult, EvalPair};

pub const FEATURES_CSV: &str = "features.csv";
pub const OVERLAY_PNG: &str = "overlay.png";
pub const SURFACE_JSON: &str = "surface.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const METRICS_JSON: &str = "metrics.json";

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| AppError::io(path, e))
}

pub fn load_depth(path: &Path) -> Result<DepthGrid> {
    Ok(read_depth_csv(&read_bytes(path)?)?)
}

pub fn load_labels(path: &Path) -> Result<LabelGrid> {
    Ok(read_label_png(&read_bytes(path)?)?)
}

pub fn load_sidecar(path: &Path) -> Result<Sidecar> {
    Ok(Sidecar::from_json(&read_bytes(path)?)?)
}

pub fn load_image(path: &Path) -> Result<RgbImage> {
    Ok(decode_png(&read_bytes(path)?)?)
}

/// `dir/name.png` pairs with `dir/name.json` when that file exists.
pub fn sidecar_path(labels: &Path) -> PathBuf {
    labels.with_extension("json")
}

fn load_labels_with_sidecar(path: &Path) -> Result<(LabelGrid, Option<Sidecar>)> {
    let labels = load_labels(path)?;
    let sidecar = sidecar_path(path);
    let sidecar = if sidecar.is_file() {
        Some(load_sidecar(&sidecar)?)
    } else {
        None
    };
    Ok((labels, sidecar))
}

fn png_names(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| AppError::io(dir, e))? {
        let entry = entry.map_err(|e| AppError::io(dir, e))?;
        let path = entry.path();
        if path.is_file()
            && path
                .extension()
                .is_some_and(|ext| ext.eq_ignore_ascii_case("png"))
        {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(names)
}

/// Pairs prediction and ground-truth rasters. Either two files, or two
/// directories matched by file name; ground-truth images without a
/// prediction count as images with no detections.
pub fn collect_eval_pairs(pred: &Path, gt: &Path) -> Result<Vec<EvalPair>> {
    match (pred.is_dir(), gt.is_dir()) {
        (false, false) => Ok(vec![EvalPair {
            name: gt
                .file_name()
                .map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
            pred: Some(load_labels_with_sidecar(pred)?),
            gt: load_labels_with_sidecar(gt)?,
        }]),
        (true, true) => {
            let gt_names = png_names(gt)?;
            if let Some(orphan) = png_names(pred)?.into_iter().find(|n| !gt_names.contains(n)) {
                return Err(AppError::MissingInput(format!(
                    "no ground truth for prediction {orphan}"
                )));
            }
            if gt_names.is_empty() {
                return Err(AppError::MissingInput(format!(
                    "no PNG files in {}",
                    gt.display()
                )));
            }
            gt_names
                .into_iter()
                .map(|name| {
                    let pred_path = pred.join(&name);
                    Ok(EvalPair {
                        pred: if pred_path.is_file() {
                            Some(load_labels_with_sidecar(&pred_path)?)
                        } else {
                            None
                        },
                        gt: load_labels_with_sidecar(&gt.join(&name))?,
                        name,
                    })
                })
                .collect()
        }
        _ => Err(AppError::BadRequest(
            "--pred and --gt must both be files or both be directories".into(),
        )),
    }
}

pub fn analysis_outputs(result: &AnalysisResult) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let mut files = vec![
        (FEATURES_CSV, result.csv()?),
        (OVERLAY_PNG, encode_png(&result.overlay)),
    ];
    if let Some(surface) = &result.surface {
        files.push((SURFACE_JSON, surface.to_json().into_bytes()));
    }
    Ok(files)
}

pub fn metrics_outputs(result: &ApResult) -> Vec<(&'static str, Vec<u8>)> {
    vec![
        (METRICS_CSV, result.to_csv()),
        (
            METRICS_JSON,
            serde_json::to_vec_pretty(result).expect("metrics serialize"),
        ),
    ]
}

/// Stages every file as a temporary in `dir`, then renames them into place,
/// so a failure never leaves a partially written output.
pub fn write_atomically(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| AppError::io(dir, e))?;
        tmp.write_all(bytes)
            .and_then(|()| tmp.as_file().sync_all())
            .map_err(|e| AppError::io(tmp.path(), e))?;
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, target) in staged {
        tmp.persist(&target)
            .map_err(|e| AppError::io(&target, e.error))?;
    }
    Ok(())
}

/// Single-file variant of [`write_atomically`] for an explicit target path.
pub fn write_file_atomically(target: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match target.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = target
        .file_name()
        .ok_or_else(|| AppError::BadRequest(format!("invalid output path {}", target.display())))?
        .to_string_lossy()
        .into_owned();
    write_atomically(&dir, &[(&name, bytes.to_vec())])
}
