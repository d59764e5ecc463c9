//! Mask-IoU matching and average precision.
//!
//! Predictions are ranked by descending score (ties: ascending id) and each
//! one is matched greedily to the unmatched ground-truth instance of the same
//! label with the highest IoU. AP is the area under the precision envelope
//! of the resulting precision/recall curve.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::raster::BinaryMask;
use crate::segmentation::InstanceSet;

pub const DEFAULT_THRESHOLDS: [f64; 2] = [0.5, 0.75];

/// `|a ∩ b| / |a ∪ b|`.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::dims(a.dims(), b.dims()));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.values().iter().zip(b.values()) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        return Err(Error::BothEmpty);
    }
    Ok(inter as f64 / union as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchOutcome {
    pub pred_id: u32,
    pub score: f64,
    pub is_tp: bool,
    pub matched_gt_id: Option<u32>,
    /// Best IoU found against an unmatched same-label instance (0 if none).
    pub iou: f64,
}

fn check_threshold(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "IoU threshold {tau} outside (0, 1]"
        )))
    }
}

/// Pairwise intersection counts: `inter[(pred, gt)]`.
fn intersections(preds: &InstanceSet, gts: &InstanceSet) -> BTreeMap<(u32, u32), usize> {
    let mut inter = BTreeMap::new();
    for (&p, &g) in preds.labels().values().iter().zip(gts.labels().values()) {
        if p != 0 && g != 0 {
            *inter.entry((p, g)).or_insert(0) += 1;
        }
    }
    inter
}

/// Predictions in ranking order: descending score, then ascending id.
fn ranked(preds: &InstanceSet) -> Vec<&crate::raster::InstanceMeta> {
    let mut order: Vec<_> = preds.metas().iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
    order
}

/// Greedy confidence-ordered matching; outcomes are in ranking order.
pub fn match_instances(
    preds: &InstanceSet,
    gts: &InstanceSet,
    tau: f64,
) -> Result<Vec<MatchOutcome>> {
    check_threshold(tau)?;
    if preds.dims() != gts.dims() {
        return Err(Error::dims(preds.dims(), gts.dims()));
    }
    let inter = intersections(preds, gts);
    let pred_area = preds.areas();
    let gt_area = gts.areas();
    let mut used = BTreeSet::new();

    let mut outcomes = Vec::with_capacity(preds.len());
    for pred in ranked(preds) {
        let mut best: Option<(u32, f64)> = None;
        for gt in gts
            .metas()
            .iter()
            .filter(|g| g.label == pred.label && !used.contains(&g.id))
        {
            let i = inter.get(&(pred.id, gt.id)).copied().unwrap_or(0);
            let union = pred_area[&pred.id] + gt_area[&gt.id] - i;
            let iou = if union == 0 {
                0.0
            } else {
                i as f64 / union as f64
            };
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((gt.id, iou));
            }
        }
        let outcome = match best {
            Some((gt_id, iou)) if iou >= tau => {
                used.insert(gt_id);
                MatchOutcome {
                    pred_id: pred.id,
                    score: pred.score,
                    is_tp: true,
                    matched_gt_id: Some(gt_id),
                    iou,
                }
            }
            other => MatchOutcome {
                pred_id: pred.id,
                score: pred.score,
                is_tp: false,
                matched_gt_id: None,
                iou: other.map_or(0.0, |(_, iou)| iou),
            },
        };
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub n_gt: usize,
}

/// Cumulative precision and recall after each prediction. Outcomes are
/// stably re-sorted by descending score, so equal scores keep their order.
pub fn pr_curve(outcomes: &[MatchOutcome], n_gt: usize) -> Result<PrCurve> {
    if n_gt == 0 {
        return Err(Error::NoGroundTruth);
    }
    let mut order: Vec<&MatchOutcome> = outcomes.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut tp = 0usize;
    let points = order
        .iter()
        .enumerate()
        .map(|(k, o)| {
            tp += usize::from(o.is_tp);
            PrPoint {
                recall: tp as f64 / n_gt as f64,
                precision: tp as f64 / (k + 1) as f64,
            }
        })
        .collect();
    Ok(PrCurve { points, n_gt })
}

/// All-point interpolated AP: `sum (r_k - r_{k-1}) * max_{j >= k} p_j`.
pub fn average_precision(curve: &PrCurve) -> f64 {
    let pts = &curve.points;
    let mut envelope = vec![0.0; pts.len()];
    let mut running = 0.0f64;
    for k in (0..pts.len()).rev() {
        running = running.max(pts[k].precision);
        envelope[k] = running;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, env) in pts.iter().zip(&envelope) {
        ap += (p.recall - prev_recall) * env;
        prev_recall = p.recall;
    }
    ap
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub label: String,
    pub threshold: f64,
    #[serde(rename = "AP")]
    pub ap: f64,
    pub n_gt: usize,
    pub n_pred: usize,
}

/// Label used for macro-averaged rows.
pub const ALL_LABELS: &str = "all";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApResult {
    pub thresholds: Vec<f64>,
    /// One row per (ground-truth label, threshold), plus `"all"` macro rows
    /// when several labels exist.
    pub rows: Vec<MetricRow>,
}

impl ApResult {
    /// Overall AP at `threshold`: the macro average, or the single label's AP.
    pub fn ap(&self, threshold: f64) -> Option<f64> {
        let at: Vec<&MetricRow> = self
            .rows
            .iter()
            .filter(|r| r.threshold == threshold)
            .collect();
        match at.as_slice() {
            [] => None,
            [only] => Some(only.ap),
            many => many.iter().find(|r| r.label == ALL_LABELS).map(|r| r.ap),
        }
    }

    pub fn label_ap(&self, label: &str, threshold: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.label == label && r.threshold == threshold)
            .map(|r| r.ap)
    }

    pub fn to_csv(&self) -> Vec<u8> {
        use crate::numfmt::format_sig6;
        let mut out = String::from("label,threshold,AP,n_gt,n_pred\n");
        for r in &self.rows {
            let label = if r.label.contains([',', '"', '\n']) {
                format!("\"{}\"", r.label.replace('"', "\"\""))
            } else {
                r.label.clone()
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                label,
                format_sig6(r.threshold),
                format_sig6(r.ap),
                r.n_gt,
                r.n_pred
            ));
        }
        out.into_bytes()
    }
}

/// Pooled AP over a dataset of `(prediction, ground truth)` image pairs.
///
/// Matching runs per image; ranking for the PR curve is pooled across
/// images (ties: image order, then prediction id). Labels are taken from
/// the ground truth.
pub fn evaluate(pairs: &[(InstanceSet, InstanceSet)], thresholds: &[f64]) -> Result<ApResult> {
    if thresholds.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one IoU threshold is required".into(),
        ));
    }
    for &t in thresholds {
        check_threshold(t)?;
    }
    let mut n_gt: BTreeMap<&str, usize> = BTreeMap::new();
    let mut n_pred: BTreeMap<&str, usize> = BTreeMap::new();
    for (preds, gts) in pairs {
        for g in gts.metas() {
            *n_gt.entry(g.label.as_str()).or_default() += 1;
        }
        for p in preds.metas() {
            *n_pred.entry(p.label.as_str()).or_default() += 1;
        }
    }
    if n_gt.is_empty() {
        return Err(Error::NoGroundTruth);
    }

    let mut rows = Vec::new();
    for &tau in thresholds {
        // (score, image, pred id, label, outcome)
        let mut pooled = Vec::new();
        for (image, (preds, gts)) in pairs.iter().enumerate() {
            for o in match_instances(preds, gts, tau)? {
                let label = preds
                    .meta(o.pred_id)
                    .expect("outcome id is known")
                    .label
                    .as_str();
                pooled.push((image, label, o));
            }
        }
        pooled.sort_by(|a, b| {
            b.2.score
                .total_cmp(&a.2.score)
                .then(a.0.cmp(&b.0))
                .then(a.2.pred_id.cmp(&b.2.pred_id))
        });

        let mut per_label = Vec::new();
        for (&label, &count) in &n_gt {
            let outcomes: Vec<MatchOutcome> = pooled
                .iter()
                .filter(|(_, l, _)| *l == label)
                .map(|(_, _, o)| o.clone())
                .collect();
            let ap = average_precision(&pr_curve(&outcomes, count)?);
            per_label.push(MetricRow {
                label: label.to_string(),
                threshold: tau,
                ap,
                n_gt: count,
                n_pred: n_pred.get(label).copied().unwrap_or(0),
            });
        }
        if per_label.len() > 1 {
            let mean = per_label.iter().map(|r| r.ap).sum::<f64>() / per_label.len() as f64;
            per_label.push(MetricRow {
                label: ALL_LABELS.to_string(),
                threshold: tau,
                ap: mean,
                n_gt: n_gt.values().sum(),
                n_pred: n_pred.values().sum(),
            });
        }
        rows.extend(per_label);
    }
    Ok(ApResult {
        thresholds: thresholds.to_vec(),
        rows,
    })
}
