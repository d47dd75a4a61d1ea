//! Detection matching, precision-recall curves and average precision.
//!
//! AP is the area under the precision envelope using every recall point
//! (no 11-point sampling).

use serde::Serialize;

use crate::geometry::{iou, BoundingBox};
use crate::yolo_loss::GroundTruthBox;

pub const DEFAULT_MATCH_IOU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedDetection {
    pub image: usize,
    pub index: usize,
    pub score: f64,
    pub class_id: u32,
    pub true_positive: bool,
}

/// Label every detection TP/FP.
///
/// Detections are ranked globally by descending score (ties: image index,
/// then detection index). Each one is a TP when an unmatched truth of the
/// same class in its image reaches `iou_threshold`; the highest-IoU such truth
/// is consumed. Unscored detections rank as score 0 and unclassed ones as
/// class 0.
pub fn match_detections(
    dets: &[Vec<BoundingBox>],
    truths: &[Vec<GroundTruthBox>],
    iou_threshold: f64,
) -> Vec<MatchedDetection> {
    let mut ranked: Vec<MatchedDetection> = dets
        .iter()
        .enumerate()
        .flat_map(|(image, list)| {
            list.iter().enumerate().map(move |(index, d)| MatchedDetection {
                image,
                index,
                score: d.score.unwrap_or(0.0),
                class_id: d.class_id.unwrap_or(0),
                true_positive: false,
            })
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.image.cmp(&b.image))
            .then(a.index.cmp(&b.index))
    });

    let mut used: Vec<Vec<bool>> = truths.iter().map(|t| vec![false; t.len()]).collect();
    for m in &mut ranked {
        let Some(image_truths) = truths.get(m.image) else {
            continue;
        };
        let det = &dets[m.image][m.index];
        let mut best: Option<(usize, f64)> = None;
        for (ti, t) in image_truths.iter().enumerate() {
            if used[m.image][ti] || t.class_id != m.class_id {
                continue;
            }
            let v = iou(det, &t.bbox);
            if v >= iou_threshold && best.is_none_or(|(_, b)| v > b) {
                best = Some((ti, v));
            }
        }
        if let Some((ti, _)) = best {
            used[m.image][ti] = true;
            m.true_positive = true;
        }
    }
    ranked
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrCurve {
    /// One point per ranked detection prefix.
    pub points: Vec<PrPoint>,
    pub ap: f64,
    pub num_truths: usize,
    pub num_detections: usize,
    /// Set when there were no truths, so recall (and AP) is undefined and
    /// AP is reported as 0.
    pub undefined: bool,
}

/// Cumulative precision/recall and all-points interpolated AP for a ranked
/// list of TP (`true`) / FP (`false`) labels.
pub fn average_precision(labels: &[bool], num_truths: usize) -> PrCurve {
    if num_truths == 0 {
        if !labels.is_empty() {
            log::warn!(
                "{} detections scored against zero truths; AP reported as 0",
                labels.len()
            );
        }
        let points = vec![
            PrPoint {
                recall: 0.0,
                precision: 0.0
            };
            labels.len()
        ];
        return PrCurve {
            points,
            ap: 0.0,
            num_truths,
            num_detections: labels.len(),
            undefined: true,
        };
    }

    let mut tp = 0usize;
    let points: Vec<PrPoint> = labels
        .iter()
        .enumerate()
        .map(|(i, &hit)| {
            if hit {
                tp += 1;
            }
            PrPoint {
                recall: tp as f64 / num_truths as f64,
                precision: tp as f64 / (i + 1) as f64,
            }
        })
        .collect();

    // precision envelope, right to left
    let mut envelope: Vec<f64> = points.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, env) in points.iter().zip(&envelope) {
        if p.recall > prev_recall {
            ap += (p.recall - prev_recall) * env;
            prev_recall = p.recall;
        }
    }

    PrCurve {
        points,
        ap: ap.clamp(0.0, 1.0),
        num_truths,
        num_detections: labels.len(),
        undefined: false,
    }
}

/// Arithmetic mean of per-class AP; `None` for an empty slice.
pub fn mean_average_precision(curves: &[PrCurve]) -> Option<f64> {
    if curves.is_empty() {
        return None;
    }
    Some(curves.iter().map(|c| c.ap).sum::<f64>() / curves.len() as f64)
}

/// Per-class PR curves for every class present in the truths (or, when no
/// truths exist, in the detections). Returns `(class_id, curve)` pairs in
/// ascending class order.
pub fn evaluate_by_class(
    dets: &[Vec<BoundingBox>],
    truths: &[Vec<GroundTruthBox>],
    iou_threshold: f64,
) -> Vec<(u32, PrCurve)> {
    let matched = match_detections(dets, truths, iou_threshold);
    let mut classes: Vec<u32> = truths.iter().flatten().map(|t| t.class_id).collect();
    if classes.is_empty() {
        classes = matched.iter().map(|m| m.class_id).collect();
    }
    classes.sort_unstable();
    classes.dedup();
    classes
        .into_iter()
        .map(|c| {
            let labels: Vec<bool> = matched
                .iter()
                .filter(|m| m.class_id == c)
                .map(|m| m.true_positive)
                .collect();
            let n = truths.iter().flatten().filter(|t| t.class_id == c).count();
            (c, average_precision(&labels, n))
        })
        .collect()
}
