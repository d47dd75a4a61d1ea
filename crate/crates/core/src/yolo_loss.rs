//! Multi-part YOLOv2 loss evaluated on a single (prediction, ground truth)
//! pair. There is no gradient here; the loss serves as a regression metric
//! and as a check on decoded predictions.
//!
//! Units: the xy term compares cell-relative offsets (the range of
//! `sigmoid(t_x)`), the wh term compares square roots of width and height
//! expressed as fractions of the image size.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, shape_iou, BoundingBox};
use crate::yolo_decode::{decode_cell, sigmoid, softmax, AnchorPrior, CellContext, DetectionTensor, BOX_CHANNELS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthBox {
    pub bbox: BoundingBox,
    pub class_id: u32,
}

impl GroundTruthBox {
    pub fn new(bbox: BoundingBox, class_id: u32) -> Self {
        GroundTruthBox { bbox, class_id }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_coord: f64,
    pub lambda_noobj: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_coord: 5.0,
            lambda_noobj: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub coord_xy: f64,
    pub coord_wh: f64,
    pub obj_conf: f64,
    pub noobj_conf: f64,
    pub class_prob: f64,
    pub total: f64,
}

/// Output grid geometry plus the anchor set, enough to place a truth box.
#[derive(Debug, Clone)]
pub struct GridMeta<'a> {
    pub grid_w: usize,
    pub grid_h: usize,
    pub image_w: f64,
    pub image_h: f64,
    pub anchors: &'a [AnchorPrior],
}

impl<'a> GridMeta<'a> {
    pub fn for_tensor(tensor: &DetectionTensor, anchors: &'a [AnchorPrior]) -> Self {
        GridMeta {
            grid_w: tensor.grid_w,
            grid_h: tensor.grid_h,
            image_w: tensor.image_w,
            image_h: tensor.image_h,
            anchors,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub truth: usize,
    pub row: usize,
    pub col: usize,
    pub anchor: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Responsibility {
    /// One entry per surviving truth, in truth order.
    pub assignments: Vec<Assignment>,
    /// Truths that lost a (cell, anchor) collision.
    pub dropped: Vec<usize>,
}

/// Best-matching anchor for a `w x h` box, ties to the lower index.
pub fn best_anchor(anchors: &[AnchorPrior], w: f64, h: f64) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, a) in anchors.iter().enumerate() {
        let v = shape_iou(w, h, a.width, a.height);
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Map each truth to the grid cell holding its center and to the anchor with
/// the highest co-centered IoU. When two truths claim the same slot the one
/// with larger area keeps it (equal areas: lower index).
pub fn assign_responsibility(truths: &[GroundTruthBox], meta: &GridMeta<'_>) -> Result<Responsibility> {
    if meta.anchors.is_empty() {
        return Err(Error::Config("no anchor priors".into()));
    }
    let cell_w = meta.image_w / meta.grid_w as f64;
    let cell_h = meta.image_h / meta.grid_h as f64;

    let mut candidates = Vec::with_capacity(truths.len());
    for (i, t) in truths.iter().enumerate() {
        let (cx, cy) = t.bbox.center();
        if !(0.0..meta.image_w).contains(&cx) || !(0.0..meta.image_h).contains(&cy) {
            return Err(Error::input(format!(
                "truth {i} center ({cx}, {cy}) lies outside the {}x{} image",
                meta.image_w, meta.image_h
            )));
        }
        let col = ((cx / cell_w).floor() as usize).min(meta.grid_w - 1);
        let row = ((cy / cell_h).floor() as usize).min(meta.grid_h - 1);
        let anchor = best_anchor(meta.anchors, t.bbox.width, t.bbox.height);
        candidates.push(Assignment {
            truth: i,
            row,
            col,
            anchor,
        });
    }

    let mut by_area: Vec<&Assignment> = candidates.iter().collect();
    by_area.sort_by(|a, b| {
        truths[b.truth]
            .bbox
            .area()
            .total_cmp(&truths[a.truth].bbox.area())
            .then(a.truth.cmp(&b.truth))
    });
    let mut taken: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut dropped = Vec::new();
    for a in by_area {
        let key = (a.row, a.col, a.anchor);
        if let Some(&winner) = taken.get(&key) {
            log::warn!(
                "truth {} dropped: cell ({}, {}) anchor {} already assigned to truth {winner}",
                a.truth,
                a.col,
                a.row,
                a.anchor
            );
            dropped.push(a.truth);
        } else {
            taken.insert(key, a.truth);
        }
    }
    dropped.sort_unstable();
    let assignments = candidates
        .into_iter()
        .filter(|a| dropped.binary_search(&a.truth).is_err())
        .collect();
    Ok(Responsibility { assignments, dropped })
}

/// Evaluate the five loss summands for `tensor` against `truths`.
pub fn compute_loss(
    tensor: &DetectionTensor,
    anchors: &[AnchorPrior],
    truths: &[GroundTruthBox],
    weights: LossWeights,
) -> Result<LossBreakdown> {
    if anchors.len() != tensor.num_anchors {
        return Err(Error::input(format!(
            "{} anchors supplied for a tensor with {} anchors per cell",
            anchors.len(),
            tensor.num_anchors
        )));
    }
    if let Some(t) = truths.iter().find(|t| t.class_id as usize >= tensor.num_classes) {
        return Err(Error::input(format!(
            "truth class {} out of range for {} classes",
            t.class_id, tensor.num_classes
        )));
    }
    if !(weights.lambda_coord > 0.0 && weights.lambda_noobj >= 0.0) {
        return Err(Error::input("lambda_coord must be > 0 and lambda_noobj >= 0"));
    }

    let meta = GridMeta::for_tensor(tensor, anchors);
    let resp = assign_responsibility(truths, &meta)?;
    let responsible: HashMap<(usize, usize, usize), usize> = resp
        .assignments
        .iter()
        .map(|a| ((a.row, a.col, a.anchor), a.truth))
        .collect();

    let (cell_w, cell_h) = tensor.cell_size();
    let mut xy = 0.0;
    let mut wh = 0.0;
    let mut obj = 0.0;
    let mut noobj = 0.0;
    let mut class = 0.0;

    for row in 0..tensor.grid_h {
        for col in 0..tensor.grid_w {
            for (a, anchor) in anchors.iter().enumerate() {
                let raw: Vec<f64> = tensor.slot(row, col, a).iter().map(|&v| v as f64).collect();
                if let Some(channel) = raw.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        row,
                        col,
                        anchor: a,
                        channel,
                    });
                }
                let conf = sigmoid(raw[4]);
                let Some(&ti) = responsible.get(&(row, col, a)) else {
                    noobj += conf * conf;
                    continue;
                };
                let truth = &truths[ti];
                let ctx = CellContext {
                    col,
                    row,
                    grid_w: tensor.grid_w,
                    grid_h: tensor.grid_h,
                    image_w: tensor.image_w,
                    image_h: tensor.image_h,
                };
                let pred = decode_cell(&raw, ctx, anchor, a)?;

                let (tcx, tcy) = truth.bbox.center();
                let dx = sigmoid(raw[0]) - (tcx / cell_w - col as f64);
                let dy = sigmoid(raw[1]) - (tcy / cell_h - row as f64);
                xy += dx * dx + dy * dy;

                let dw = (pred.width / tensor.image_w).sqrt() - (truth.bbox.width / tensor.image_w).sqrt();
                let dh = (pred.height / tensor.image_h).sqrt() - (truth.bbox.height / tensor.image_h).sqrt();
                wh += dw * dw + dh * dh;

                let target = iou(&pred, &truth.bbox);
                obj += (conf - target) * (conf - target);

                let probs = softmax(&raw[BOX_CHANNELS..]);
                class += probs
                    .iter()
                    .enumerate()
                    .map(|(c, &p)| {
                        let want = if c == truth.class_id as usize { 1.0 } else { 0.0 };
                        (p - want) * (p - want)
                    })
                    .sum::<f64>();
            }
        }
    }

    let coord_xy = weights.lambda_coord * xy;
    let coord_wh = weights.lambda_coord * wh;
    let noobj_conf = weights.lambda_noobj * noobj;
    Ok(LossBreakdown {
        coord_xy,
        coord_wh,
        obj_conf: obj,
        noobj_conf,
        class_prob: class,
        total: coord_xy + coord_wh + obj + noobj_conf + class,
    })
}
