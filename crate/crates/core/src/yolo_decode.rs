//! Decoding of raw YOLOv2 output tensors into scored boxes.
//!
//! Each anchor slot carries `[t_x, t_y, t_w, t_h, t_0, class logits...]`.
//! For cell `(c_x, c_y)` on an `S_w x S_h` grid over a `W x H` image:
//!
//! ```text
//! center_x = (sigmoid(t_x) + c_x) * W / S_w
//! center_y = (sigmoid(t_y) + c_y) * H / S_h
//! width    = anchor_w * exp(t_w)
//! height   = anchor_h * exp(t_h)
//! score    = sigmoid(t_0) * max(softmax(logits))
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{nms, BoundingBox};

/// Number of non-class channels per anchor slot.
pub const BOX_CHANNELS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorPrior {
    pub width: f64,
    pub height: f64,
}

impl AnchorPrior {
    pub fn new(width: f64, height: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0 && height.is_finite() && height > 0.0) {
            return Err(Error::input(format!(
                "anchor dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(AnchorPrior { width, height })
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// The ten anchor priors (pixels, 416x416 input) used by the steel-exposure
/// detector, in cluster-group order.
pub const STEEL_EXPOSURE_ANCHORS: [AnchorPrior; 10] = [
    AnchorPrior {
        width: 104.0,
        height: 98.0,
    },
    AnchorPrior {
        width: 174.0,
        height: 309.0,
    },
    AnchorPrior {
        width: 174.0,
        height: 132.0,
    },
    AnchorPrior {
        width: 107.0,
        height: 285.0,
    },
    AnchorPrior {
        width: 105.0,
        height: 167.0,
    },
    AnchorPrior {
        width: 67.0,
        height: 206.0,
    },
    AnchorPrior {
        width: 274.0,
        height: 338.0,
    },
    AnchorPrior {
        width: 208.0,
        height: 213.0,
    },
    AnchorPrior {
        width: 138.0,
        height: 199.0,
    },
    AnchorPrior {
        width: 54.0,
        height: 77.0,
    },
];

/// Raw network output, `grid_h x grid_w x num_anchors x (5 + num_classes)`
/// in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionTensor {
    pub grid_h: usize,
    pub grid_w: usize,
    pub num_anchors: usize,
    pub num_classes: usize,
    pub image_w: f64,
    pub image_h: f64,
    values: Vec<f32>,
}

impl DetectionTensor {
    pub fn new(
        grid_h: usize,
        grid_w: usize,
        num_anchors: usize,
        num_classes: usize,
        image_w: f64,
        image_h: f64,
        values: Vec<f32>,
    ) -> Result<Self> {
        if grid_h == 0 || grid_w == 0 || num_anchors == 0 || num_classes == 0 {
            return Err(Error::input(
                "grid_h, grid_w, num_anchors and num_classes must all be >= 1",
            ));
        }
        if !(image_w.is_finite() && image_w > 0.0 && image_h.is_finite() && image_h > 0.0) {
            return Err(Error::input("image dimensions must be positive"));
        }
        let expected = Self::expected_len(grid_h, grid_w, num_anchors, num_classes);
        if values.len() != expected {
            return Err(Error::input(format!(
                "tensor has {} values, expected {expected}",
                values.len()
            )));
        }
        Ok(DetectionTensor {
            grid_h,
            grid_w,
            num_anchors,
            num_classes,
            image_w,
            image_h,
            values,
        })
    }

    /// All-zero tensor of the given shape.
    pub fn zeros(
        grid_h: usize,
        grid_w: usize,
        num_anchors: usize,
        num_classes: usize,
        image_w: f64,
        image_h: f64,
    ) -> Result<Self> {
        let n = Self::expected_len(grid_h, grid_w, num_anchors, num_classes);
        Self::new(grid_h, grid_w, num_anchors, num_classes, image_w, image_h, vec![0.0; n])
    }

    pub fn expected_len(grid_h: usize, grid_w: usize, num_anchors: usize, num_classes: usize) -> usize {
        grid_h * grid_w * num_anchors * (BOX_CHANNELS + num_classes)
    }

    pub fn slot_len(&self) -> usize {
        BOX_CHANNELS + self.num_classes
    }

    pub fn num_candidates(&self) -> usize {
        self.grid_h * self.grid_w * self.num_anchors
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn cell_size(&self) -> (f64, f64) {
        (self.image_w / self.grid_w as f64, self.image_h / self.grid_h as f64)
    }

    pub fn index(&self, row: usize, col: usize, anchor: usize, channel: usize) -> usize {
        ((row * self.grid_w + col) * self.num_anchors + anchor) * self.slot_len() + channel
    }

    /// The `5 + C` raw values of one anchor slot.
    pub fn slot(&self, row: usize, col: usize, anchor: usize) -> &[f32] {
        let start = self.index(row, col, anchor, 0);
        &self.values[start..start + self.slot_len()]
    }

    pub fn slot_mut(&mut self, row: usize, col: usize, anchor: usize) -> &mut [f32] {
        let start = self.index(row, col, anchor, 0);
        let len = self.slot_len();
        &mut self.values[start..start + len]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeConfig {
    pub anchors: Vec<AnchorPrior>,
    pub score_threshold: f64,
    pub nms_iou: f64,
}

impl DecodeConfig {
    pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.5;
    pub const DEFAULT_NMS_IOU: f64 = 0.5;

    pub fn new(anchors: Vec<AnchorPrior>) -> Self {
        DecodeConfig {
            anchors,
            score_threshold: Self::DEFAULT_SCORE_THRESHOLD,
            nms_iou: Self::DEFAULT_NMS_IOU,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.anchors.is_empty() {
            return Err(Error::Config("at least one anchor prior is required".into()));
        }
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(Error::Config(format!(
                "score threshold must lie in [0,1], got {}",
                self.score_threshold
            )));
        }
        if !(self.nms_iou > 0.0 && self.nms_iou <= 1.0) {
            return Err(Error::Config(format!(
                "NMS IoU must lie in (0,1], got {}",
                self.nms_iou
            )));
        }
        Ok(())
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax over `logits`, shifted by the maximum for stability.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Grid position and geometry context for one anchor slot.
#[derive(Debug, Clone, Copy)]
pub struct CellContext {
    pub col: usize,
    pub row: usize,
    pub grid_w: usize,
    pub grid_h: usize,
    pub image_w: f64,
    pub image_h: f64,
}

/// Decode one anchor slot. `raw` holds `[t_x, t_y, t_w, t_h, t_0, logits...]`
/// and must contain at least one class logit.
pub fn decode_cell(raw: &[f64], cell: CellContext, anchor: &AnchorPrior, anchor_index: usize) -> Result<BoundingBox> {
    if raw.len() < BOX_CHANNELS + 1 {
        return Err(Error::input(format!(
            "anchor slot needs at least {} values, got {}",
            BOX_CHANNELS + 1,
            raw.len()
        )));
    }
    if cell.col >= cell.grid_w || cell.row >= cell.grid_h {
        return Err(Error::input(format!(
            "cell ({}, {}) outside {}x{} grid",
            cell.col, cell.row, cell.grid_w, cell.grid_h
        )));
    }
    if let Some(channel) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: cell.row,
            col: cell.col,
            anchor: anchor_index,
            channel,
        });
    }
    let (tx, ty, tw, th, t0) = (raw[0], raw[1], raw[2], raw[3], raw[4]);
    let cell_w = cell.image_w / cell.grid_w as f64;
    let cell_h = cell.image_h / cell.grid_h as f64;
    let cx = (sigmoid(tx) + cell.col as f64) * cell_w;
    let cy = (sigmoid(ty) + cell.row as f64) * cell_h;
    let w = anchor.width * tw.exp();
    let h = anchor.height * th.exp();

    let probs = softmax(&raw[BOX_CHANNELS..]);
    let (class_id, class_prob) =
        probs.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |best, (i, &p)| if p > best.1 { (i, p) } else { best },
        );
    let score = sigmoid(t0) * class_prob;

    let b = BoundingBox::from_center(cx, cy, w, h).map_err(|e| {
        Error::input(format!(
            "cell ({}, {}) anchor {anchor_index} decodes to a degenerate box: {e}",
            cell.col, cell.row
        ))
    })?;
    b.with_score(score.clamp(0.0, 1.0))
        .map(|b| b.with_class(class_id as u32))
}

/// Decode every candidate in canonical order (row, col, anchor), without
/// thresholding or suppression.
pub fn decode_candidates(tensor: &DetectionTensor, anchors: &[AnchorPrior]) -> Result<Vec<BoundingBox>> {
    if anchors.len() != tensor.num_anchors {
        return Err(Error::Config(format!(
            "{} anchor priors supplied for a tensor with {} anchors per cell",
            anchors.len(),
            tensor.num_anchors
        )));
    }
    (0..tensor.num_candidates())
        .into_par_iter()
        .map(|flat| {
            let a = flat % tensor.num_anchors;
            let cell = flat / tensor.num_anchors;
            let (row, col) = (cell / tensor.grid_w, cell % tensor.grid_w);
            let raw: Vec<f64> = tensor.slot(row, col, a).iter().map(|&v| v as f64).collect();
            let ctx = CellContext {
                col,
                row,
                grid_w: tensor.grid_w,
                grid_h: tensor.grid_h,
                image_w: tensor.image_w,
                image_h: tensor.image_h,
            };
            decode_cell(&raw, ctx, &anchors[a], a)
        })
        .collect()
}

/// Full post-processing: decode, drop candidates scoring below the
/// threshold, then per-class NMS. Output is sorted by descending score,
/// ties in candidate order.
pub fn decode_tensor(tensor: &DetectionTensor, config: &DecodeConfig) -> Result<Vec<BoundingBox>> {
    config.validate()?;
    let candidates = decode_candidates(tensor, &config.anchors)?;
    let kept: Vec<BoundingBox> = candidates
        .into_iter()
        .filter(|b| b.score.unwrap_or(0.0) >= config.score_threshold)
        .collect();
    nms(&kept, config.nms_iou)
}
