//! Axis-aligned boxes, intersection-over-union and greedy non-maximum
//! suppression.
//!
//! Boxes are stored in corner-plus-size form: `(x_min, y_min, width, height)`
//! in pixels, origin at the top-left, y pointing down.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub width: f64,
    pub height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_id: Option<u32>,
}

impl BoundingBox {
    /// Builds an unscored, unclassed box, checking the size invariants.
    pub fn new(x_min: f64, y_min: f64, width: f64, height: f64) -> Result<Self> {
        let b = BoundingBox {
            x_min,
            y_min,
            width,
            height,
            score: None,
            class_id: None,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn from_center(cx: f64, cy: f64, width: f64, height: f64) -> Result<Self> {
        Self::new(cx - width / 2.0, cy - height / 2.0, width, height)
    }

    pub fn with_score(mut self, score: f64) -> Result<Self> {
        self.score = Some(score);
        self.validate()?;
        Ok(self)
    }

    pub fn with_class(mut self, class_id: u32) -> Self {
        self.class_id = Some(class_id);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.y_min.is_finite()) {
            return Err(Error::input("box corner must be finite"));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::input(format!("box width must be > 0, got {}", self.width)));
        }
        if !(self.height.is_finite() && self.height > 0.0) {
            return Err(Error::input(format!("box height must be > 0, got {}", self.height)));
        }
        if let Some(s) = self.score {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::input(format!("box score must lie in [0,1], got {s}")));
            }
        }
        Ok(())
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.width
    }

    pub fn y_max(&self) -> f64 {
        self.y_min + self.height
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x_min + self.width / 2.0, self.y_min + self.height / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        BoundingBox {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            ..*self
        }
    }
}

pub fn intersection_area(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = (a.x_max().min(b.x_max()) - a.x_min.max(b.x_min)).max(0.0);
    let h = (a.y_max().min(b.y_max()) - a.y_min.max(b.y_min)).max(0.0);
    w * h
}

/// Intersection over union of two valid boxes, in `[0, 1]`.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = intersection_area(a, b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// IoU of two rectangles given only their sizes, with both placed on a
/// common center. Used by anchor matching and anchor clustering.
pub fn shape_iou(w1: f64, h1: f64, w2: f64, h2: f64) -> f64 {
    let inter = w1.min(w2) * h1.min(h2);
    let union = w1 * h1 + w2 * h2 - inter;
    if union <= 0.0 {
        return 0.0;
    }
    inter / union
}

/// Greedy non-maximum suppression, applied independently per `class_id`.
///
/// Boxes are visited in descending score order (ties: lower input index
/// first). A box is dropped when its IoU with an already kept box of the same
/// class exceeds `iou_threshold`. The survivors come back sorted by
/// descending score with the same tie rule.
pub fn nms(boxes: &[BoundingBox], iou_threshold: f64) -> Result<Vec<BoundingBox>> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::input(format!(
            "nms IoU threshold must lie in (0,1], got {iou_threshold}"
        )));
    }
    let mut order = Vec::with_capacity(boxes.len());
    for (i, b) in boxes.iter().enumerate() {
        let score = b
            .score
            .ok_or_else(|| Error::input(format!("nms input box {i} has no score")))?;
        order.push((i, score));
    }
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut kept: Vec<usize> = Vec::new();
    for &(i, _) in &order {
        let candidate = &boxes[i];
        let suppressed = kept.iter().any(|&k| {
            let other = &boxes[k];
            other.class_id == candidate.class_id && iou(other, candidate) > iou_threshold
        });
        if !suppressed {
            kept.push(i);
        }
    }
    Ok(kept.into_iter().map(|i| boxes[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn scored(x: f64, y: f64, w: f64, h: f64, s: f64) -> BoundingBox {
        bx(x, y, w, h).with_score(s).unwrap()
    }

    #[test]
    fn iou_identical_is_one() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_disjoint_is_zero() {
        assert_eq!(iou(&bx(0.0, 0.0, 2.0, 2.0), &bx(5.0, 5.0, 2.0, 2.0)), 0.0);
    }

    #[test]
    fn iou_corner_overlap() {
        // intersection 1x1, union 4 + 4 - 1
        let v = iou(&bx(0.0, 0.0, 2.0, 2.0), &bx(1.0, 1.0, 2.0, 2.0));
        assert!((v - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn touching_edges_have_zero_iou() {
        assert_eq!(iou(&bx(0.0, 0.0, 2.0, 2.0), &bx(2.0, 0.0, 2.0, 2.0)), 0.0);
    }

    #[test]
    fn invalid_boxes_rejected() {
        assert!(BoundingBox::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, 1.0, -1.0).is_err());
        assert!(BoundingBox::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
        assert!(bx(0.0, 0.0, 1.0, 1.0).with_score(1.5).is_err());
    }

    #[test]
    fn shape_iou_matches_cocentered_boxes() {
        let a = BoundingBox::from_center(0.0, 0.0, 30.0, 10.0).unwrap();
        let b = BoundingBox::from_center(0.0, 0.0, 12.0, 25.0).unwrap();
        assert!((shape_iou(30.0, 10.0, 12.0, 25.0) - iou(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn nms_singleton() {
        let b = scored(0.0, 0.0, 2.0, 2.0, 0.3);
        assert_eq!(nms(&[b], 0.5).unwrap(), vec![b]);
    }

    #[test]
    fn nms_empty() {
        assert!(nms(&[], 0.5).unwrap().is_empty());
    }

    #[test]
    fn nms_identical_keeps_higher() {
        let a = scored(0.0, 0.0, 2.0, 2.0, 0.8);
        let b = scored(0.0, 0.0, 2.0, 2.0, 0.9);
        assert_eq!(nms(&[a, b], 0.5).unwrap(), vec![b]);
    }

    #[test]
    fn nms_low_overlap_keeps_both() {
        // IoU 1/7 ~ 0.143 does not exceed 0.2
        let a = scored(0.0, 0.0, 2.0, 2.0, 0.9);
        let b = scored(1.0, 1.0, 2.0, 2.0, 0.8);
        assert_eq!(nms(&[b, a], 0.2).unwrap(), vec![a, b]);
    }

    #[test]
    fn nms_is_per_class() {
        let a = scored(0.0, 0.0, 2.0, 2.0, 0.9).with_class(0);
        let b = scored(0.0, 0.0, 2.0, 2.0, 0.8).with_class(1);
        assert_eq!(nms(&[a, b], 0.5).unwrap().len(), 2);
    }

    #[test]
    fn nms_ties_prefer_insertion_order() {
        let a = scored(0.0, 0.0, 2.0, 2.0, 0.5);
        let b = scored(0.1, 0.0, 2.0, 2.0, 0.5);
        assert_eq!(nms(&[a, b], 0.5).unwrap(), vec![a]);
        assert_eq!(nms(&[b, a], 0.5).unwrap(), vec![b]);
    }

    #[test]
    fn nms_rejects_unscored_and_bad_threshold() {
        assert!(nms(&[bx(0.0, 0.0, 1.0, 1.0)], 0.5).is_err());
        assert!(nms(&[], 0.0).is_err());
        assert!(nms(&[], 1.5).is_err());
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (0.0..100.0f64, 0.0..100.0f64, 0.5..50.0f64, 0.5..50.0f64).prop_map(|(x, y, w, h)| bx(x, y, w, h))
    }

    fn arb_scored() -> impl Strategy<Value = BoundingBox> {
        (arb_box(), 0.0..=1.0f64, 0u32..2).prop_map(|(b, s, c)| b.with_score(s).unwrap().with_class(c))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = iou(&a, &b);
            prop_assert_eq!(ab, iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn iou_translation_invariant(a in arb_box(), b in arb_box(), dx in -50.0..50.0f64, dy in -50.0..50.0f64) {
            let moved = iou(&a.translated(dx, dy), &b.translated(dx, dy));
            prop_assert!((moved - iou(&a, &b)).abs() < 1e-9);
        }

        #[test]
        fn nms_idempotent_and_separated(boxes in prop::collection::vec(arb_scored(), 0..30), t in 0.05..=1.0f64) {
            let once = nms(&boxes, t).unwrap();
            let twice = nms(&once, t).unwrap();
            prop_assert_eq!(&once, &twice);
            for (i, p) in once.iter().enumerate() {
                prop_assert!(boxes.contains(p));
                for q in &once[i + 1..] {
                    prop_assert!(p.score >= q.score);
                    if p.class_id == q.class_id {
                        prop_assert!(iou(p, q) <= t);
                    }
                }
            }
        }
    }
}
