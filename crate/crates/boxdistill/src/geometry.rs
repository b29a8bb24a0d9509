//! Axis-aligned box arithmetic, IoU and greedy non-maximum suppression.
//!
//! Boxes use the inclusive-exclusive convention `[x1, x2) x [y1, y2)` so that
//! the area of an integer-aligned box is exactly `(x2 - x1) * (y2 - y1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An axis-aligned box with positive area and finite coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BoundingBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let finite = [x1, y1, x2, y2].iter().all(|v| v.is_finite());
        if !finite || x1 >= x2 || y1 >= y2 {
            return Err(Error::InvalidBox { x1, y1, x2, y2 });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Builds a box from center coordinates and side lengths.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// Intersection area with another box (0 when disjoint).
    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let h = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        w * h
    }

    /// Clips the box to `[0, width) x [0, height)`. Returns `None` when the
    /// clipped box has no area left.
    pub fn clip(&self, width: f64, height: f64) -> Option<BoundingBox> {
        let x1 = self.x1.max(0.0);
        let y1 = self.y1.max(0.0);
        let x2 = self.x2.min(width);
        let y2 = self.y2.min(height);
        if x1 < x2 && y1 < y2 {
            Some(BoundingBox { x1, y1, x2, y2 })
        } else {
            None
        }
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> [f64; 4] {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

/// An ordered set of proposals for one image. Box indices are dense `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSet {
    pub image_id: String,
    pub boxes: Vec<BoundingBox>,
}

impl ProposalSet {
    pub fn new(image_id: impl Into<String>, boxes: Vec<BoundingBox>) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::EmptyProposalSet);
        }
        Ok(Self {
            image_id: image_id.into(),
            boxes,
        })
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}

/// Intersection over union of two boxes, in `[0, 1]`.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Greedy non-maximum suppression.
///
/// Boxes are visited in descending score order (ties broken by lower index); a
/// box is suppressed iff its IoU with an already-kept box exceeds `threshold`.
/// Returns the kept indices in visiting order.
pub fn nms(boxes: &[BoundingBox], scores: &[f64], threshold: f64) -> Result<Vec<usize>> {
    if boxes.len() != scores.len() {
        return Err(Error::LengthMismatch {
            expected: boxes.len(),
            got: scores.len(),
        });
    }
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut kept: Vec<usize> = Vec::new();
    for &idx in &order {
        let suppressed = kept
            .iter()
            .any(|&k| iou(&boxes[k], &boxes[idx]) > threshold);
        if !suppressed {
            kept.push(idx);
        }
    }
    Ok(kept)
}

/// Offsets of locations and sizes `(tx, ty, tw, th)` in the log-space
/// parameterization: translation relative to the source size, scale in log
/// space.
pub type Offsets = [f64; 4];

/// Applies offsets to a box: `x' = x + tx*w`, `y' = y + ty*h`,
/// `w' = w*exp(tw)`, `h' = h*exp(th)`, where `(x, y, w, h)` are the center and
/// sides of `r`. When `bounds = (width, height)` is given the result is
/// clipped to the image; a box that collapses under clipping is an error.
pub fn apply_offsets(r: &BoundingBox, t: &Offsets, bounds: Option<(f64, f64)>) -> Result<BoundingBox> {
    if !t.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParam {
            name: "offsets",
            value: f64::NAN,
            requirement: "all components finite",
        });
    }
    let (cx, cy) = r.center();
    let (w, h) = (r.width(), r.height());
    let nx = cx + t[0] * w;
    let ny = cy + t[1] * h;
    let nw = w * t[2].exp();
    let nh = h * t[3].exp();
    let out = BoundingBox::from_center(nx, ny, nw, nh)?;
    match bounds {
        None => Ok(out),
        Some((bw, bh)) => out.clip(bw, bh).ok_or(Error::DegenerateBox),
    }
}

/// Encodes the offsets that move `r` onto `target`; inverse of
/// [`apply_offsets`].
pub fn encode_offsets(r: &BoundingBox, target: &BoundingBox) -> Offsets {
    let (cx, cy) = r.center();
    let (tx, ty) = target.center();
    [
        (tx - cx) / r.width(),
        (ty - cy) / r.height(),
        (target.width() / r.width()).ln(),
        (target.height() / r.height()).ln(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    /// Quadratic reference NMS: every box checks against every higher-ranked
    /// surviving box, no early exit tricks.
    fn nms_oracle(boxes: &[BoundingBox], scores: &[f64], threshold: f64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..boxes.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut suppressed = vec![false; boxes.len()];
        for i in 0..order.len() {
            if suppressed[order[i]] {
                continue;
            }
            for j in (i + 1)..order.len() {
                if !suppressed[order[j]] && iou(&boxes[order[i]], &boxes[order[j]]) > threshold {
                    suppressed[order[j]] = true;
                }
            }
        }
        order.into_iter().filter(|&i| !suppressed[i]).collect()
    }

    #[test]
    fn iou_identical_boxes() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_disjoint() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let b = bb(20.0, 20.0, 30.0, 30.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_half_overlap() {
        // intersection 50, union 150
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let b = bb(0.0, 5.0, 10.0, 15.0);
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(iou(&a, &b), iou(&b, &a));
    }

    #[test]
    fn nms_keeps_higher_scored_duplicate() {
        let boxes = vec![bb(0.0, 0.0, 10.0, 10.0), bb(0.0, 0.0, 10.0, 10.0)];
        let kept = nms(&boxes, &[0.8, 0.9], 0.3).unwrap();
        assert_eq!(kept, vec![1]);
    }

    #[test]
    fn nms_keeps_disjoint_boxes() {
        let boxes = vec![bb(0.0, 0.0, 10.0, 10.0), bb(50.0, 50.0, 60.0, 60.0)];
        let kept = nms(&boxes, &[0.1, 0.9], 0.3).unwrap();
        assert_eq!(kept, vec![1, 0]);
    }

    #[test]
    fn nms_score_tie_prefers_lower_index() {
        let boxes = vec![bb(0.0, 0.0, 10.0, 10.0), bb(0.0, 0.0, 10.0, 10.0)];
        let kept = nms(&boxes, &[0.5, 0.5], 0.3).unwrap();
        assert_eq!(kept, vec![0]);
    }

    #[test]
    fn nms_rejects_length_mismatch() {
        let boxes = vec![bb(0.0, 0.0, 10.0, 10.0)];
        assert!(matches!(
            nms(&boxes, &[0.5, 0.5], 0.3),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn apply_offsets_identity() {
        let r = bb(3.0, 4.0, 13.0, 24.0);
        let out = apply_offsets(&r, &[0.0, 0.0, 0.0, 0.0], None).unwrap();
        assert_eq!(out, r);
    }

    #[test]
    fn apply_offsets_doubles_size() {
        let r = bb(0.0, 0.0, 10.0, 10.0);
        let out = apply_offsets(&r, &[0.0, 0.0, 2f64.ln(), 2f64.ln()], None).unwrap();
        assert!((out.x1 - -5.0).abs() < 1e-12);
        assert!((out.y1 - -5.0).abs() < 1e-12);
        assert!((out.x2 - 15.0).abs() < 1e-12);
        assert!((out.y2 - 15.0).abs() < 1e-12);
    }

    #[test]
    fn apply_offsets_degenerate_after_clip() {
        let r = bb(0.0, 0.0, 10.0, 10.0);
        // shift fully outside a 20x20 image
        let out = apply_offsets(&r, &[5.0, 0.0, 0.0, 0.0], Some((20.0, 20.0)));
        assert!(matches!(out, Err(Error::DegenerateBox)));
    }

    #[test]
    fn encode_offsets_identity_and_analytic() {
        let r = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(encode_offsets(&r, &r), [0.0, 0.0, 0.0, 0.0]);
        let t = encode_offsets(&r, &bb(5.0, 5.0, 15.0, 15.0));
        assert_eq!(t, [0.5, 0.5, 0.0, 0.0]);
    }

    prop_compose! {
        fn arb_box()(x1 in -50.0..50.0f64, y1 in -50.0..50.0f64,
                     w in 0.5..40.0f64, h in 0.5..40.0f64) -> BoundingBox {
            bb(x1, y1, x1 + w, y1 + h)
        }
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let v = iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, iou(&b, &a));
        }

        #[test]
        fn encode_apply_round_trip(r in arb_box(), target in arb_box()) {
            let t = encode_offsets(&r, &target);
            let back = apply_offsets(&r, &t, None).unwrap();
            prop_assert!((back.x1 - target.x1).abs() < 1e-9);
            prop_assert!((back.y1 - target.y1).abs() < 1e-9);
            prop_assert!((back.x2 - target.x2).abs() < 1e-9);
            prop_assert!((back.y2 - target.y2).abs() < 1e-9);
        }

        #[test]
        fn nms_matches_quadratic_oracle(
            raw in prop::collection::vec((0.0..80.0f64, 0.0..80.0f64, 1.0..30.0f64, 1.0..30.0f64, 0.0..1.0f64), 1..60),
            threshold in 0.0..1.0f64,
        ) {
            let boxes: Vec<BoundingBox> = raw.iter().map(|&(x, y, w, h, _)| bb(x, y, x + w, y + h)).collect();
            let scores: Vec<f64> = raw.iter().map(|&(_, _, _, _, s)| s).collect();
            prop_assert_eq!(
                nms(&boxes, &scores, threshold).unwrap(),
                nms_oracle(&boxes, &scores, threshold)
            );
        }
    }
}
