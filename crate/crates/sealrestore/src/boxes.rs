//! Bounding-box geometry, IoU matching, confidence filtering, and character
//! cropping.
//!
//! Boxes are half-open pixel rectangles `[x, x+w) x [y, y+h)`, so areas and
//! intersections are unambiguous integer counts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::Image;

#[derive(Debug, Error)]
pub enum BoxError {
    #[error("box ({x},{y}) {w}x{h} lies entirely outside the {img_w}x{img_h} image")]
    OutOfBounds {
        x: i64,
        y: i64,
        w: i64,
        h: i64,
        img_w: u32,
        img_h: u32,
    },
    #[error("U+{0:04X} is not a Unicode scalar value")]
    InvalidCodepoint(u32),
}

/// Axis-aligned box given by its top-left corner and positive extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl BBox {
    /// Panics unless `w > 0 && h > 0`.
    pub fn new(x: i64, y: i64, w: i64, h: i64) -> Self {
        assert!(w > 0 && h > 0, "box extent must be positive");
        Self { x, y, w, h }
    }

    pub fn area(&self) -> i64 {
        self.w * self.h
    }

    fn intersection_area(&self, other: &BBox) -> i64 {
        let iw = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let ih = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if iw > 0 && ih > 0 {
            iw * ih
        } else {
            0
        }
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.intersection_area(other) > 0
    }
}

/// Intersection-over-union of two boxes; disjoint gives 0, identical gives 1.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0 {
        return 0.0;
    }
    inter as f64 / (a.area() + b.area() - inter) as f64
}

/// A predicted character box with a detector confidence and an optional
/// recognized code point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub confidence: f64,
    pub label: Option<char>,
}

/// An annotated character box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundTruth {
    pub bbox: BBox,
    pub codepoint: char,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    pub gt: usize,
    pub pred: usize,
    pub iou: f64,
}

/// One-to-one assignment between ground truth and predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub pairs: Vec<MatchPair>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_pred: Vec<usize>,
}

/// Greedy one-to-one matching by descending IoU.
///
/// Candidate pairs with IoU at or above `threshold` are sorted by descending
/// IoU (ties: ascending ground-truth index, then ascending prediction index)
/// and accepted while both sides are still free.
pub fn match_boxes(gt: &[GroundTruth], pred: &[Detection], threshold: f64) -> MatchResult {
    debug_assert!(threshold > 0.0 && threshold <= 1.0);
    let mut candidates = Vec::new();
    for (gi, g) in gt.iter().enumerate() {
        for (pi, p) in pred.iter().enumerate() {
            let v = iou(&g.bbox, &p.bbox);
            if v >= threshold {
                candidates.push(MatchPair {
                    gt: gi,
                    pred: pi,
                    iou: v,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.iou
            .total_cmp(&a.iou)
            .then_with(|| a.gt.cmp(&b.gt))
            .then_with(|| a.pred.cmp(&b.pred))
    });
    let mut gt_free = vec![true; gt.len()];
    let mut pred_free = vec![true; pred.len()];
    let mut pairs = Vec::new();
    for c in candidates {
        if gt_free[c.gt] && pred_free[c.pred] {
            gt_free[c.gt] = false;
            pred_free[c.pred] = false;
            pairs.push(c);
        }
    }
    MatchResult {
        pairs,
        unmatched_gt: (0..gt.len()).filter(|&i| gt_free[i]).collect(),
        unmatched_pred: (0..pred.len()).filter(|&i| pred_free[i]).collect(),
    }
}

/// Keeps detections with confidence strictly greater than `theta`,
/// preserving input order.
pub fn filter_by_confidence(detections: &[Detection], theta: f64) -> Vec<Detection> {
    detections
        .iter()
        .filter(|d| d.confidence > theta)
        .copied()
        .collect()
}

/// Extracts the sub-image under `bbox`, clamped to the image bounds.
pub fn crop(img: &Image, bbox: &BBox) -> Result<Image, BoxError> {
    let x0 = bbox.x.max(0);
    let y0 = bbox.y.max(0);
    let x1 = (bbox.x + bbox.w).min(img.width() as i64);
    let y1 = (bbox.y + bbox.h).min(img.height() as i64);
    if x1 <= x0 || y1 <= y0 {
        return Err(BoxError::OutOfBounds {
            x: bbox.x,
            y: bbox.y,
            w: bbox.w,
            h: bbox.h,
            img_w: img.width(),
            img_h: img.height(),
        });
    }
    let (cw, ch) = ((x1 - x0) as u32, (y1 - y0) as u32);
    let mut data = Vec::with_capacity(cw as usize * ch as usize * 3);
    for y in y0..y1 {
        for x in x0..x1 {
            data.extend_from_slice(&img.pixel(x as u32, y as u32));
        }
    }
    Ok(Image::new(cw, ch, data))
}

/// Maps a code point to its character; surrogates and out-of-range values
/// are rejected. Non-displayable or private-use code points pass through
/// unchanged -- rendering decides the fallback.
pub fn codepoint_to_char(cp: u32) -> Result<char, BoxError> {
    char::from_u32(cp).ok_or(BoxError::InvalidCodepoint(cp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn det(x: i64, y: i64, w: i64, h: i64, confidence: f64) -> Detection {
        Detection {
            bbox: BBox::new(x, y, w, h),
            confidence,
            label: None,
        }
    }

    fn gt(x: i64, y: i64, w: i64, h: i64) -> GroundTruth {
        GroundTruth {
            bbox: BBox::new(x, y, w, h),
            codepoint: '\u{5C1A}',
        }
    }

    /// Counts grid cells inside a half-open box, for the rasterization
    /// oracle.
    fn raster_count(boxes: &[&BBox], grid: i64, need_all: bool) -> i64 {
        let mut count = 0;
        for y in 0..grid {
            for x in 0..grid {
                let inside = |b: &BBox| x >= b.x && x < b.x + b.w && y >= b.y && y < b.y + b.h;
                let hit = if need_all {
                    boxes.iter().all(|b| inside(b))
                } else {
                    boxes.iter().any(|b| inside(b))
                };
                if hit {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn iou_examples() {
        let a = BBox::new(0, 0, 10, 10);
        assert_eq!(iou(&a, &a), 1.0);
        let far = BBox::new(20, 20, 5, 5);
        assert_eq!(iou(&a, &far), 0.0);
        let b = BBox::new(5, 5, 10, 10);
        let inter = raster_count(&[&a, &b], 30, true);
        let union = raster_count(&[&a, &b], 30, false);
        assert_eq!(inter, 25);
        assert_eq!(union, 175);
        assert!((iou(&a, &b) - inter as f64 / union as f64).abs() < 1e-12);
    }

    #[test]
    fn match_identical_sets_pairs_everything() {
        let gts: Vec<_> = (0..4).map(|i| gt(i * 20, 0, 10, 10)).collect();
        let preds: Vec<_> = (0..4).map(|i| det(i * 20, 0, 10, 10, 0.9)).collect();
        let m = match_boxes(&gts, &preds, 0.5);
        assert_eq!(m.pairs.len(), 4);
        assert!(m.pairs.iter().all(|p| p.iou == 1.0));
        assert!(m.unmatched_gt.is_empty() && m.unmatched_pred.is_empty());
    }

    #[test]
    fn match_disjoint_sets_pairs_nothing() {
        let gts = vec![gt(0, 0, 5, 5), gt(10, 0, 5, 5)];
        let preds = vec![det(100, 100, 5, 5, 0.9)];
        let m = match_boxes(&gts, &preds, 0.5);
        assert!(m.pairs.is_empty());
        assert_eq!(m.unmatched_gt, vec![0, 1]);
        assert_eq!(m.unmatched_pred, vec![0]);
    }

    #[test]
    fn match_prefers_higher_iou() {
        // One prediction overlaps two ground truths; the tighter one wins.
        let gts = vec![gt(0, 0, 10, 10), gt(2, 0, 10, 10)];
        let preds = vec![det(2, 0, 10, 10, 0.9)];
        let m = match_boxes(&gts, &preds, 0.3);
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].gt, 1);
        assert_eq!(m.pairs[0].iou, 1.0);
    }

    #[test]
    fn confidence_filter_is_strict() {
        let dets = vec![
            det(0, 0, 1, 1, 0.9),
            det(0, 0, 1, 1, 0.5),
            det(0, 0, 1, 1, 0.009),
        ];
        let kept = filter_by_confidence(&dets, 0.5);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].confidence, 0.9);
        assert!(filter_by_confidence(&[], 0.5).is_empty());
        // theta = 0 drops only zero-confidence items.
        let zero = vec![det(0, 0, 1, 1, 0.0), det(0, 0, 1, 1, 0.001)];
        assert_eq!(filter_by_confidence(&zero, 0.0).len(), 1);
    }

    #[test]
    fn crop_examples() {
        let img = Image::new(4, 4, (0..48).map(|v| v as u8).collect());
        let full = crop(&img, &BBox::new(0, 0, 4, 4)).unwrap();
        assert_eq!(full, img);
        let tl = crop(&img, &BBox::new(0, 0, 2, 2)).unwrap();
        assert_eq!(tl.width(), 2);
        assert_eq!(tl.pixel(1, 1), img.pixel(1, 1));
        // Clamped to the three remaining columns.
        let over = crop(&img, &BBox::new(1, 0, 6, 2)).unwrap();
        assert_eq!((over.width(), over.height()), (3, 2));
        assert!(matches!(
            crop(&img, &BBox::new(10, 10, 3, 3)),
            Err(BoxError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn codepoint_mapping() {
        assert_eq!(codepoint_to_char(0x5C1A).unwrap(), '尚');
        assert_eq!(codepoint_to_char(0x41).unwrap(), 'A');
        assert!(matches!(
            codepoint_to_char(0xD800),
            Err(BoxError::InvalidCodepoint(0xD800))
        ));
    }

    proptest! {
        #[test]
        fn iou_is_symmetric_and_bounded(
            ax in -20i64..20, ay in -20i64..20, aw in 1i64..15, ah in 1i64..15,
            bx in -20i64..20, by in -20i64..20, bw in 1i64..15, bh in 1i64..15,
        ) {
            let a = BBox::new(ax, ay, aw, ah);
            let b = BBox::new(bx, by, bw, bh);
            let v = iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, iou(&b, &a));
            prop_assert_eq!(iou(&a, &a), 1.0);
        }

        #[test]
        fn confidence_filter_is_idempotent(
            confs in proptest::collection::vec(0.0f64..=1.0, 0..12),
            theta in 0.0f64..=1.0,
        ) {
            let dets: Vec<_> = confs.iter().map(|&c| det(0, 0, 1, 1, c)).collect();
            let once = filter_by_confidence(&dets, theta);
            let twice = filter_by_confidence(&once, theta);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn matched_pairs_are_one_to_one_and_above_threshold(
            raw in proptest::collection::vec((0i64..30, 0i64..30, 1i64..12, 1i64..12), 0..6),
            threshold in 0.1f64..=1.0,
        ) {
            let gts: Vec<_> = raw.iter().map(|&(x, y, w, h)| gt(x, y, w, h)).collect();
            let preds: Vec<_> = raw.iter().rev().map(|&(x, y, w, h)| det(x, y, w, h, 0.9)).collect();
            let m = match_boxes(&gts, &preds, threshold);
            prop_assert!(m.pairs.len() <= gts.len().min(preds.len()));
            let mut seen = std::collections::HashSet::new();
            for p in &m.pairs {
                prop_assert!(p.iou >= threshold);
                prop_assert!(seen.insert(("g", p.gt)) && seen.insert(("p", p.pred)));
            }
            prop_assert_eq!(m.pairs.len() + m.unmatched_gt.len(), gts.len());
            prop_assert_eq!(m.pairs.len() + m.unmatched_pred.len(), preds.len());
        }

        #[test]
        fn adding_a_prediction_never_shrinks_the_match(
            raw in proptest::collection::vec((0i64..30, 0i64..30, 1i64..12, 1i64..12), 1..6),
            extra in (0i64..30, 0i64..30, 1i64..12, 1i64..12),
        ) {
            let gts: Vec<_> = raw.iter().map(|&(x, y, w, h)| gt(x, y, w, h)).collect();
            let mut preds: Vec<_> = raw
                .iter()
                .rev()
                .map(|&(x, y, w, h)| det(x + 1, y, w, h, 0.9))
                .collect();
            let before = match_boxes(&gts, &preds, 0.3).pairs.len();
            let (x, y, w, h) = extra;
            preds.push(det(x, y, w, h, 0.9));
            let after = match_boxes(&gts, &preds, 0.3).pairs.len();
            prop_assert!(after >= before);
        }
    }
}
