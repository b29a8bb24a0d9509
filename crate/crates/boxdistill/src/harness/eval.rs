//! Detection metrics: per-class average precision at IoU 0.5 with all-point
//! interpolation, and correct localization over positive images.

use serde::{Deserialize, Serialize};

use crate::geometry::{iou, BoundingBox};

use super::scene::SyntheticScene;

/// One scored detection; `class` is 0-based over the foreground classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub class: usize,
    pub score: f64,
    pub bbox: BoundingBox,
}

/// Metric summary over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_class_ap: Vec<f64>,
    pub map: f64,
    pub per_class_corloc: Vec<f64>,
    pub corloc: f64,
}

const MATCH_IOU: f64 = 0.5;

/// Average precision for one class over the whole dataset.
///
/// Detections are ranked by descending score (ties by image order); each is
/// greedily matched to the best unmatched ground truth of its image at IoU
/// above 0.5. The precision-recall curve is integrated with all-point
/// interpolation.
fn average_precision(
    detections: &[(usize, f64, BoundingBox)],
    gt_boxes: &[Vec<BoundingBox>],
) -> f64 {
    let npos: usize = gt_boxes.iter().map(Vec::len).sum();
    if npos == 0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        detections[b]
            .1
            .partial_cmp(&detections[a].1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut matched: Vec<Vec<bool>> = gt_boxes.iter().map(|g| vec![false; g.len()]).collect();
    let mut tp = Vec::with_capacity(order.len());
    for &d in &order {
        let (img, _, bbox) = &detections[d];
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gt_boxes[*img].iter().enumerate() {
            if matched[*img][gi] {
                continue;
            }
            let overlap = iou(bbox, g);
            if overlap > MATCH_IOU && best.map_or(true, |(_, b)| overlap > b) {
                best = Some((gi, overlap));
            }
        }
        match best {
            Some((gi, _)) => {
                matched[*img][gi] = true;
                tp.push(true);
            }
            None => tp.push(false),
        }
    }

    // precision envelope over the recall steps
    let mut precisions = Vec::with_capacity(tp.len());
    let mut recalls = Vec::with_capacity(tp.len());
    let mut hits = 0usize;
    for (i, &is_tp) in tp.iter().enumerate() {
        if is_tp {
            hits += 1;
        }
        precisions.push(hits as f64 / (i + 1) as f64);
        recalls.push(hits as f64 / npos as f64);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for i in 0..precisions.len() {
        let envelope = precisions[i..]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if recalls[i] > prev_recall {
            ap += (recalls[i] - prev_recall) * envelope;
            prev_recall = recalls[i];
        }
    }
    ap
}

/// Evaluates detections against ground truth. `detections[i]` belongs to
/// `scenes[i]`. CorLoc is computed per class over the images containing that
/// class, then averaged over the classes that occur at all.
pub fn evaluate(
    scenes: &[SyntheticScene],
    detections: &[Vec<Detection>],
    num_classes: usize,
) -> Metrics {
    assert_eq!(scenes.len(), detections.len());

    let mut per_class_ap = Vec::with_capacity(num_classes);
    let mut per_class_corloc = Vec::with_capacity(num_classes);
    for c in 0..num_classes {
        let class_dets: Vec<(usize, f64, BoundingBox)> = detections
            .iter()
            .enumerate()
            .flat_map(|(i, dets)| {
                dets.iter()
                    .filter(|d| d.class == c)
                    .map(move |d| (i, d.score, d.bbox))
            })
            .collect();
        let gt: Vec<Vec<BoundingBox>> = scenes
            .iter()
            .map(|s| {
                s.objects
                    .iter()
                    .filter(|o| o.class == c)
                    .map(|o| o.bbox)
                    .collect()
            })
            .collect();
        per_class_ap.push(average_precision(&class_dets, &gt));

        // CorLoc: top-scoring detection of the class on each positive image
        let mut correct = 0usize;
        let mut positive_images = 0usize;
        for (scene, dets) in scenes.iter().zip(detections) {
            let gt_c: Vec<&BoundingBox> = scene
                .objects
                .iter()
                .filter(|o| o.class == c)
                .map(|o| &o.bbox)
                .collect();
            if gt_c.is_empty() {
                continue;
            }
            positive_images += 1;
            let top = dets
                .iter()
                .filter(|d| d.class == c)
                .max_by(|a, b| a.score.partial_cmp(&b.score).unwrap());
            if let Some(top) = top {
                if gt_c.iter().any(|g| iou(&top.bbox, g) > MATCH_IOU) {
                    correct += 1;
                }
            }
        }
        per_class_corloc.push(if positive_images > 0 {
            correct as f64 / positive_images as f64
        } else {
            f64::NAN
        });
    }

    let occurring: Vec<usize> = (0..num_classes)
        .filter(|&c| !per_class_corloc[c].is_nan())
        .collect();
    let map = if occurring.is_empty() {
        0.0
    } else {
        occurring.iter().map(|&c| per_class_ap[c]).sum::<f64>() / occurring.len() as f64
    };
    let corloc = if occurring.is_empty() {
        0.0
    } else {
        occurring.iter().map(|&c| per_class_corloc[c]).sum::<f64>() / occurring.len() as f64
    };
    Metrics {
        per_class_ap,
        map,
        per_class_corloc,
        corloc,
    }
}
