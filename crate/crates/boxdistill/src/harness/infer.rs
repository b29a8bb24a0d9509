//! Inference: average the refinement branches, apply the regressor, suppress
//! duplicates per class.

use crate::geometry::{apply_offsets, nms, BoundingBox};
use crate::losses::softmax_rows;

use super::eval::Detection;
use super::model::ModelParams;
use super::train::{PreparedImage, RunConfig};

/// Detections for one prepared image: per proposal, the mean of the K
/// refinement probabilities over foreground classes; boxes adjusted by the
/// regressor when enabled; class-wise NMS at `config.infer_nms`.
pub fn infer(params: &ModelParams, img: &PreparedImage, config: &RunConfig) -> Vec<Detection> {
    let feats = &img.features;
    let n = img.proposals.len();
    let classes = params.refine[0].out_dim(); // C + 1
    let (im_w, im_h) = (
        img.scene.raster.width() as f64,
        img.scene.raster.height() as f64,
    );

    let mut mean = vec![vec![0.0f64; classes]; n];
    for head in &params.refine {
        let probs = softmax_rows(&head.forward_rows(feats));
        for r in 0..n {
            for c in 0..classes {
                mean[r][c] += probs[(r, c)] / params.refine.len() as f64;
            }
        }
    }

    let boxes: Vec<BoundingBox> = if config.use_regressor {
        let offsets = params.regressor.forward_rows(feats);
        (0..n)
            .map(|r| {
                let t = [0, 1, 2, 3].map(|j| offsets[(r, j)]);
                apply_offsets(&img.proposals.boxes[r], &t, Some((im_w, im_h)))
                    .unwrap_or(img.proposals.boxes[r])
            })
            .collect()
    } else {
        img.proposals.boxes.clone()
    };

    let mut detections = Vec::new();
    for c in 1..classes {
        let scores: Vec<f64> = (0..n).map(|r| mean[r][c]).collect();
        let kept = nms(&boxes, &scores, config.infer_nms).expect("lengths match");
        for r in kept {
            detections.push(Detection {
                class: c - 1,
                score: scores[r],
                bbox: boxes[r],
            });
        }
    }
    detections
}
