//! Pseudo-ground-truth mining: NMS the previous branch's scores, pick
//! high-confidence seeds per image-level class, collect their overlapping
//! neighbors, and label everything else background. Also selects the
//! regression reference each positive proposal should be pulled toward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, nms, BoundingBox, ProposalSet};
use crate::objectness::ScoreTensor;

/// Mining thresholds. Setting `t_nms = 1` and `t_conf = 1` disables both the
/// NMS filter and the confidence rule, reducing seed selection to the
/// per-class argmax.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiningThresholds {
    pub t_nms: f64,
    pub t_conf: f64,
    pub t_iou: f64,
}

impl Default for MiningThresholds {
    fn default() -> Self {
        Self {
            t_nms: 0.3,
            t_conf: 0.7,
            t_iou: 0.5,
        }
    }
}

impl MiningThresholds {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t_nms", self.t_nms),
            ("t_conf", self.t_conf),
            ("t_iou", self.t_iou),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParam {
                    name,
                    value: v,
                    requirement: "in [0, 1]",
                });
            }
        }
        Ok(())
    }
}

/// A seed's claim on a proposal: the claim strength is the seed's own score
/// for its class under the previous branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedClaim {
    pub seed: usize,
    pub class: usize,
    pub score: f64,
}

/// The labeling produced by one mining pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MiningResult {
    /// NMS survivors in descending score order.
    pub keep: Vec<usize>,
    /// Seed indices per class (index 0, background, stays empty). A class
    /// absent from the image has no seeds.
    pub seeds_per_class: Vec<Vec<usize>>,
    /// Winning seed per proposal; `None` marks background.
    pub seed_of: Vec<Option<usize>>,
    /// Assigned class per proposal, 0 = background.
    pub labels: Vec<usize>,
    /// Ascending indices of all claimed (non-background) proposals.
    pub positives: Vec<usize>,
}

impl MiningResult {
    pub fn num_proposals(&self) -> usize {
        self.labels.len()
    }
}

/// Resolves overlapping seed claims: each proposal takes the claim with the
/// highest seed score, ties broken by lower seed index, then lower class.
pub fn label_conflict_resolution(claims: &[Vec<SeedClaim>]) -> Vec<Option<SeedClaim>> {
    claims
        .iter()
        .map(|cands| {
            cands
                .iter()
                .copied()
                .min_by(|a, b| {
                    b.score
                        .partial_cmp(&a.score)
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(a.seed.cmp(&b.seed))
                        .then(a.class.cmp(&b.class))
                })
        })
        .collect()
}

/// Mines pseudo ground truth for branch `k` from the previous branch's
/// scores.
///
/// `image_labels[c - 1]` marks whether foreground class `c` is present.
/// Proposals are scored for NMS by their maximum over the present classes;
/// per present class, NMS survivors above `t_conf` become seeds (falling back
/// to the survivor with the highest score when none pass); every proposal
/// with IoU above `t_iou` to a seed inherits the seed's class, conflicts
/// resolved by [`label_conflict_resolution`]; the rest is background.
pub fn mine(
    boxes: &ProposalSet,
    prev_scores: &ScoreTensor,
    image_labels: &[bool],
    thresholds: &MiningThresholds,
) -> Result<MiningResult> {
    thresholds.validate()?;
    let n = boxes.len();
    if n == 0 {
        return Err(Error::EmptyProposalSet);
    }
    if prev_scores.num_proposals() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: prev_scores.num_proposals(),
        });
    }
    let num_classes = prev_scores.num_foreground();
    if image_labels.len() != num_classes {
        return Err(Error::LengthMismatch {
            expected: num_classes,
            got: image_labels.len(),
        });
    }
    let positive_classes: Vec<usize> = (1..=num_classes)
        .filter(|&c| image_labels[c - 1])
        .collect();
    if positive_classes.is_empty() {
        return Err(Error::NoPositiveClass);
    }

    // step 1: one keep set per image, scored by the maximum over the
    // image's positive classes
    let nms_scores: Vec<f64> = (0..n)
        .map(|r| {
            positive_classes
                .iter()
                .map(|&c| prev_scores.get(r, c))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let keep = nms(&boxes.boxes, &nms_scores, thresholds.t_nms)?;

    // step 2: seeds per positive class, argmax fallback over the keep set
    let mut seeds_per_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes + 1];
    for &c in &positive_classes {
        let mut seeds: Vec<usize> = keep
            .iter()
            .copied()
            .filter(|&r| prev_scores.get(r, c) > thresholds.t_conf)
            .collect();
        if seeds.is_empty() {
            let best = keep
                .iter()
                .copied()
                .max_by(|&a, &b| {
                    prev_scores
                        .get(a, c)
                        .partial_cmp(&prev_scores.get(b, c))
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(b.cmp(&a)) // ties: keep the lower index
                })
                .expect("keep set is nonempty");
            seeds.push(best);
        }
        seeds.sort_unstable();
        seeds_per_class[c] = seeds;
    }

    // step 3: neighbor claims
    let mut claims: Vec<Vec<SeedClaim>> = vec![Vec::new(); n];
    for &c in &positive_classes {
        for &seed in &seeds_per_class[c] {
            let score = prev_scores.get(seed, c);
            for r in 0..n {
                if iou(&boxes.boxes[r], &boxes.boxes[seed]) > thresholds.t_iou {
                    claims[r].push(SeedClaim { seed, class: c, score });
                }
            }
        }
    }
    let resolved = label_conflict_resolution(&claims);

    // step 4: positives are everything claimed, the rest is background
    let mut labels = vec![0usize; n];
    let mut seed_of = vec![None; n];
    let mut positives = Vec::new();
    for (r, claim) in resolved.iter().enumerate() {
        if let Some(claim) = claim {
            labels[r] = claim.class;
            seed_of[r] = Some(claim.seed);
            positives.push(r);
        }
    }

    Ok(MiningResult {
        keep,
        seeds_per_class,
        seed_of,
        labels,
        positives,
    })
}

/// Regression reference for proposal `r`: the positive proposal overlapping
/// it (IoU above `t_iou`) with the highest combination weight, ties broken by
/// lower index. `None` when nothing qualifies; such proposals are excluded
/// from the box loss.
pub fn select_regression_reference(
    r: usize,
    mined: &MiningResult,
    weights: &[f64],
    boxes: &[BoundingBox],
    t_iou: f64,
) -> Option<usize> {
    debug_assert_eq!(weights.len(), boxes.len());
    mined
        .positives
        .iter()
        .copied()
        .filter(|&m| iou(&boxes[m], &boxes[r]) > t_iou)
        .min_by(|&a, &b| {
            weights[b]
                .partial_cmp(&weights[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        })
}
