//! The end-to-end training loop: per-image steps through the base detector,
//! the refinement cascade with mined pseudo ground truth and adaptive
//! bottom-up/top-down weights, and the offset regressor.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{BoxEvidence, EvidenceConfig};
use crate::formats::TrainLogRecord;
use crate::geometry::{apply_offsets, encode_offsets, Offsets, ProposalSet};
use crate::losses::{base_loss, base_scores, box_loss, refinement_loss, total_loss};
use crate::mat::Mat;
use crate::mining::{mine, select_regression_reference, MiningThresholds};
use crate::objectness::{combine, AlphaFamily, AlphaSchedule, ScoreTensor};

use super::features::{FeatureContext, FEATURE_DIM};
use super::model::{ModelGrad, ModelParams, Sgd};
use super::propose::{propose, FileProposals, ProposalMode};
use super::scene::{generate_dataset, SyntheticScene, NUM_CLASSES};

/// Everything one run needs. Serialized as the TOML run-config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Seed for the synthetic dataset.
    pub dataset_seed: u64,
    /// Seed for parameter initialization.
    pub model_seed: u64,
    /// Training images.
    pub num_images: usize,
    /// Held-out images for mAP evaluation.
    pub eval_images: usize,
    /// Total optimization steps (one image per step).
    pub steps: u64,
    /// Steps with the impact factor pinned to zero.
    pub warmup_steps: u64,
    /// Initial learning rate; divided by 10 at `lr_decay_step`.
    pub learning_rate: f64,
    pub lr_decay_step: Option<u64>,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Refinement branches (K).
    pub num_branches: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub thresholds: MiningThresholds,
    /// Decay family for the impact factor.
    pub schedule: AlphaFamily,
    pub evidence: EvidenceConfig,
    /// Train and apply the offset regressor.
    pub use_regressor: bool,
    /// Mine seeds from NMS survivors above the confidence threshold; when
    /// off, only the per-class argmax seeds an instance.
    pub nms_mining: bool,
    /// Skip evidence structures entirely (only sound with a schedule that is
    /// identically zero).
    pub skip_evidence: bool,
    pub proposals: ProposalMode,
    /// NMS threshold at inference.
    pub infer_nms: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_seed: 1,
            model_seed: 1,
            num_images: 200,
            eval_images: 100,
            steps: 5000,
            warmup_steps: 500,
            // linear heads over 76-dim features want much larger steps than
            // CNN training; 1e-3 barely moves them in 5000 steps
            learning_rate: 0.1,
            lr_decay_step: None,
            momentum: 0.9,
            weight_decay: 5e-4,
            num_branches: 3,
            lambda1: 1.0,
            lambda2: 0.3,
            thresholds: MiningThresholds::default(),
            schedule: AlphaFamily::Polynomial { gamma: 1.0 },
            evidence: EvidenceConfig::default(),
            use_regressor: true,
            nms_mining: true,
            skip_evidence: false,
            proposals: ProposalMode::Grid,
            infer_nms: 0.3,
        }
    }
}

impl RunConfig {
    /// Mining thresholds with the NMS/confidence rules disabled when
    /// `nms_mining` is off: an NMS threshold of 1 keeps every box and a
    /// confidence threshold of 1 forces the per-class argmax fallback.
    pub fn effective_thresholds(&self) -> MiningThresholds {
        if self.nms_mining {
            self.thresholds
        } else {
            MiningThresholds {
                t_nms: 1.0,
                t_conf: 1.0,
                t_iou: self.thresholds.t_iou,
            }
        }
    }

    pub fn effective_lr(&self, step: u64) -> f64 {
        let decay_at = self.lr_decay_step.unwrap_or(self.steps / 2);
        if step >= decay_at {
            self.learning_rate / 10.0
        } else {
            self.learning_rate
        }
    }

    pub fn schedule(&self) -> AlphaSchedule {
        AlphaSchedule::new(self.schedule, self.warmup_steps, self.steps)
    }
}

/// A scene with its proposals, features and evidence cache.
pub struct PreparedImage {
    pub scene: SyntheticScene,
    pub proposals: ProposalSet,
    pub features: Mat,
    pub evidence: Option<BoxEvidence>,
}

/// Builds proposals, features and (unless skipped) the evidence cache for
/// every scene, in parallel across images.
pub fn prepare_images(
    scenes: Vec<SyntheticScene>,
    config: &RunConfig,
) -> Result<Vec<PreparedImage>> {
    let file = match &config.proposals {
        ProposalMode::File { path } => Some(FileProposals::load(path, false)?),
        _ => None,
    };
    scenes
        .into_par_iter()
        .map(|scene| {
            let proposals = propose(&scene, &config.proposals, file.as_ref())?;
            let ctx = FeatureContext::new(&scene.raster);
            let features = ctx.extract_all(&proposals.boxes);
            let evidence = if config.skip_evidence {
                None
            } else {
                Some(BoxEvidence::build(
                    &scene.raster,
                    &proposals,
                    &config.evidence,
                )?)
            };
            Ok(PreparedImage {
                scene,
                proposals,
                features,
                evidence,
            })
        })
        .collect()
}

/// A trained model with its log and metrics.
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<TrainLogRecord>,
    /// CorLoc and AP over the training images.
    pub train_metrics: super::eval::Metrics,
    /// AP over the held-out images.
    pub eval_metrics: super::eval::Metrics,
}

/// Generates data, trains, and evaluates per the config.
pub fn train(config: &RunConfig) -> Result<TrainOutcome> {
    let scenes = generate_dataset(config.dataset_seed, config.num_images);
    let images = prepare_images(scenes, config)?;
    let (params, log) = train_prepared(config, &images)?;

    let train_detections: Vec<_> = images
        .par_iter()
        .map(|img| super::infer::infer(&params, img, config))
        .collect();
    let train_scenes: Vec<SyntheticScene> =
        images.iter().map(|i| i.scene.clone()).collect();
    let train_metrics = super::eval::evaluate(&train_scenes, &train_detections, NUM_CLASSES);

    // held-out split: a disjoint seed stream
    let eval_scenes = generate_dataset(config.dataset_seed.wrapping_add(0x9E37), config.eval_images);
    let eval_config = RunConfig {
        skip_evidence: true,
        ..config.clone()
    };
    let eval_images = prepare_images(eval_scenes, &eval_config)?;
    let eval_detections: Vec<_> = eval_images
        .par_iter()
        .map(|img| super::infer::infer(&params, img, config))
        .collect();
    let eval_scenes: Vec<SyntheticScene> =
        eval_images.iter().map(|i| i.scene.clone()).collect();
    let eval_metrics = super::eval::evaluate(&eval_scenes, &eval_detections, NUM_CLASSES);

    Ok(TrainOutcome {
        params,
        log,
        train_metrics,
        eval_metrics,
    })
}

/// Runs the optimization loop over prepared images. Single-threaded and
/// bit-deterministic given the config.
pub fn train_prepared(
    config: &RunConfig,
    images: &[PreparedImage],
) -> Result<(ModelParams, Vec<TrainLogRecord>)> {
    assert!(!images.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(config.model_seed);
    let mut params = ModelParams::init(&mut rng, NUM_CLASSES, config.num_branches, FEATURE_DIM);
    let mut opt = Sgd::new(&params, config.momentum, config.weight_decay);
    let schedule = config.schedule();
    let thresholds = config.effective_thresholds();
    let mut log = Vec::with_capacity(config.steps as usize);

    for step in 0..config.steps {
        let img = &images[(step % images.len() as u64) as usize];
        let alpha = schedule.alpha_at(step)?;
        let record = train_step(
            config,
            &mut params,
            &mut opt,
            img,
            step,
            alpha,
            &thresholds,
        )?;
        if !record.total.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        log.push(record);
    }
    Ok((params, log))
}

fn train_step(
    config: &RunConfig,
    params: &mut ModelParams,
    opt: &mut Sgd,
    img: &PreparedImage,
    step: u64,
    alpha: f64,
    thresholds: &MiningThresholds,
) -> Result<TrainLogRecord> {
    let feats = &img.features;
    let boxes = &img.proposals;
    let n = boxes.len();
    let labels = img.scene.labels();
    let (im_w, im_h) = (
        img.scene.raster.width() as f64,
        img.scene.raster.height() as f64,
    );

    // forward
    let xc = params.base_cls.forward_cols(feats);
    let xd = params.base_det.forward_cols(feats);
    let base = base_scores(&xc, &xd);
    let branch_logits: Vec<Mat> = params
        .refine
        .iter()
        .map(|h| h.forward_rows(feats))
        .collect();
    let offsets_mat = params.regressor.forward_rows(feats);
    let offsets: Vec<Offsets> = (0..n)
        .map(|r| [0, 1, 2, 3].map(|j| offsets_mat[(r, j)]))
        .collect();

    // bottom-up evidence, looked up at the regressed boxes when the
    // regressor is in play; skipped entirely while alpha is zero
    let o_bu: Vec<f64> = if alpha == 0.0 || img.evidence.is_none() {
        vec![0.0; n]
    } else {
        let ev = img.evidence.as_ref().expect("evidence cache present");
        if config.use_regressor {
            (0..n)
                .map(|r| {
                    match apply_offsets(&boxes.boxes[r], &offsets[r], Some((im_w, im_h))) {
                        Ok(moved) => ev.at(&moved),
                        Err(_) => 0.0, // collapsed under clipping
                    }
                })
                .collect()
        } else {
            ev.at_proposals().to_vec()
        }
    };

    // refinement cascade: branch k supervised by branch k-1 (branch 0 by
    // the base detector's scores with a zero background row)
    let mut prev = ScoreTensor::from_base_scores(&base);
    let mut l_refs = Vec::with_capacity(config.num_branches);
    let mut d_branch_logits = Vec::with_capacity(config.num_branches);
    let mut last = None;
    for k in 0..config.num_branches {
        let mined = mine(boxes, &prev, &labels, thresholds)?;
        let o_td: Vec<f64> = (0..n).map(|r| prev.get(r, mined.labels[r])).collect();
        let weights: Vec<f64> = (0..n).map(|r| combine(o_bu[r], o_td[r], alpha)).collect();
        let out = refinement_loss(&branch_logits[k], &mined.labels, &weights);
        l_refs.push(out.loss);
        d_branch_logits.push(out.d_logits);
        prev = ScoreTensor::from_probability_matrix(NUM_CLASSES, &out.probs);
        if k + 1 == config.num_branches {
            last = Some((mined, weights));
        }
    }
    let (last_mined, last_weights) = last.expect("at least one branch");

    // regression targets from the last branch's mining
    let mut d_offsets = Mat::zeros(n, 4);
    let l_box = if config.use_regressor {
        let mut rows = Vec::new();
        let mut preds = Vec::new();
        let mut targets = Vec::new();
        let mut ws = Vec::new();
        for &r in &last_mined.positives {
            if let Some(m) = select_regression_reference(
                r,
                &last_mined,
                &last_weights,
                &boxes.boxes,
                thresholds.t_iou,
            ) {
                rows.push(r);
                preds.push(offsets[r]);
                targets.push(encode_offsets(&boxes.boxes[r], &boxes.boxes[m]));
                ws.push(last_weights[r]);
            }
        }
        let (l_box, grads) = box_loss(&preds, &targets, &ws);
        for (row, g) in rows.iter().zip(grads) {
            for j in 0..4 {
                d_offsets[(*row, j)] = g[j];
            }
        }
        l_box
    } else {
        0.0
    };

    let (l_base, base_grad) = base_loss(&base, &labels);
    let breakdown = total_loss(l_base, l_refs, l_box, config.lambda1, config.lambda2);

    // backward into the heads
    let mut grad = ModelGrad::zeros(params);
    grad.base_cls.add_cols(feats, &base_grad.d_xc, 1.0);
    grad.base_det.add_cols(feats, &base_grad.d_xd, 1.0);
    for (k, d_logits) in d_branch_logits.iter().enumerate() {
        grad.refine[k].add_rows(feats, d_logits, config.lambda1);
    }
    if config.use_regressor {
        grad.regressor.add_rows(feats, &d_offsets, config.lambda2);
    }
    opt.step(params, &grad, config.effective_lr(step));

    Ok(TrainLogRecord::new(step, alpha, &breakdown))
}
