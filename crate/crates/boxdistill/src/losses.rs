//! Training objectives for the two-stream base detector, the refinement
//! branches and the box regressor, each with analytic gradients.
//!
//! The base detector follows the two-softmax construction: class scores are
//! softmaxed over classes per region, detection scores over regions per
//! class, and their elementwise product is summed over regions into an
//! image-level score vector trained with binary cross entropy. Refinement
//! branches are per-region softmax classifiers over `C + 1` classes trained
//! with weighted cross entropy; the regressor uses weighted smooth-L1 over
//! offset 4-tuples.

use crate::geometry::Offsets;
use crate::mat::Mat;

/// Probabilities are clamped to `[EPS, 1 - EPS]` before any logarithm.
pub const EPS: f64 = 1e-7;

/// Outputs of the two-stream base head for one image.
#[derive(Debug, Clone)]
pub struct BaseScores {
    /// Per-class softmax over classes (column-wise), `C x |R|`.
    pub sigma_c: Mat,
    /// Per-class softmax over regions (row-wise), `C x |R|`.
    pub sigma_d: Mat,
    /// Elementwise product `sigma_c * sigma_d`, `C x |R|`.
    pub s: Mat,
    /// Image-level class scores, `phi_c = sum_r s[c][r]`, length `C`.
    pub phi: Vec<f64>,
}

/// Gradients of the base loss with respect to the raw head outputs.
#[derive(Debug, Clone)]
pub struct BaseGrad {
    pub d_xc: Mat,
    pub d_xd: Mat,
}

/// Computes the base-head scores from raw `C x |R|` logit matrices.
pub fn base_scores(xc: &Mat, xd: &Mat) -> BaseScores {
    assert_eq!(xc.rows(), xd.rows());
    assert_eq!(xc.cols(), xd.cols());
    let (c, r) = (xc.rows(), xc.cols());

    // column softmax over classes
    let mut sigma_c = Mat::zeros(c, r);
    for j in 0..r {
        let max = (0..c).map(|i| xc[(i, j)]).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for i in 0..c {
            let e = (xc[(i, j)] - max).exp();
            sigma_c[(i, j)] = e;
            sum += e;
        }
        for i in 0..c {
            sigma_c[(i, j)] /= sum;
        }
    }

    // row softmax over regions
    let mut sigma_d = Mat::zeros(c, r);
    for i in 0..c {
        let max = xd.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for j in 0..r {
            let e = (xd[(i, j)] - max).exp();
            sigma_d[(i, j)] = e;
            sum += e;
        }
        for j in 0..r {
            sigma_d[(i, j)] /= sum;
        }
    }

    let mut s = Mat::zeros(c, r);
    let mut phi = vec![0.0; c];
    for i in 0..c {
        for j in 0..r {
            s[(i, j)] = sigma_c[(i, j)] * sigma_d[(i, j)];
            phi[i] += s[(i, j)];
        }
    }
    BaseScores { sigma_c, sigma_d, s, phi }
}

/// Binary cross entropy of clamped image scores against the label indicator.
pub fn binary_cross_entropy(phi: &[f64], labels: &[bool]) -> f64 {
    assert_eq!(phi.len(), labels.len());
    phi.iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(EPS, 1.0 - EPS);
            if y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum()
}

/// Binary cross entropy between image scores and the image-level label
/// indicator, with gradients chained back through both softmax streams.
pub fn base_loss(scores: &BaseScores, labels: &[bool]) -> (f64, BaseGrad) {
    let (c, r) = (scores.s.rows(), scores.s.cols());
    assert_eq!(labels.len(), c);

    let loss = binary_cross_entropy(&scores.phi, labels);
    let mut g = vec![0.0; c];
    for i in 0..c {
        let phi = scores.phi[i].clamp(EPS, 1.0 - EPS);
        let y = if labels[i] { 1.0 } else { 0.0 };
        g[i] = (phi - y) / (phi * (1.0 - phi));
    }

    let mut d_xc = Mat::zeros(c, r);
    let mut d_xd = Mat::zeros(c, r);
    for j in 0..r {
        // column j: sum_c g_c * s[c][j] appears in every class entry
        let mut gs = 0.0;
        for i in 0..c {
            gs += g[i] * scores.s[(i, j)];
        }
        for i in 0..c {
            d_xc[(i, j)] = g[i] * scores.s[(i, j)] - scores.sigma_c[(i, j)] * gs;
            d_xd[(i, j)] = g[i] * (scores.s[(i, j)] - scores.sigma_d[(i, j)] * scores.phi[i]);
        }
    }
    (loss, BaseGrad { d_xc, d_xd })
}

/// Result of one refinement-branch loss evaluation.
#[derive(Debug, Clone)]
pub struct RefinementLoss {
    pub loss: f64,
    /// Row-softmax probabilities, `|R| x (C+1)`.
    pub probs: Mat,
    /// Gradient with respect to the branch logits, `|R| x (C+1)`.
    pub d_logits: Mat,
}

/// Row softmax of a `|R| x (C+1)` logit matrix.
pub fn softmax_rows(logits: &Mat) -> Mat {
    let mut probs = Mat::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        let max = logits.row(r).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for c in 0..logits.cols() {
            let e = (logits[(r, c)] - max).exp();
            probs[(r, c)] = e;
            sum += e;
        }
        for c in 0..logits.cols() {
            probs[(r, c)] /= sum;
        }
    }
    probs
}

/// Weighted mean cross entropy over all proposals of one image.
///
/// `labels[r]` is the assigned class (0 = background) and `weights[r]` the
/// per-proposal combination weight, treated as a constant.
pub fn refinement_loss(logits: &Mat, labels: &[usize], weights: &[f64]) -> RefinementLoss {
    let (n, classes) = (logits.rows(), logits.cols());
    assert_eq!(labels.len(), n);
    assert_eq!(weights.len(), n);

    let probs = softmax_rows(logits);
    let mut loss = 0.0;
    let mut d_logits = Mat::zeros(n, classes);
    let inv = 1.0 / n as f64;
    for r in 0..n {
        let target = labels[r];
        debug_assert!(target < classes);
        loss -= weights[r] * inv * probs[(r, target)].clamp(EPS, 1.0 - EPS).ln();
        let wr = weights[r] * inv;
        if wr != 0.0 {
            for c in 0..classes {
                let delta = if c == target { 1.0 } else { 0.0 };
                d_logits[(r, c)] = wr * (probs[(r, c)] - delta);
            }
        }
    }
    RefinementLoss { loss, probs, d_logits }
}

/// The smooth-L1 penalty: quadratic inside the unit interval, linear outside.
pub fn smooth_l1(x: f64) -> f64 {
    if x.abs() < 1.0 {
        0.5 * x * x
    } else {
        x.abs() - 0.5
    }
}

/// Derivative of [`smooth_l1`].
pub fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

/// Weighted mean smooth-L1 over offset 4-tuples of the positive proposals.
///
/// Positives without a regression reference must be excluded before the call;
/// an empty slice yields loss 0. Returns the gradient with respect to the
/// predicted offsets.
pub fn box_loss(pred: &[Offsets], target: &[Offsets], weights: &[f64]) -> (f64, Vec<Offsets>) {
    assert_eq!(pred.len(), target.len());
    assert_eq!(pred.len(), weights.len());
    if pred.is_empty() {
        return (0.0, Vec::new());
    }
    let inv = 1.0 / pred.len() as f64;
    let mut loss = 0.0;
    let mut grads = vec![[0.0; 4]; pred.len()];
    for r in 0..pred.len() {
        for j in 0..4 {
            let d = pred[r][j] - target[r][j];
            loss += weights[r] * inv * smooth_l1(d);
            grads[r][j] = weights[r] * inv * smooth_l1_grad(d);
        }
    }
    (loss, grads)
}

/// One training step's loss components and their weighted total.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossBreakdown {
    pub l_base: f64,
    pub l_ref: Vec<f64>,
    pub l_box: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub total: f64,
}

/// Combines the parts: `total = l_base + lambda1 * sum(l_ref) + lambda2 * l_box`.
pub fn total_loss(l_base: f64, l_ref: Vec<f64>, l_box: f64, lambda1: f64, lambda2: f64) -> LossBreakdown {
    let total = l_base + lambda1 * l_ref.iter().sum::<f64>() + lambda2 * l_box;
    LossBreakdown {
        l_base,
        l_ref,
        l_box,
        lambda1,
        lambda2,
        total,
    }
}
