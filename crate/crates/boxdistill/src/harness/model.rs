//! Linear score heads and their SGD-with-momentum optimizer.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::mat::Mat;

/// One affine map `out = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    /// `out_dim x in_dim`.
    pub w: Mat,
    pub b: Vec<f64>,
}

impl LinearHead {
    /// Gaussian-initialized weights (zero biases).
    pub fn init(rng: &mut ChaCha8Rng, out_dim: usize, in_dim: usize, stddev: f64) -> Self {
        Self {
            w: Mat::from_fn(out_dim, in_dim, |_, _| stddev * normal(rng)),
            b: vec![0.0; out_dim],
        }
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    /// `feats (n x in) -> (n x out)`: one output row per sample.
    pub fn forward_rows(&self, feats: &Mat) -> Mat {
        let mut out = feats.matmul_transpose(&self.w);
        for i in 0..out.rows() {
            for j in 0..out.cols() {
                out[(i, j)] += self.b[j];
            }
        }
        out
    }

    /// `feats (n x in) -> (out x n)`: samples along columns, as the
    /// two-stream base head is laid out.
    pub fn forward_cols(&self, feats: &Mat) -> Mat {
        let mut out = self.w.matmul_transpose(feats);
        for i in 0..out.rows() {
            for j in 0..out.cols() {
                out[(i, j)] += self.b[i];
            }
        }
        out
    }
}

/// Box-Muller standard normal.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Accumulated gradient for one head.
#[derive(Debug, Clone)]
pub struct HeadGrad {
    pub d_w: Mat,
    pub d_b: Vec<f64>,
}

impl HeadGrad {
    pub fn zeros(head: &LinearHead) -> Self {
        Self {
            d_w: Mat::zeros(head.w.rows(), head.w.cols()),
            d_b: vec![0.0; head.b.len()],
        }
    }

    /// Adds `scale * d_out^T . feats` where `d_out` is `n x out` (row per
    /// sample), matching [`LinearHead::forward_rows`].
    pub fn add_rows(&mut self, feats: &Mat, d_out: &Mat, scale: f64) {
        let dw = d_out.transpose_matmul(feats);
        self.d_w.scale_add(&dw, scale);
        for i in 0..d_out.rows() {
            for j in 0..d_out.cols() {
                self.d_b[j] += scale * d_out[(i, j)];
            }
        }
    }

    /// Adds `scale * d_out . feats` where `d_out` is `out x n` (sample per
    /// column), matching [`LinearHead::forward_cols`].
    pub fn add_cols(&mut self, feats: &Mat, d_out: &Mat, scale: f64) {
        let dw = d_out.matmul(feats);
        self.d_w.scale_add(&dw, scale);
        for i in 0..d_out.rows() {
            for j in 0..d_out.cols() {
                self.d_b[i] += scale * d_out[(i, j)];
            }
        }
    }
}

/// All trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Base classification stream, `C x d`.
    pub base_cls: LinearHead,
    /// Base detection stream, `C x d`.
    pub base_det: LinearHead,
    /// K refinement heads, each `(C + 1) x d`.
    pub refine: Vec<LinearHead>,
    /// Offset regressor, `4 x d`.
    pub regressor: LinearHead,
}

impl ModelParams {
    /// Initializes all heads: Gaussian weights with standard deviation 0.01
    /// (0.001 for the regressor), zero biases.
    pub fn init(rng: &mut ChaCha8Rng, num_classes: usize, num_branches: usize, dim: usize) -> Self {
        Self {
            base_cls: LinearHead::init(rng, num_classes, dim, 0.01),
            base_det: LinearHead::init(rng, num_classes, dim, 0.01),
            refine: (0..num_branches)
                .map(|_| LinearHead::init(rng, num_classes + 1, dim, 0.01))
                .collect(),
            regressor: LinearHead::init(rng, 4, dim, 0.001),
        }
    }

    fn heads(&mut self) -> Vec<&mut LinearHead> {
        let mut heads = vec![&mut self.base_cls, &mut self.base_det];
        heads.extend(self.refine.iter_mut());
        heads.push(&mut self.regressor);
        heads
    }
}

/// Gradients for every head, in the same order as [`ModelParams::heads`].
pub struct ModelGrad {
    pub base_cls: HeadGrad,
    pub base_det: HeadGrad,
    pub refine: Vec<HeadGrad>,
    pub regressor: HeadGrad,
}

impl ModelGrad {
    pub fn zeros(params: &ModelParams) -> Self {
        Self {
            base_cls: HeadGrad::zeros(&params.base_cls),
            base_det: HeadGrad::zeros(&params.base_det),
            refine: params.refine.iter().map(HeadGrad::zeros).collect(),
            regressor: HeadGrad::zeros(&params.regressor),
        }
    }

    fn grads(&self) -> Vec<&HeadGrad> {
        let mut grads = vec![&self.base_cls, &self.base_det];
        grads.extend(self.refine.iter());
        grads.push(&self.regressor);
        grads
    }
}

/// SGD with momentum and L2 weight decay (decay on weights, not biases).
pub struct Sgd {
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<HeadGrad>,
}

impl Sgd {
    pub fn new(params: &ModelParams, momentum: f64, weight_decay: f64) -> Self {
        let template = ModelGrad::zeros(params);
        Self {
            momentum,
            weight_decay,
            velocity: template
                .grads()
                .into_iter()
                .map(|g| HeadGrad {
                    d_w: g.d_w.clone(),
                    d_b: g.d_b.clone(),
                })
                .collect(),
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grad: &ModelGrad, lr: f64) {
        let grads = grad.grads();
        let heads = params.heads();
        for ((head, g), v) in heads.into_iter().zip(grads).zip(&mut self.velocity) {
            for (i, (w, gw)) in head
                .w
                .data_mut()
                .iter_mut()
                .zip(g.d_w.data())
                .enumerate()
            {
                let vel = &mut v.d_w.data_mut()[i];
                *vel = self.momentum * *vel - lr * (gw + self.weight_decay * *w);
                *w += *vel;
            }
            for (i, (b, gb)) in head.b.iter_mut().zip(&g.d_b).enumerate() {
                let vel = &mut v.d_b[i];
                *vel = self.momentum * *vel - lr * gb;
                *b += *vel;
            }
        }
    }
}
