//! Top-down class confidence, the adaptive bottom-up/top-down combination
//! and the decay schedules for its impact factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::BaseScores;

/// Decay family for the impact factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum AlphaFamily {
    /// `alpha = value` for the whole run.
    Constant { value: f64 },
    /// `alpha = 1 - (n / N)^gamma`.
    Polynomial { gamma: f64 },
    /// `alpha = (1 + cos(pi * n / N)) / 2`.
    Cosine,
}

/// An impact-factor schedule over `0..=total_steps`, with a warm-up prefix
/// pinned to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule {
    pub family: AlphaFamily,
    pub warmup_steps: u64,
    pub total_steps: u64,
}

impl AlphaSchedule {
    pub fn new(family: AlphaFamily, warmup_steps: u64, total_steps: u64) -> Self {
        Self {
            family,
            warmup_steps,
            total_steps,
        }
    }

    /// The impact factor at step `n`. Zero during warm-up, then the closed
    /// form of the family clamped to `[0, 1]`.
    pub fn alpha_at(&self, n: u64) -> Result<f64> {
        if n > self.total_steps {
            return Err(Error::StepOutOfRange {
                step: n,
                total: self.total_steps,
            });
        }
        if n < self.warmup_steps {
            return Ok(0.0);
        }
        let t = n as f64 / self.total_steps as f64;
        let alpha = match self.family {
            AlphaFamily::Constant { value } => value,
            AlphaFamily::Polynomial { gamma } => 1.0 - t.powf(gamma),
            AlphaFamily::Cosine => (1.0 + (std::f64::consts::PI * t).cos()) / 2.0,
        };
        Ok(alpha.clamp(0.0, 1.0))
    }
}

/// A validated one-hot label over `num_classes` entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneHot {
    class: usize,
    num_classes: usize,
}

impl OneHot {
    pub fn new(class: usize, num_classes: usize) -> Result<Self> {
        if class >= num_classes {
            return Err(Error::NotOneHot);
        }
        Ok(Self { class, num_classes })
    }

    /// Validates a dense vector: exactly one entry 1, all others 0.
    pub fn from_dense(v: &[f64]) -> Result<Self> {
        let mut hot = None;
        for (i, &x) in v.iter().enumerate() {
            if x == 1.0 {
                if hot.replace(i).is_some() {
                    return Err(Error::NotOneHot);
                }
            } else if x != 0.0 {
                return Err(Error::NotOneHot);
            }
        }
        match hot {
            Some(class) => Ok(Self {
                class,
                num_classes: v.len(),
            }),
            None => Err(Error::NotOneHot),
        }
    }

    pub fn class(&self) -> usize {
        self.class
    }
}

/// Per-proposal class probabilities of one branch over `C + 1` classes
/// (class 0 is background).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTensor {
    num_foreground: usize,
    /// `|R|` rows of `C + 1` entries each.
    rows: Vec<Vec<f64>>,
}

impl ScoreTensor {
    /// Wraps refinement-branch probabilities; every row must be a
    /// distribution over `C + 1` classes.
    pub fn from_probabilities(num_foreground: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        for row in &rows {
            if row.len() != num_foreground + 1 {
                return Err(Error::LengthMismatch {
                    expected: num_foreground + 1,
                    got: row.len(),
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-6 || row.iter().any(|&p| p < 0.0) {
                return Err(Error::InvalidParam {
                    name: "probabilities",
                    value: sum,
                    requirement: "rows sum to 1 with nonnegative entries",
                });
            }
        }
        Ok(Self { num_foreground, rows })
    }

    /// Wraps raw per-class scores that need not sum to one (e.g. the base
    /// detector's product scores with a zero background entry); only the
    /// shape and nonnegativity are checked.
    pub fn from_raw_scores(num_foreground: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        for row in &rows {
            if row.len() != num_foreground + 1 {
                return Err(Error::LengthMismatch {
                    expected: num_foreground + 1,
                    got: row.len(),
                });
            }
            if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return Err(Error::InvalidParam {
                    name: "scores",
                    value: f64::NAN,
                    requirement: "finite and nonnegative",
                });
            }
        }
        Ok(Self { num_foreground, rows })
    }

    /// Wraps a row-softmax probability matrix (`|R| x (C + 1)`), e.g. a
    /// refinement branch's output.
    pub fn from_probability_matrix(num_foreground: usize, probs: &crate::mat::Mat) -> Self {
        debug_assert_eq!(probs.cols(), num_foreground + 1);
        debug_assert!(probs
            .data()
            .chunks(probs.cols())
            .all(|row| (row.iter().sum::<f64>() - 1.0).abs() < 1e-6));
        Self {
            num_foreground,
            rows: (0..probs.rows()).map(|r| probs.row(r).to_vec()).collect(),
        }
    }

    /// Adapts the base detector's `s` matrix (`C x |R|`, no background) by
    /// prepending a zero background entry to every proposal, so the same
    /// mining code serves the first refinement branch.
    pub fn from_base_scores(scores: &BaseScores) -> Self {
        let c = scores.s.rows();
        let r = scores.s.cols();
        let rows = (0..r)
            .map(|j| {
                let mut row = Vec::with_capacity(c + 1);
                row.push(0.0);
                for i in 0..c {
                    row.push(scores.s[(i, j)]);
                }
                row
            })
            .collect();
        Self {
            num_foreground: c,
            rows,
        }
    }

    pub fn num_foreground(&self) -> usize {
        self.num_foreground
    }

    pub fn num_proposals(&self) -> usize {
        self.rows.len()
    }

    /// Score of proposal `r` for class `c` (0 = background).
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.rows[r][c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.rows[r]
    }
}

/// Top-down confidence of the current branch: the previous branch's
/// probability at each proposal's assigned label.
pub fn top_down_confidence(prev: &ScoreTensor, labels: &[OneHot]) -> Result<Vec<f64>> {
    if labels.len() != prev.num_proposals() {
        return Err(Error::LengthMismatch {
            expected: prev.num_proposals(),
            got: labels.len(),
        });
    }
    labels
        .iter()
        .enumerate()
        .map(|(r, label)| {
            if label.num_classes != prev.num_foreground + 1 {
                return Err(Error::NotOneHot);
            }
            Ok(prev.get(r, label.class()))
        })
        .collect()
}

/// Linear combination of bottom-up evidence and top-down confidence:
/// `w = alpha * o_bu + (1 - alpha) * o_td`.
///
/// With a regressor in play the caller passes the evidence looked up at the
/// regressed box while the confidence stays evaluated at the original box;
/// without one the two boxes coincide.
#[inline]
pub fn combine(o_bu: f64, o_td: f64, alpha: f64) -> f64 {
    alpha * o_bu + (1.0 - alpha) * o_td
}

/// Per-proposal objectness bookkeeping for one branch at one step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectnessReport {
    pub step: u64,
    pub branch: usize,
    pub alpha: f64,
    pub o_bu: Vec<f64>,
    pub o_td: Vec<f64>,
    pub weights: Vec<f64>,
}
