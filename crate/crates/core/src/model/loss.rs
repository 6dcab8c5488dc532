//! Training objective: `alpha * focal + (1 - alpha) * score MSE`.
//!
//! The focal term visits every cell and every class. For the gold class
//! `p* = p_c`, for the other two `p* = 1 - p_c`, and each contributes
//! `-(1 - p*)^gamma * ln(p*)`. Both terms are raw sums, not means.

use serde::{Deserialize, Serialize};

use crate::encoding::{LabelGrid, ScoreTargets};
use crate::error::{Error, Result};

use super::forward::GridPrediction;

/// `p*` is clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 0.99,
            gamma: 2.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::InvalidConfig(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Focal term for one `p*` and its derivative with respect to `p*`
/// (zero when the clamp is active).
fn focal_term(p_star: f64, gamma: f64) -> (f64, f64) {
    let clamped = p_star.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let one_minus = 1.0 - clamped;
    let ln = clamped.ln();
    let weight = if gamma == 0.0 { 1.0 } else { one_minus.powf(gamma) };
    let value = -weight * ln;
    if clamped != p_star {
        return (value, 0.0);
    }
    let d_weight = if gamma == 0.0 { 0.0 } else { -gamma * one_minus.powf(gamma - 1.0) };
    let deriv = -(d_weight * ln + weight / clamped);
    (value, deriv)
}

/// Focal loss of one cell and its gradient with respect to the three logits.
pub(super) fn focal_cell(probs: &[f64; 3], gold: usize, gamma: f64) -> (f64, [f64; 3]) {
    let mut loss = 0.0;
    let mut d_probs = [0.0; 3];
    for c in 0..3 {
        let (p_star, sign) = if c == gold { (probs[c], 1.0) } else { (1.0 - probs[c], -1.0) };
        let (v, d) = focal_term(p_star, gamma);
        loss += v;
        d_probs[c] = sign * d;
    }
    // softmax Jacobian: dL/dl_j = p_j (g_j - sum_c g_c p_c)
    let dot: f64 = (0..3).map(|c| d_probs[c] * probs[c]).sum();
    let d_logits = [0, 1, 2].map(|j| probs[j] * (d_probs[j] - dot));
    (loss, d_logits)
}

fn check_grid(pred: &GridPrediction, gold: &LabelGrid) -> Result<()> {
    if pred.size != gold.size() {
        return Err(Error::ShapeMismatch {
            expected: pred.size,
            found: gold.size(),
        });
    }
    Ok(())
}

pub fn focal_loss(pred: &GridPrediction, gold: &LabelGrid, gamma: f64) -> Result<f64> {
    check_grid(pred, gold)?;
    Ok(pred
        .probs
        .iter()
        .zip(gold.cells())
        .map(|(p, g)| {
            (0..3)
                .map(|c| {
                    let p_star = if c == g.index() { p[c] } else { 1.0 - p[c] };
                    focal_term(p_star, gamma).0
                })
                .sum::<f64>()
        })
        .sum())
}

/// Sum of squared errors over the target cells only.
pub fn score_mse(pred: &GridPrediction, targets: &ScoreTargets) -> Result<f64> {
    let mut total = 0.0;
    for (&(i, j), &y) in targets {
        if i >= pred.size || j >= pred.size {
            return Err(Error::IndexOutOfRange {
                row: i,
                col: j,
                size: pred.size,
            });
        }
        let d = pred.score(i, j) - y;
        total += d * d;
    }
    Ok(total)
}

pub fn combined_loss(
    pred: &GridPrediction,
    gold: &LabelGrid,
    targets: &ScoreTargets,
    cfg: &LossConfig,
) -> Result<f64> {
    let focal = focal_loss(pred, gold, cfg.gamma)?;
    let mse = score_mse(pred, targets)?;
    Ok(cfg.alpha * focal + (1.0 - cfg.alpha) * mse)
}

/// Per-class binary cross-entropy summed over the grid, with the same clamp.
/// Focal loss reduces to this at `gamma = 0`.
pub fn binary_cross_entropy_sum(pred: &GridPrediction, gold: &LabelGrid) -> Result<f64> {
    check_grid(pred, gold)?;
    let mut total = 0.0;
    for (p, g) in pred.probs.iter().zip(gold.cells()) {
        for (c, &pc) in p.iter().enumerate() {
            let pc = pc.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            let y = if c == g.index() { 1.0 } else { 0.0 };
            total -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
        }
    }
    Ok(total)
}
