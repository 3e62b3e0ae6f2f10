//! Self-adversarial negative sampling loss and its gradient.
//!
//! For a positive score `s` and negative scores `s_k`:
//!
//! ```text
//! L = −1/(p+1) · ( log σ(γ − s) + p · Σ_k w_k · log σ(s_k − γ) )
//! w = softmax(α · (γ − s_k))
//! ```
//!
//! The weights `w` are constants under differentiation.

use serde::{Deserialize, Serialize};

use crate::data::Triplet;
use crate::error::{Error, Result};
use crate::model::Model;

use super::grad::Gradients;
use super::sampling::{Corruption, CorruptionMode};

/// Below this score the L2-norm gradient is taken to be zero.
pub const SCORE_GRAD_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    /// Margin γ.
    pub gamma: f64,
    /// Adversarial inverse temperature α.
    pub alpha: f64,
    /// Negatives per positive.
    pub n_neg: usize,
    /// Weight of the negative term relative to the positive one.
    pub p_loss: f64,
    #[serde(default)]
    pub corruption: CorruptionMode,
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_neg == 0 {
            return Err(Error::Config("loss.n_neg must be at least 1".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Config(format!("loss.gamma must be positive, got {}", self.gamma)));
        }
        if !(self.p_loss >= 0.0) {
            return Err(Error::Config(format!("loss.p_loss must be non-negative, got {}", self.p_loss)));
        }
        if !self.alpha.is_finite() {
            return Err(Error::Config("loss.alpha must be finite".into()));
        }
        Ok(())
    }
}

/// `log σ(x) = −softplus(−x)`, stable for large `|x|`.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax of `α·(γ − s_k)` over the negatives. The margin cancels, so it
/// is not an argument.
pub fn adversarial_weights(neg_scores: &[f64], alpha: f64) -> Vec<f64> {
    if neg_scores.is_empty() {
        return Vec::new();
    }
    let logits: Vec<f64> = neg_scores.iter().map(|s| -alpha * s).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Loss value from precomputed scores and weights.
pub fn loss_from_scores(pos_score: f64, neg_scores: &[f64], weights: &[f64], cfg: &LossConfig) -> f64 {
    let neg: f64 = neg_scores
        .iter()
        .zip(weights)
        .map(|(s, w)| w * log_sigmoid(s - cfg.gamma))
        .sum();
    -(log_sigmoid(cfg.gamma - pos_score) + cfg.p_loss * neg) / (cfg.p_loss + 1.0)
}

/// Residual `M_r v_h (+δ) − v_t` of one triplet, written into `out`.
#[inline]
fn residual_into(model: &Model, t: &Triplet, out: &mut [f64]) -> f64 {
    let shape = model.shape();
    shape.apply_into(model.relation(t.relation), model.entity(t.head), out);
    for (o, x) in out.iter_mut().zip(model.entity(t.tail)) {
        *o -= x;
    }
    crate::model::l2_norm(out)
}

/// Adds `coeff · ∂s/∂θ` for the score `s` of `t` given its residual.
pub(crate) fn accumulate_score_grad(
    model: &Model,
    t: &Triplet,
    residual: &[f64],
    score: f64,
    coeff: f64,
    grads: &mut Gradients,
) {
    if score < SCORE_GRAD_EPS || coeff == 0.0 {
        return;
    }
    let shape = model.shape();
    let k = shape.k;
    let scale = coeff / score;
    let params = model.relation(t.relation);
    let vh = model.entity(t.head);

    {
        let gt = grads.entities.row_mut(t.tail);
        for (g, u) in gt.iter_mut().zip(residual) {
            *g -= scale * u;
        }
    }
    {
        let gh = grads.entities.row_mut(t.head);
        for b in 0..shape.n {
            let m = &params[shape.matrix_offset(b)..][..k * k];
            let ub = &residual[b * k..(b + 1) * k];
            let ghb = &mut gh[b * k..(b + 1) * k];
            for i in 0..k {
                let gi = scale * ub[i];
                for j in 0..k {
                    ghb[j] += m[i * k + j] * gi;
                }
            }
        }
    }
    let gr = grads.relations.row_mut(t.relation);
    for b in 0..shape.n {
        let ub = &residual[b * k..(b + 1) * k];
        let vb = &vh[b * k..(b + 1) * k];
        let moff = shape.matrix_offset(b);
        for i in 0..k {
            let gi = scale * ub[i];
            let row = &mut gr[moff + i * k..moff + (i + 1) * k];
            for (g, v) in row.iter_mut().zip(vb) {
                *g += gi * v;
            }
        }
        if let Some(off) = shape.shift_offset(b) {
            for (g, u) in gr[off..off + k].iter_mut().zip(ub) {
                *g += scale * u;
            }
        }
    }
}

/// Scores of a positive and its negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletLoss {
    pub loss: f64,
    pub pos_score: f64,
    pub neg_scores: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Loss of one positive triplet against its negatives.
///
/// Gradients, multiplied by `grad_scale`, are added into `grads`.
pub fn positive_negative_loss(
    model: &Model,
    t: &Triplet,
    negs: &[Corruption],
    cfg: &LossConfig,
    grad_scale: f64,
    grads: &mut Gradients,
) -> TripletLoss {
    let dim = model.shape().dim();
    let mut residuals = vec![0.0; dim * (negs.len() + 1)];
    let (pos_res, neg_res) = residuals.split_at_mut(dim);
    let pos_score = residual_into(model, t, pos_res);
    let neg_scores: Vec<f64> = negs
        .iter()
        .zip(neg_res.chunks_exact_mut(dim))
        .map(|(c, out)| residual_into(model, &c.triplet, out))
        .collect();
    let weights = adversarial_weights(&neg_scores, cfg.alpha);
    let loss = loss_from_scores(pos_score, &neg_scores, &weights, cfg);

    // d/dx log σ(x) = σ(−x)
    let norm = grad_scale / (cfg.p_loss + 1.0);
    let pos_coeff = norm * sigmoid(pos_score - cfg.gamma);
    accumulate_score_grad(model, t, &residuals[..dim], pos_score, pos_coeff, grads);
    for (idx, c) in negs.iter().enumerate() {
        let coeff = -norm * cfg.p_loss * weights[idx] * sigmoid(cfg.gamma - neg_scores[idx]);
        let res = &residuals[dim * (idx + 1)..dim * (idx + 2)];
        accumulate_score_grad(model, &c.triplet, res, neg_scores[idx], coeff, grads);
    }

    TripletLoss {
        loss,
        pos_score,
        neg_scores,
        weights,
    }
}
