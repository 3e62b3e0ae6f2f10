//! Rule penalty `Σ_i λ_i ‖params(a_i ∘ b_i) − params(c_i)‖₂` and its gradient.

use crate::data::{RuleConstraint, RuleTarget};
use crate::model::{l2_norm, Model, Variant};

use super::grad::Gradients;

/// Returns the penalty and adds `grad_scale · ∂penalty/∂θ` into `grads`.
///
/// Gradients reach both composed relations and the target when it is a
/// learned relation. A rule whose residual is exactly zero contributes a
/// zero subgradient.
pub fn rule_regularization(model: &Model, rules: &[RuleConstraint], grad_scale: f64, grads: &mut Gradients) -> f64 {
    let shape = model.shape();
    let k = shape.k;
    let kk = k * k;
    let mut penalty = 0.0;
    for rule in rules {
        if rule.weight == 0.0 {
            continue;
        }
        let a = model.relation(rule.left_a);
        let b = model.relation(rule.left_b);
        let mut diff = shape.compose(a, b);
        let target = model.target_params(rule.target);
        for (d, t) in diff.iter_mut().zip(&target.data) {
            *d -= t;
        }
        let residual = l2_norm(&diff);
        penalty += rule.weight * residual;
        if residual < super::loss::SCORE_GRAD_EPS {
            continue;
        }
        // G = λ R / ‖R‖, the gradient w.r.t. the composed parameters.
        let scale = grad_scale * rule.weight / residual;
        let g: Vec<f64> = diff.iter().map(|d| d * scale).collect();

        let mut grad_a = vec![0.0; a.len()];
        let mut grad_b = vec![0.0; b.len()];
        // C = B·A per stored matrix: ∂/∂A = Bᵀ G, ∂/∂B = G Aᵀ.
        for m in 0..shape.num_matrices() {
            let off = m * kk;
            let (am, bm, gm) = (&a[off..off + kk], &b[off..off + kk], &g[off..off + kk]);
            for i in 0..k {
                for j in 0..k {
                    let mut ga = 0.0;
                    let mut gb = 0.0;
                    for l in 0..k {
                        ga += bm[l * k + i] * gm[l * k + j];
                        gb += gm[i * k + l] * am[j * k + l];
                    }
                    grad_a[off + i * k + j] += ga;
                    grad_b[off + i * k + j] += gb;
                }
            }
        }
        if shape.variant == Variant::SharedShift {
            // δ_c = B δ_a + δ_b per block.
            let bm = &b[..kk];
            for blk in 0..shape.n {
                let off = kk + blk * k;
                let gd = &g[off..off + k];
                let da = &a[off..off + k];
                for i in 0..k {
                    for j in 0..k {
                        grad_b[i * k + j] += gd[i] * da[j];
                        grad_a[off + j] += bm[i * k + j] * gd[i];
                    }
                    grad_b[off + i] += gd[i];
                }
            }
        }

        for (dst, src) in grads.relations.row_mut(rule.left_a).iter_mut().zip(&grad_a) {
            *dst += src;
        }
        for (dst, src) in grads.relations.row_mut(rule.left_b).iter_mut().zip(&grad_b) {
            *dst += src;
        }
        if let RuleTarget::Relation(c) = rule.target {
            for (dst, src) in grads.relations.row_mut(c).iter_mut().zip(&g) {
                *dst -= src;
            }
        }
    }
    penalty
}
