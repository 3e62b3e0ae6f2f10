//! Test-only oracles, independent of the blockwise code paths they check.
#![allow(dead_code)]

use rand::Rng;
use seme_core::data::{RuleConstraint, RuleTarget, Triplet};
use seme_core::model::{BlockShape, Model, ModelConfig, Variant};
use seme_core::train::{Corruption, LossConfig};

/// The `(nk) × (nk)` block-diagonal matrix (row-major) and the shift vector
/// a relation stands for.
pub fn dense_relation(shape: BlockShape, params: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (k, n) = (shape.k, shape.n);
    let d = n * k;
    let mut m = vec![0.0; d * d];
    let mut shift = vec![0.0; d];
    for b in 0..n {
        let block = match shape.variant {
            Variant::Full => &params[b * k * k..(b + 1) * k * k],
            Variant::Shared | Variant::SharedShift => &params[..k * k],
        };
        for i in 0..k {
            for j in 0..k {
                m[(b * k + i) * d + b * k + j] = block[i * k + j];
            }
        }
        if shape.variant == Variant::SharedShift {
            let off = k * k + b * k;
            shift[b * k..(b + 1) * k].copy_from_slice(&params[off..off + k]);
        }
    }
    (m, shift)
}

pub fn dense_matvec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d).map(|i| (0..d).map(|j| m[i * d + j] * v[j]).sum()).collect()
}

pub fn dense_matmul(x: &[f64], y: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = (0..d).map(|l| x[i * d + l] * y[l * d + j]).sum();
        }
    }
    out
}

/// `‖D_r v_h + s_r − v_t‖` through the dense matrix.
pub fn dense_score(model: &Model, t: &Triplet) -> f64 {
    let (m, shift) = dense_relation(model.shape(), model.relation(t.relation));
    let mv = dense_matvec(&m, model.entity(t.head));
    mv.iter()
        .zip(&shift)
        .zip(model.entity(t.tail))
        .map(|((a, s), b)| (a + s - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Apply `a` then `b` through dense matrices, then read back the variant's
/// parameter vector.
pub fn dense_compose(shape: BlockShape, a: &[f64], b: &[f64]) -> Vec<f64> {
    let d = shape.dim();
    let (ma, sa) = dense_relation(shape, a);
    let (mb, sb) = dense_relation(shape, b);
    let m = dense_matmul(&mb, &ma, d);
    let s: Vec<f64> = dense_matvec(&mb, &sa).iter().zip(&sb).map(|(x, y)| x + y).collect();
    extract_params(shape, &m, &s)
}

pub fn extract_params(shape: BlockShape, m: &[f64], s: &[f64]) -> Vec<f64> {
    let (k, n) = (shape.k, shape.n);
    let d = n * k;
    let blocks = match shape.variant {
        Variant::Full => n,
        _ => 1,
    };
    let mut out = Vec::new();
    for b in 0..blocks {
        for i in 0..k {
            for j in 0..k {
                out.push(m[(b * k + i) * d + b * k + j]);
            }
        }
    }
    if shape.variant == Variant::SharedShift {
        out.extend_from_slice(s);
    }
    out
}

pub fn identity_params(shape: BlockShape) -> Vec<f64> {
    let d = shape.dim();
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    extract_params(shape, &m, &vec![0.0; d])
}

fn naive_log_sigmoid(x: f64) -> f64 {
    (1.0 / (1.0 + (-x).exp())).ln()
}

/// Loss with the adversarial weights held at the given values.
pub fn naive_loss(model: &Model, t: &Triplet, negs: &[Corruption], weights: &[f64], cfg: &LossConfig) -> f64 {
    let pos = dense_score(model, t);
    let mut neg = 0.0;
    for (c, w) in negs.iter().zip(weights) {
        neg += w * naive_log_sigmoid(dense_score(model, &c.triplet) - cfg.gamma);
    }
    -(naive_log_sigmoid(cfg.gamma - pos) + cfg.p_loss * neg) / (cfg.p_loss + 1.0)
}

/// Naive softmax of `α(γ − s)`, margin included.
pub fn naive_weights(scores: &[f64], alpha: f64, gamma: f64) -> Vec<f64> {
    let e: Vec<f64> = scores.iter().map(|s| (alpha * (gamma - s)).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

pub fn naive_penalty(model: &Model, rules: &[RuleConstraint]) -> f64 {
    let shape = model.shape();
    rules
        .iter()
        .map(|r| {
            let c = dense_compose(shape, model.relation(r.left_a), model.relation(r.left_b));
            let target = match r.target {
                RuleTarget::Identity => identity_params(shape),
                RuleTarget::Relation(x) => model.relation(x).to_vec(),
            };
            r.weight
                * c.iter()
                    .zip(&target)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt()
        })
        .sum()
}

/// Which table a parameter lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    Entity,
    Relation,
}

/// Central differences of `f` w.r.t. every entry of both tables.
pub fn central_differences(model: &Model, step: f64, f: impl Fn(&Model) -> f64) -> Vec<(Table, usize, usize, f64)> {
    let mut out = Vec::new();
    let cfg = *model.config();
    let mut probe = model.clone();
    for e in 0..cfg.num_entities {
        for i in 0..cfg.dim() {
            let x = probe.entity(e)[i];
            probe.entity_mut(e)[i] = x + step;
            let up = f(&probe);
            probe.entity_mut(e)[i] = x - step;
            let down = f(&probe);
            probe.entity_mut(e)[i] = x;
            out.push((Table::Entity, e, i, (up - down) / (2.0 * step)));
        }
    }
    for r in 0..cfg.num_relations {
        for i in 0..cfg.params_per_relation() {
            let x = probe.relation(r)[i];
            probe.relation_mut(r)[i] = x + step;
            let up = f(&probe);
            probe.relation_mut(r)[i] = x - step;
            let down = f(&probe);
            probe.relation_mut(r)[i] = x;
            out.push((Table::Relation, r, i, (up - down) / (2.0 * step)));
        }
    }
    out
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Random model with every entry uniform in `[-scale, scale]`.
pub fn random_model<R: Rng>(rng: &mut R, variant: Variant, k: usize, n: usize, ne: usize, nr: usize, scale: f64) -> Model {
    let config = ModelConfig {
        variant,
        k,
        n,
        num_entities: ne,
        num_relations: nr,
    };
    let ents = (0..config.entity_table_len()).map(|_| rng.gen_range(-scale..=scale)).collect();
    let rels = (0..config.relation_table_len()).map(|_| rng.gen_range(-scale..=scale)).collect();
    Model::from_tables(config, ents, rels).unwrap()
}

pub const VARIANTS: [Variant; 3] = [Variant::Full, Variant::Shared, Variant::SharedShift];

/// `(k, n)` pairs with `n·k ≤ 8`.
pub const SMALL_SHAPES: [(usize, usize); 8] = [(1, 1), (1, 4), (2, 1), (2, 2), (2, 3), (2, 4), (3, 2), (4, 2)];

/// Max relative error between analytic and finite-difference gradients of
/// the self-adversarial loss on one random instance.
pub fn loss_gradient_error<R: Rng>(rng: &mut R, variant: Variant, k: usize, n: usize) -> f64 {
    use seme_core::train::{adversarial_weights, positive_negative_loss, sample_negatives, Gradients};
    let ne = rng.gen_range(3..6);
    let nr = rng.gen_range(1..3);
    let model = random_model(rng, variant, k, n, ne, nr, 1.0);
    let cfg = LossConfig {
        gamma: rng.gen_range(0.5..4.0),
        alpha: rng.gen_range(0.0..2.0),
        n_neg: rng.gen_range(1..5),
        p_loss: rng.gen_range(0.0..6.0),
        corruption: Default::default(),
    };
    let t = Triplet::new(rng.gen_range(0..ne), rng.gen_range(0..nr), rng.gen_range(0..ne));
    let negs = sample_negatives(&t, cfg.n_neg, ne, rng);

    let mut grads = Gradients::for_model(&model);
    let out = positive_negative_loss(&model, &t, &negs, &cfg, 1.0, &mut grads);
    let weights = adversarial_weights(&out.neg_scores, cfg.alpha);
    let fd = central_differences(&model, 1e-5, |m| naive_loss(m, &t, &negs, &weights, &cfg));
    max_error(&grads, &fd)
}

/// Same for the rule penalty, on random rules over `nr` relations.
pub fn penalty_gradient_error<R: Rng>(rng: &mut R, variant: Variant, k: usize, n: usize) -> f64 {
    use seme_core::train::{rule_regularization, Gradients};
    let nr = rng.gen_range(2..5);
    let model = random_model(rng, variant, k, n, 2, nr, 1.0);
    let rules: Vec<RuleConstraint> = (0..rng.gen_range(1..4))
        .map(|_| RuleConstraint {
            left_a: rng.gen_range(0..nr),
            left_b: rng.gen_range(0..nr),
            target: if rng.gen_bool(0.3) {
                RuleTarget::Identity
            } else {
                RuleTarget::Relation(rng.gen_range(0..nr))
            },
            weight: rng.gen_range(0.05..1.0),
        })
        .collect();
    let mut grads = Gradients::for_model(&model);
    rule_regularization(&model, &rules, 1.0, &mut grads);
    let fd = central_differences(&model, 1e-5, |m| naive_penalty(m, &rules));
    max_error(&grads, &fd)
}

fn max_error(grads: &seme_core::train::Gradients, fd: &[(Table, usize, usize, f64)]) -> f64 {
    fd.iter()
        .map(|&(table, row, i, numeric)| {
            let analytic = match table {
                Table::Entity => grads.entities.get(row).map_or(0.0, |g| g[i]),
                Table::Relation => grads.relations.get(row).map_or(0.0, |g| g[i]),
            };
            relative_error(analytic, numeric, GRAD_FLOOR)
        })
        .fold(0.0, f64::max)
}

/// Denominator floor for relative gradient errors; central differences
/// with step 1e-5 carry ~1e-10 absolute error.
pub const GRAD_FLOOR: f64 = 1e-5;

pub mod checks;
pub mod kinship;
