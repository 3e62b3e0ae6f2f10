//! Randomized checks shared by the acceptance target and the topic suites.
//! Each returns the worst error it saw so callers can report and assert.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seme_core::eval::{rank_one, RankQuery};
use seme_core::model::{BlockShape, Variant};
use seme_core::train::adversarial_weights;
use seme_core::{FilterIndex, Model, ModelConfig, Triplet};

use super::{dense_compose, dense_matvec, dense_relation, dense_score, random_model, relative_error, VARIANTS};

fn random_params<R: Rng>(rng: &mut R, shape: BlockShape) -> Vec<f64> {
    (0..shape.relation_len()).map(|_| rng.gen_range(-1.5..1.5)).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AlgebraErrors {
    pub associativity: f64,
    pub homomorphism: f64,
    pub dense_compose: f64,
    /// Relative error of the blockwise score against the dense oracle.
    pub dense_score: f64,
    pub instances: usize,
}

/// `instances` random cases per variant, `n·k ≤ 20`.
pub fn algebra(instances: usize, seed: u64) -> AlgebraErrors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = AlgebraErrors::default();
    for variant in VARIANTS {
        for _ in 0..instances {
            let k = rng.gen_range(1..=4);
            let n = rng.gen_range(1..=20 / k);
            let shape = BlockShape::new(variant, k, n);
            let (a, b, c) = (
                random_params(&mut rng, shape),
                random_params(&mut rng, shape),
                random_params(&mut rng, shape),
            );
            let left = shape.compose(&a, &shape.compose(&b, &c));
            let right = shape.compose(&shape.compose(&a, &b), &c);
            out.associativity = out.associativity.max(max_abs_diff(&left, &right));

            let v: Vec<f64> = (0..shape.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut once = vec![0.0; shape.dim()];
            shape.apply_into(&shape.compose(&a, &b), &v, &mut once);
            let mut mid = vec![0.0; shape.dim()];
            let mut twice = vec![0.0; shape.dim()];
            shape.apply_into(&a, &v, &mut mid);
            shape.apply_into(&b, &mid, &mut twice);
            out.homomorphism = out.homomorphism.max(max_abs_diff(&once, &twice));

            // Dense oracle action agrees with the blockwise one.
            let (m, s) = dense_relation(shape, &a);
            let dense: Vec<f64> = dense_matvec(&m, &v).iter().zip(&s).map(|(x, y)| x + y).collect();
            shape.apply_into(&a, &v, &mut mid);
            out.homomorphism = out.homomorphism.max(max_abs_diff(&dense, &mid));

            out.dense_compose = out
                .dense_compose
                .max(max_abs_diff(&shape.compose(&a, &b), &dense_compose(shape, &a, &b)));

            let model = random_model(&mut rng, variant, k, n, 3, 2, 1.0);
            let t = Triplet::new(rng.gen_range(0..3), rng.gen_range(0..2), rng.gen_range(0..3));
            let fast = model.score(t.head, t.relation, t.tail);
            let err = relative_error(fast, dense_score(&model, &t), 1e-300);
            out.dense_score = out.dense_score.max(err);
            out.instances += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SoftmaxErrors {
    pub sum_to_one: f64,
    pub shift_invariance: f64,
    pub uniform_at_zero: f64,
    /// Against the naive softmax of `α(γ − s)`, margin included.
    pub naive: f64,
}

pub fn softmax(instances: usize, seed: u64) -> SoftmaxErrors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SoftmaxErrors::default();
    for _ in 0..instances {
        let len = rng.gen_range(1..130);
        let scores: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..30.0)).collect();
        let alpha = rng.gen_range(0.0..2.0);
        let gamma = rng.gen_range(0.0..12.0);
        let w = adversarial_weights(&scores, alpha);
        out.sum_to_one = out.sum_to_one.max((w.iter().sum::<f64>() - 1.0).abs());

        let shift = rng.gen_range(-50.0..50.0);
        let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
        out.shift_invariance = out
            .shift_invariance
            .max(max_abs_diff(&w, &adversarial_weights(&shifted, alpha)));

        let flat = adversarial_weights(&scores, 0.0);
        let uniform = vec![1.0 / len as f64; len];
        out.uniform_at_zero = out.uniform_at_zero.max(max_abs_diff(&flat, &uniform));

        out.naive = out
            .naive
            .max(max_abs_diff(&w, &super::naive_weights(&scores, alpha, gamma)));
    }
    out
}

/// Exhaustive rank: score every candidate through the dense oracle, drop
/// filtered ones, sort, and take the mean position of the answer's tie group.
pub fn brute_force_rank(model: &Model, query: &RankQuery, known: &HashSet<Triplet>) -> f64 {
    let t = query.triplet;
    let answer = query.answer();
    let candidate = |e: usize| match query.direction {
        seme_core::Direction::PredictTail => Triplet::new(t.head, t.relation, e),
        seme_core::Direction::PredictHead => Triplet::new(e, t.relation, t.tail),
    };
    let mut scores: Vec<f64> = (0..model.config().num_entities)
        .filter(|&e| e == answer || !known.contains(&candidate(e)))
        .map(|e| dense_score(model, &candidate(e)))
        .collect();
    let target = dense_score(model, &candidate(answer));
    scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let first = scores.iter().position(|&s| s == target).unwrap();
    let last = scores.iter().rposition(|&s| s == target).unwrap();
    // 1-based positions first+1 ..= last+1; the answer counts itself once.
    (first + last) as f64 / 2.0 + 1.0
}

/// Toy graph with small-integer parameters, so scores are exact and ties
/// are common.
pub fn toy_graph<R: Rng>(rng: &mut R) -> (Model, Vec<Triplet>) {
    let variant = VARIANTS[rng.gen_range(0..3)];
    let k = rng.gen_range(1..=3);
    let n = rng.gen_range(1..=3);
    let config = ModelConfig {
        variant,
        k,
        n,
        num_entities: rng.gen_range(5..=20),
        num_relations: rng.gen_range(1..=4),
    };
    let ents = (0..config.entity_table_len()).map(|_| rng.gen_range(-2..=2) as f64).collect();
    let rels = (0..config.relation_table_len()).map(|_| rng.gen_range(-1..=1) as f64).collect();
    let model = Model::from_tables(config, ents, rels).unwrap();
    let facts: HashSet<Triplet> = (0..rng.gen_range(5..40))
        .map(|_| {
            Triplet::new(
                rng.gen_range(0..config.num_entities),
                rng.gen_range(0..config.num_relations),
                rng.gen_range(0..config.num_entities),
            )
        })
        .collect();
    let mut facts: Vec<Triplet> = facts.into_iter().collect();
    facts.sort_by_key(|t| (t.head, t.relation, t.tail));
    (model, facts)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RankingAgreement {
    pub queries: usize,
    pub mismatches: usize,
}

/// Filtered and raw queries on fresh toy graphs until `queries` are done.
pub fn ranking(queries: usize, seed: u64) -> RankingAgreement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = RankingAgreement::default();
    let empty = HashSet::new();
    while out.queries < queries {
        let (model, facts) = toy_graph(&mut rng);
        let filter = FilterIndex::new(&facts);
        let known: HashSet<Triplet> = facts.iter().copied().collect();
        for t in &facts {
            for q in [RankQuery::tail(*t), RankQuery::head(*t)] {
                let filtered = rank_one(&model, &q, Some(&filter)) == brute_force_rank(&model, &q, &known);
                let raw = rank_one(&model, &q, None) == brute_force_rank(&model, &q, &empty);
                out.mismatches += usize::from(!filtered) + usize::from(!raw);
                out.queries += 2;
            }
        }
    }
    out
}

/// Fraction of initialized blocks within Frobenius distance 0.5 of the
/// identity, and the entity-mean z-score, over `seeds` seeds.
pub fn init_statistics(seeds: u64, variant: Variant, k: usize, n: usize, gamma: f64) -> (f64, f64) {
    let config = ModelConfig {
        variant,
        k,
        n,
        num_entities: 50,
        num_relations: 4,
    };
    let scheme = seme_core::InitScheme::for_margin(gamma, &config);
    let shape = config.shape();
    let (mut near, mut blocks) = (0usize, 0usize);
    let (mut sum, mut count) = (0.0, 0usize);
    for seed in 0..seeds {
        let model = Model::init(config, scheme, seed).unwrap();
        for r in 0..config.num_relations {
            let params = model.relation(r);
            for b in 0..shape.num_matrices() {
                let off = shape.matrix_offset(b);
                let dist: f64 = (0..k * k)
                    .map(|i| {
                        let id = if i / k == i % k { 1.0 } else { 0.0 };
                        (params[off + i] - id).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt();
                near += usize::from(dist < 0.5);
                blocks += 1;
            }
        }
        sum += model.entity_table().iter().sum::<f64>();
        count += model.entity_table().len();
    }
    // Uniform on [-a, a] has variance a²/3.
    let sigma_mean = scheme.entity_range / (3.0 * count as f64).sqrt();
    (near as f64 / blocks as f64, (sum / count as f64) / sigma_mean)
}
