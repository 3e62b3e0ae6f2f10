use rand::Rng;

use crate::data::{EntityId, Triplet};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Head,
    Tail,
    /// Head and tail replaced together.
    Both,
}

/// How a negative is formed from a positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionMode {
    /// Replace the head or the tail, each with probability ½.
    #[default]
    OneSide,
    /// Replace both ends.
    Both,
}

/// One corrupted copy of a positive triplet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Corruption {
    pub triplet: Triplet,
    pub side: Side,
}

pub type NegativeBatch = Vec<Corruption>;

/// Draws `n_neg` one-sided corruptions of `t`.
///
/// Each corruption replaces the head or the tail (probability ½ each) by an
/// entity drawn uniformly from the other `num_entities − 1`. Known true
/// triplets are not filtered out.
pub fn sample_negatives<R: Rng + ?Sized>(
    t: &Triplet,
    n_neg: usize,
    num_entities: usize,
    rng: &mut R,
) -> NegativeBatch {
    sample_negatives_with(t, n_neg, num_entities, CorruptionMode::OneSide, rng)
}

/// [`sample_negatives`] with an explicit corruption mode.
pub fn sample_negatives_with<R: Rng + ?Sized>(
    t: &Triplet,
    n_neg: usize,
    num_entities: usize,
    mode: CorruptionMode,
    rng: &mut R,
) -> NegativeBatch {
    assert!(num_entities >= 2, "negative sampling needs at least two entities");
    if mode == CorruptionMode::Both {
        return (0..n_neg)
            .map(|_| {
                let head = other_entity(t.head, num_entities, rng);
                let tail = other_entity(t.tail, num_entities, rng);
                Corruption {
                    triplet: Triplet::new(head, t.relation, tail),
                    side: Side::Both,
                }
            })
            .collect();
    }
    (0..n_neg)
        .map(|_| {
            let side = if rng.gen_bool(0.5) { Side::Head } else { Side::Tail };
            let triplet = if side == Side::Head {
                Triplet::new(other_entity(t.head, num_entities, rng), t.relation, t.tail)
            } else {
                Triplet::new(t.head, t.relation, other_entity(t.tail, num_entities, rng))
            };
            Corruption { triplet, side }
        })
        .collect()
}

fn other_entity<R: Rng + ?Sized>(original: EntityId, num_entities: usize, rng: &mut R) -> EntityId {
    let e = rng.gen_range(0..num_entities - 1);
    if e >= original {
        e + 1
    } else {
        e
    }
}
