//! Link prediction ranking: MR, MRR and Hits@{1,3,10}.
//!
//! Each test triplet yields a tail query `(h, r, ?)` and a head query
//! `(?, r, t)`. Every entity is a candidate. Under the filtered protocol,
//! candidates that form a known true triplet (other than the answer itself)
//! are dropped. Ties with the answer count half:
//! `rank = 1 + #better + #tied / 2`.

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;

use crate::data::{EntityId, FilterIndex, Triplet};
use crate::error::{Error, Result};
use crate::model::{distance, Model};

pub const HITS_AT: [usize; 3] = [1, 3, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    PredictTail,
    PredictHead,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::PredictTail => "tail",
            Direction::PredictHead => "head",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RankQuery {
    pub triplet: Triplet,
    pub direction: Direction,
}

impl RankQuery {
    pub fn tail(triplet: Triplet) -> Self {
        Self {
            triplet,
            direction: Direction::PredictTail,
        }
    }

    pub fn head(triplet: Triplet) -> Self {
        Self {
            triplet,
            direction: Direction::PredictHead,
        }
    }

    pub fn answer(&self) -> EntityId {
        match self.direction {
            Direction::PredictTail => self.triplet.tail,
            Direction::PredictHead => self.triplet.head,
        }
    }

    fn known_answers<'a>(&self, filter: &'a FilterIndex) -> Option<&'a HashSet<EntityId>> {
        let t = &self.triplet;
        match self.direction {
            Direction::PredictTail => filter.tail_set(t.head, t.relation),
            Direction::PredictHead => filter.head_set(t.relation, t.tail),
        }
    }
}

/// Rank from the candidates' scores, given the answer's score.
fn rank_from_counts(better: usize, ties: usize) -> f64 {
    1.0 + better as f64 + ties as f64 / 2.0
}

/// Filtered (or raw, with `filter = None`) rank of the query's answer.
pub fn rank_one(model: &Model, query: &RankQuery, filter: Option<&FilterIndex>) -> f64 {
    let shape = model.shape();
    let t = &query.triplet;
    let answer = query.answer();
    let known = filter.and_then(|f| query.known_answers(f));
    let skip = |e: EntityId| e == answer || known.is_some_and(|s| s.contains(&e));

    let mut better = 0;
    let mut ties = 0;
    let mut tally = |s: f64, target: f64| {
        if s < target {
            better += 1;
        } else if s == target {
            ties += 1;
        }
    };
    match query.direction {
        Direction::PredictTail => {
            let projected = model.apply_relation(t.relation, model.entity(t.head));
            let target = distance(&projected, model.entity(answer));
            for e in 0..model.config().num_entities {
                if !skip(e) {
                    tally(distance(&projected, model.entity(e)), target);
                }
            }
        }
        Direction::PredictHead => {
            let mut buf = vec![0.0; shape.dim()];
            let params = model.relation(t.relation);
            let tail = model.entity(t.tail);
            shape.apply_into(params, model.entity(answer), &mut buf);
            let target = distance(&buf, tail);
            for e in 0..model.config().num_entities {
                if !skip(e) {
                    shape.apply_into(params, model.entity(e), &mut buf);
                    tally(distance(&buf, tail), target);
                }
            }
        }
    }
    rank_from_counts(better, ties)
}

/// Aggregates over a set of ranks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSummary {
    pub count: usize,
    pub mr: f64,
    pub mrr: f64,
    /// Hits at 1, 3, 10.
    pub hits: [f64; 3],
}

impl RankSummary {
    pub fn from_ranks(ranks: &[f64]) -> Option<Self> {
        if ranks.is_empty() {
            return None;
        }
        let n = ranks.len() as f64;
        let mr = ranks.iter().sum::<f64>() / n;
        let mrr = ranks.iter().map(|r| 1.0 / r).sum::<f64>() / n;
        let hits = HITS_AT.map(|k| ranks.iter().filter(|&&r| r <= k as f64).count() as f64 / n);
        Some(Self {
            count: ranks.len(),
            mr,
            mrr,
            hits,
        })
    }

    pub fn hits_at(&self, n: usize) -> Option<f64> {
        HITS_AT.iter().position(|&k| k == n).map(|i| self.hits[i])
    }
}

impl fmt::Display for RankSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "MR {:.3}  MRR {:.4}  H@1 {:.4}  H@3 {:.4}  H@10 {:.4}  ({} queries)",
            self.mr, self.mrr, self.hits[0], self.hits[1], self.hits[2], self.count
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    /// Queries in evaluation order (tail then head per triplet) with their ranks.
    pub ranks: Vec<(RankQuery, f64)>,
    pub overall: RankSummary,
    pub tail: RankSummary,
    pub head: RankSummary,
}

impl RankReport {
    pub fn from_ranks(ranks: Vec<(RankQuery, f64)>) -> Result<Self> {
        let pick = |d: Direction| -> Vec<f64> {
            ranks
                .iter()
                .filter(|(q, _)| q.direction == d)
                .map(|(_, r)| *r)
                .collect()
        };
        let all: Vec<f64> = ranks.iter().map(|(_, r)| *r).collect();
        let overall = RankSummary::from_ranks(&all).ok_or_else(|| Error::Eval("empty split".into()))?;
        let tail = RankSummary::from_ranks(&pick(Direction::PredictTail)).unwrap_or(overall);
        let head = RankSummary::from_ranks(&pick(Direction::PredictHead)).unwrap_or(overall);
        Ok(Self {
            ranks,
            overall,
            tail,
            head,
        })
    }

    pub fn mrr(&self) -> f64 {
        self.overall.mrr
    }

    /// CSV of per-query ranks: `head,relation,tail,direction,rank`.
    pub fn ranks_csv(&self, vocab: Option<&crate::Vocabulary>) -> String {
        let mut out = String::from("head,relation,tail,direction,rank\n");
        for (q, r) in &self.ranks {
            let t = q.triplet;
            match vocab {
                Some(v) => out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    csv_field(v.entity_name(t.head).unwrap_or("?")),
                    csv_field(v.relation_name(t.relation).unwrap_or("?")),
                    csv_field(v.entity_name(t.tail).unwrap_or("?")),
                    q.direction.as_str(),
                    r
                )),
                None => out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    t.head,
                    t.relation,
                    t.tail,
                    q.direction.as_str(),
                    r
                )),
            }
        }
        out
    }

    /// Summary block: one `key,value` line per metric, overall then per direction.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("scope,queries,mr,mrr,hits@1,hits@3,hits@10\n");
        for (name, s) in [("both", &self.overall), ("tail", &self.tail), ("head", &self.head)] {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                name, s.count, s.mr, s.mrr, s.hits[0], s.hits[1], s.hits[2]
            ));
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Both-direction queries for every triplet, tail query first.
pub fn queries(split: &[Triplet]) -> Vec<RankQuery> {
    split
        .iter()
        .flat_map(|t| [RankQuery::tail(*t), RankQuery::head(*t)])
        .collect()
}

/// Ranks every query of `split` and aggregates.
///
/// Queries are ranked in parallel; the result does not depend on the thread count.
pub fn evaluate(model: &Model, split: &[Triplet], filter: Option<&FilterIndex>) -> Result<RankReport> {
    if split.is_empty() {
        return Err(Error::Eval("cannot evaluate an empty split".into()));
    }
    let qs = queries(split);
    let ranks: Vec<(RankQuery, f64)> = qs
        .par_iter()
        .map(|q| (*q, rank_one(model, q, filter)))
        .collect();
    RankReport::from_ranks(ranks)
}
