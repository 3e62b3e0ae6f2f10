use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetSplits, RuleConstraint, Triplet};
use crate::error::{Error, Result};
use crate::eval::{evaluate, RankSummary};
use crate::model::Model;

use super::adam::{adam_step, AdamState, OptimizerConfig};
use super::grad::Gradients;
use super::loss::{positive_negative_loss, LossConfig};
use super::regularizer::rule_regularization;
use super::sampling::{sample_negatives_with, NegativeBatch};

/// Triplets per parallel work item. Fixed so sums do not depend on the pool size.
const CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Schedule {
    pub max_steps: usize,
    /// Validation every this many steps.
    pub eval_interval: usize,
    /// Validate on the first this-many valid triplets; 0 means all.
    pub valid_max_triplets: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            max_steps: 100_000,
            eval_interval: 1000,
            valid_max_triplets: 0,
        }
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub step: usize,
    pub learning_rate: f64,
    /// Mean batch loss since the previous evaluation.
    pub train_loss: f64,
    pub valid: RankSummary,
}

impl MetricsRow {
    pub const CSV_HEADER: &'static str =
        "step,learning_rate,train_loss,valid_mr,valid_mrr,valid_hits1,valid_hits3,valid_hits10";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.step,
            self.learning_rate,
            self.train_loss,
            self.valid.mr,
            self.valid.mrr,
            self.valid.hits[0],
            self.valid.hits[1],
            self.valid.hits[2]
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxSteps,
    Plateau,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the best validation MRR (the initial ones if never evaluated).
    pub best: Model,
    /// Parameters after the last step.
    pub last: Model,
    pub best_valid_mrr: Option<f64>,
    pub history: Vec<MetricsRow>,
    pub steps: usize,
    pub stop: StopReason,
}

/// Mean loss of a batch plus the rule penalty, with its gradient.
///
/// `negatives[i]` holds the corruptions of `batch[i]`.
pub fn batch_loss(
    model: &Model,
    batch: &[Triplet],
    negatives: &[NegativeBatch],
    rules: &[RuleConstraint],
    cfg: &LossConfig,
) -> (f64, Gradients) {
    assert_eq!(batch.len(), negatives.len());
    let scale = 1.0 / batch.len().max(1) as f64;
    let parts: Vec<(f64, Gradients)> = batch
        .par_chunks(CHUNK)
        .zip(negatives.par_chunks(CHUNK))
        .map(|(ts, ns)| {
            let mut grads = Gradients::for_model(model);
            let mut total = 0.0;
            for (t, n) in ts.iter().zip(ns) {
                total += positive_negative_loss(model, t, n, cfg, scale, &mut grads).loss;
            }
            (total, grads)
        })
        .collect();
    let mut grads = Gradients::for_model(model);
    let mut total = 0.0;
    for (l, g) in &parts {
        total += l;
        grads.add_assign(g);
    }
    let penalty = rule_regularization(model, rules, 1.0, &mut grads);
    (total * scale + penalty, grads)
}

/// Step-by-step driver over the training split.
pub struct Trainer<'a> {
    splits: &'a DatasetSplits,
    rules: &'a [RuleConstraint],
    loss_cfg: LossConfig,
    opt_cfg: OptimizerConfig,
    model: Model,
    adam: AdamState,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    step: usize,
    lr: f64,
}

impl<'a> Trainer<'a> {
    pub fn new(
        splits: &'a DatasetSplits,
        rules: &'a [RuleConstraint],
        model: Model,
        loss_cfg: LossConfig,
        opt_cfg: OptimizerConfig,
        seed: u64,
    ) -> Result<Self> {
        loss_cfg.validate()?;
        opt_cfg.validate()?;
        if splits.train.is_empty() {
            return Err(Error::Config("training split is empty".into()));
        }
        if model.config().num_entities < 2 {
            return Err(Error::Config("training needs at least two entities".into()));
        }
        let num_relations = model.config().num_relations;
        for rule in rules {
            let target_ok = match rule.target {
                crate::RuleTarget::Identity => true,
                crate::RuleTarget::Relation(c) => c < num_relations,
            };
            if rule.left_a >= num_relations || rule.left_b >= num_relations || !target_ok {
                return Err(Error::Validation("rule references a relation outside the model".into()));
            }
        }
        // Separate stream from the initializer's, which uses the plain seed.
        let rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_7a1e_0000_0001);
        let adam = AdamState::for_model(&model);
        Ok(Self {
            splits,
            rules,
            loss_cfg,
            lr: opt_cfg.learning_rate,
            opt_cfg,
            model,
            adam,
            rng,
            order: Vec::new(),
            cursor: 0,
            step: 0,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.lr = lr;
    }

    fn next_batch(&mut self) -> Vec<Triplet> {
        let n = self.splits.train.len();
        let size = self.opt_cfg.batch_size.min(n);
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            if self.cursor == self.order.len() {
                self.order = (0..n).collect();
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            batch.push(self.splits.train[self.order[self.cursor]]);
            self.cursor += 1;
        }
        batch
    }

    /// Loss of the current parameters on a fixed batch, no update.
    pub fn loss_on(&self, batch: &[Triplet], negatives: &[NegativeBatch]) -> f64 {
        batch_loss(&self.model, batch, negatives, self.rules, &self.loss_cfg).0
    }

    /// One optimizer step; returns the batch loss before the update.
    pub fn step(&mut self) -> Result<f64> {
        let batch = self.next_batch();
        let num_entities = self.model.config().num_entities;
        let negatives: Vec<NegativeBatch> = batch
            .iter()
            .map(|t| sample_negatives_with(t, self.loss_cfg.n_neg, num_entities, self.loss_cfg.corruption, &mut self.rng))
            .collect();
        let (loss, grads) = batch_loss(&self.model, &batch, &negatives, self.rules, &self.loss_cfg);
        self.step += 1;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                step: self.step,
                what: format!("batch loss {loss}"),
            });
        }
        adam_step(&mut self.model, &grads, &mut self.adam, &self.opt_cfg, self.lr);
        check_rows(&self.model, &grads, self.step)?;
        Ok(loss)
    }
}

fn check_rows(model: &Model, grads: &Gradients, step: usize) -> Result<()> {
    for &e in grads.entities.rows() {
        if model.entity(e).iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence {
                step,
                what: format!("entity {e}"),
            });
        }
    }
    for &r in grads.relations.rows() {
        if model.relation(r).iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence {
                step,
                what: format!("relation {r}"),
            });
        }
    }
    Ok(())
}

/// Trains `model` and returns the best-validation parameters.
pub fn train(
    splits: &DatasetSplits,
    rules: &[RuleConstraint],
    model: Model,
    loss_cfg: LossConfig,
    opt_cfg: OptimizerConfig,
    schedule: Schedule,
    seed: u64,
) -> Result<TrainOutcome> {
    train_with_observer(splits, rules, model, loss_cfg, opt_cfg, schedule, seed, |_| {})
}

/// [`train`], calling `observe` after every validation.
///
/// Every `eval_interval` steps the filtered validation MRR is computed. When
/// it has not improved for `anneal_patience` evaluations the learning rate
/// is multiplied by `anneal_factor`. Training stops at `max_steps`, or at
/// the third plateau in a row without any improvement in between.
#[allow(clippy::too_many_arguments)]
pub fn train_with_observer(
    splits: &DatasetSplits,
    rules: &[RuleConstraint],
    model: Model,
    loss_cfg: LossConfig,
    opt_cfg: OptimizerConfig,
    schedule: Schedule,
    seed: u64,
    mut observe: impl FnMut(&MetricsRow),
) -> Result<TrainOutcome> {
    let initial = model.clone();
    let mut trainer = Trainer::new(splits, rules, model, loss_cfg, opt_cfg, seed)?;
    let valid: &[Triplet] = match schedule.valid_max_triplets {
        0 => &splits.valid,
        n => &splits.valid[..n.min(splits.valid.len())],
    };
    let eval_interval = schedule.eval_interval.max(1);

    let mut best = initial;
    let mut best_mrr: Option<f64> = None;
    let mut history = Vec::new();
    let mut since_improvement = 0;
    let mut anneals_without_improvement = 0;
    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;
    let mut stop = StopReason::MaxSteps;

    let validate = |trainer: &Trainer, loss_sum: f64, loss_count: usize| -> Result<Option<MetricsRow>> {
        if valid.is_empty() {
            return Ok(None);
        }
        let report = evaluate(trainer.model(), valid, Some(&splits.filter_index))?;
        Ok(Some(MetricsRow {
            step: trainer.steps_done(),
            learning_rate: trainer.learning_rate(),
            train_loss: loss_sum / loss_count.max(1) as f64,
            valid: report.overall,
        }))
    };

    while trainer.steps_done() < schedule.max_steps {
        loss_sum += trainer.step()?;
        loss_count += 1;
        let step = trainer.steps_done();
        if step % eval_interval != 0 && step != schedule.max_steps {
            continue;
        }
        let Some(row) = validate(&trainer, loss_sum, loss_count)? else {
            continue;
        };
        loss_sum = 0.0;
        loss_count = 0;
        observe(&row);
        history.push(row);
        log::debug!("step {step}: {}", row.valid);

        if best_mrr.is_none_or(|b| row.valid.mrr > b) {
            best_mrr = Some(row.valid.mrr);
            best = trainer.model().clone();
            since_improvement = 0;
            anneals_without_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= opt_cfg.anneal_patience {
                if anneals_without_improvement >= 2 {
                    stop = StopReason::Plateau;
                    break;
                }
                let lr = trainer.learning_rate() * opt_cfg.anneal_factor;
                log::info!("step {step}: validation MRR plateaued, learning rate -> {lr:e}");
                trainer.set_learning_rate(lr);
                since_improvement = 0;
                anneals_without_improvement += 1;
            }
        }
    }

    let steps = trainer.steps_done();
    let last = trainer.into_model();
    if valid.is_empty() && steps > 0 {
        best = last.clone();
    }
    Ok(TrainOutcome {
        best,
        last,
        best_valid_mrr: best_mrr,
        history,
        steps,
        stop,
    })
}
