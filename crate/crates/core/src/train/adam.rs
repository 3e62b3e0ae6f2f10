//! Adam with bias correction and row-sparse (lazy) updates.
//!
//! Only rows present in the gradient are touched: their moments are updated
//! and the parameter step uses the global step count for bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;

use super::grad::{Gradients, SparseRows};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Learning-rate multiplier applied on a plateau.
    pub anneal_factor: f64,
    /// Evaluations without improvement before annealing.
    pub anneal_patience: usize,
    pub batch_size: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            anneal_factor: 0.1,
            anneal_patience: 10,
            batch_size: 1000,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.anneal_factor > 0.0 && self.anneal_factor < 1.0) {
            return Err(Error::Config(format!(
                "optimizer.anneal_factor must lie in (0, 1), got {}",
                self.anneal_factor
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("optimizer.batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("optimizer.learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("optimizer betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// First and second moments for one flat table.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    pub fn zeros(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub entities: Moments,
    pub relations: Moments,
}

impl AdamState {
    pub fn for_model(model: &Model) -> Self {
        Self {
            step: 0,
            entities: Moments::zeros(model.entity_table().len()),
            relations: Moments::zeros(model.relation_table().len()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct StepCoefficients {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    bias1: f64,
    bias2_sqrt: f64,
}

impl StepCoefficients {
    fn new(cfg: &OptimizerConfig, lr: f64, step: u64) -> Self {
        let t = step as i32;
        Self {
            lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            bias1: 1.0 - cfg.beta1.powi(t),
            bias2_sqrt: (1.0 - cfg.beta2.powi(t)).sqrt(),
        }
    }

    #[inline]
    fn update(&self, p: &mut f64, m: &mut f64, v: &mut f64, g: f64) {
        *m = self.beta1 * *m + (1.0 - self.beta1) * g;
        *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
        let denom = v.sqrt() / self.bias2_sqrt + self.epsilon;
        *p -= self.lr / self.bias1 * *m / denom;
    }
}

fn step_rows(table: &mut [f64], moments: &mut Moments, grads: &SparseRows, c: &StepCoefficients) {
    let w = grads.width();
    for (row, g) in grads.iter() {
        let range = row * w..(row + 1) * w;
        let params = &mut table[range.clone()];
        let m = &mut moments.m[range.clone()];
        let v = &mut moments.v[range];
        for i in 0..w {
            c.update(&mut params[i], &mut m[i], &mut v[i], g[i]);
        }
    }
}

/// Dense Adam step on a flat table: every entry is updated.
pub fn step_dense(table: &mut [f64], moments: &mut Moments, grads: &[f64], cfg: &OptimizerConfig, lr: f64, step: u64) {
    let c = StepCoefficients::new(cfg, lr, step);
    for i in 0..table.len() {
        c.update(&mut table[i], &mut moments.m[i], &mut moments.v[i], grads[i]);
    }
}

/// Row-sparse Adam step on a flat table with the given (already incremented) step count.
pub fn step_sparse(
    table: &mut [f64],
    moments: &mut Moments,
    grads: &SparseRows,
    cfg: &OptimizerConfig,
    lr: f64,
    step: u64,
) {
    step_rows(table, moments, grads, &StepCoefficients::new(cfg, lr, step));
}

/// One Adam step over the rows touched in `grads`, at learning rate `lr`.
pub fn adam_step(model: &mut Model, grads: &Gradients, state: &mut AdamState, cfg: &OptimizerConfig, lr: f64) {
    state.step += 1;
    let c = StepCoefficients::new(cfg, lr, state.step);
    step_rows(model.entity_table_mut(), &mut state.entities, &grads.entities, &c);
    step_rows(model.relation_table_mut(), &mut state.relations, &grads.relations, &c);
}
