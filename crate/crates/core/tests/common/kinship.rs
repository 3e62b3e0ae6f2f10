//! Kinship runs through the shipped config.

use std::path::PathBuf;

use seme_core::audit::{audit_rules, mean_normalized_residual};
use seme_core::config::ExperimentConfig;
use seme_core::eval::{evaluate, RankSummary};
use seme_core::train::train;
use seme_core::{DatasetSplits, Model, RuleConstraint};

pub const SEEDS: [u64; 8] = [1, 2, 3, 4, 5, 6, 7, 8];

pub fn config_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/kinship.toml")
}

pub fn config(seed: u64) -> ExperimentConfig {
    let cfg = ExperimentConfig::load(config_path(), &[format!("seed={seed}")]).unwrap();
    cfg.validate().unwrap();
    cfg
}

pub struct Run {
    pub model: Model,
    pub test: RankSummary,
    /// Mean normalized residual over the configured rules, whether or not
    /// they were used in training.
    pub residual: f64,
}

pub fn data() -> (DatasetSplits, Vec<RuleConstraint>) {
    let cfg = config(1);
    let splits = cfg.load_splits().unwrap();
    let rules = cfg.load_rules(&splits).unwrap();
    (splits, rules)
}

/// Trains with the configured rules (`regularized`) or with none.
pub fn run(seed: u64, regularized: bool) -> Run {
    let cfg = config(seed);
    let splits = cfg.load_splits().unwrap();
    let rules = cfg.load_rules(&splits).unwrap();
    let model_cfg = cfg.model_config(&splits);
    let model = Model::init(model_cfg, cfg.init_scheme(&model_cfg), seed).unwrap();
    let used: &[RuleConstraint] = if regularized { &rules } else { &[] };
    let outcome = train(&splits, used, model, cfg.loss, cfg.optimizer, cfg.schedule, seed).unwrap();
    let test = evaluate(&outcome.best, &splits.test, Some(&splits.filter_index)).unwrap().overall;
    let rows = audit_rules(&outcome.best, &rules, &splits.vocab).unwrap();
    Run {
        residual: mean_normalized_residual(&rows),
        model: outcome.best,
        test,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Averages {
    pub mr: f64,
    pub mrr: f64,
    pub hits10: f64,
    pub residual: f64,
}

/// Regularized and unregularized averages, computed once per test binary.
pub fn averages() -> &'static (Averages, Averages) {
    static CELL: std::sync::OnceLock<(Averages, Averages)> = std::sync::OnceLock::new();
    CELL.get_or_init(|| (average(true), average(false)))
}

pub fn average(regularized: bool) -> Averages {
    let runs: Vec<Run> = SEEDS.iter().map(|&s| run(s, regularized)).collect();
    let n = runs.len() as f64;
    let mean = |f: &dyn Fn(&Run) -> f64| runs.iter().map(f).sum::<f64>() / n;
    Averages {
        mr: mean(&|r| r.test.mr),
        mrr: mean(&|r| r.test.mrr),
        hits10: mean(&|r| r.test.hits[2]),
        residual: mean(&|r| r.residual),
    }
}
