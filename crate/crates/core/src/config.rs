//! Experiment configuration: a TOML file with `[data]`, `[rules]`, `[model]`,
//! `[loss]`, `[optimizer]` and `[schedule]` sections plus a top-level `seed`.
//!
//! Dotted `key=value` overrides (`loss.gamma=6`) are applied on top of the
//! file after defaults are filled in, so every override must name a key that
//! exists in the resolved configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{load_rules, DatasetSplits, RuleConstraint};
use crate::error::{Error, Result};
use crate::model::{InitScheme, ModelConfig, Variant};
use crate::train::{LossConfig, OptimizerConfig, Schedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train: PathBuf::from("train.txt"),
            valid: PathBuf::from("valid.txt"),
            test: PathBuf::from("test.txt"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RulesConfig {
    /// Rule file; empty for none.
    pub path: PathBuf,
    /// Replace every per-rule weight with `lambda`.
    pub override_lambda: bool,
    pub lambda: f64,
}

impl Default for RulesConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::new(),
            override_lambda: false,
            lambda: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub variant: Variant,
    pub k: usize,
    pub n: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            variant: Variant::Full,
            k: 5,
            n: 240,
        }
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            gamma: 9.0,
            alpha: 0.85,
            n_neg: 64,
            p_loss: 5.0,
            corruption: Default::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub rules: RulesConfig,
    pub model: ModelSection,
    pub loss: LossConfig,
    pub optimizer: OptimizerConfig,
    pub schedule: Schedule,
}

fn set_dotted(root: &mut toml::Value, key: &str, value: toml::Value) -> Result<()> {
    let mut cursor = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = cursor
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key `{key}`: `{part}` is not inside a section")))?;
        let slot = table
            .get_mut(*part)
            .ok_or_else(|| Error::Config(format!("unknown config key `{key}`")))?;
        if i + 1 == parts.len() {
            if slot.is_table() {
                return Err(Error::Config(format!("override key `{key}` names a section, not a value")));
            }
            *slot = value;
            return Ok(());
        }
        cursor = slot;
    }
    unreachable!("split yields at least one part")
}

fn parse_override_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_owned())),
        Err(_) => toml::Value::String(raw.to_owned()),
    }
}

impl ExperimentConfig {
    /// Parses TOML text and applies `key=value` overrides.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let parsed: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        if overrides.is_empty() {
            return Ok(parsed);
        }
        let mut value = toml::Value::try_from(&parsed).map_err(|e| Error::Config(e.to_string()))?;
        for ov in overrides {
            let (key, raw) = ov
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{ov}` is not of the form key=value")))?;
            set_dotted(&mut value, key.trim(), parse_override_value(raw.trim()))?;
        }
        value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("invalid override: {e}")))
    }

    /// Loads a config file. Relative data and rule paths are resolved
    /// against the directory containing the file.
    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text, overrides)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.train);
        fix(&mut self.data.valid);
        fix(&mut self.data.test);
        fix(&mut self.rules.path);
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.optimizer.validate()?;
        if self.model.k == 0 || self.model.n == 0 {
            return Err(Error::Config("model.k and model.n must be positive".into()));
        }
        if self.rules.override_lambda && !(self.rules.lambda >= 0.0) {
            return Err(Error::Config("rules.lambda must be non-negative".into()));
        }
        Ok(())
    }

    pub fn load_splits(&self) -> Result<DatasetSplits> {
        DatasetSplits::load(&self.data.train, &self.data.valid, &self.data.test)
    }

    pub fn load_rules(&self, splits: &DatasetSplits) -> Result<Vec<RuleConstraint>> {
        if self.rules.path.as_os_str().is_empty() {
            return Ok(Vec::new());
        }
        let mut rules = load_rules(&self.rules.path, &splits.vocab)?;
        if self.rules.override_lambda {
            for r in &mut rules {
                r.weight = self.rules.lambda;
            }
        }
        Ok(rules)
    }

    pub fn model_config(&self, splits: &DatasetSplits) -> ModelConfig {
        ModelConfig {
            variant: self.model.variant,
            k: self.model.k,
            n: self.model.n,
            num_entities: splits.vocab.num_entities(),
            num_relations: splits.vocab.num_relations(),
        }
    }

    pub fn init_scheme(&self, model: &ModelConfig) -> InitScheme {
        InitScheme::for_margin(self.loss.gamma, model)
    }
}
