//! Composition residuals of a trained model: checking given rules and
//! sweeping for compositions the model learned on its own.

use crate::data::{RelationId, RuleConstraint, RuleTarget, Vocabulary, IDENTITY_TOKEN};
use crate::error::{Error, Result};
use crate::eval::csv_field;
use crate::model::Model;

#[derive(Debug, Clone, PartialEq)]
pub struct RuleAuditRow {
    pub rule: RuleConstraint,
    /// `relA·relB=target`.
    pub name: String,
    pub residual: f64,
    /// Residual divided by the norm of the target parameters.
    pub normalized_residual: f64,
}

fn check_relation(model: &Model, r: RelationId) -> Result<()> {
    if r < model.config().num_relations {
        Ok(())
    } else {
        Err(Error::UnknownToken {
            kind: "relation",
            token: format!("#{r}"),
        })
    }
}

fn normalized(residual: f64, target_norm: f64) -> f64 {
    if target_norm > 0.0 {
        residual / target_norm
    } else {
        residual
    }
}

/// One row per rule, ascending by residual (ties keep input order).
pub fn audit_rules(model: &Model, rules: &[RuleConstraint], vocab: &Vocabulary) -> Result<Vec<RuleAuditRow>> {
    let mut rows = Vec::with_capacity(rules.len());
    for rule in rules {
        check_relation(model, rule.left_a)?;
        check_relation(model, rule.left_b)?;
        if let RuleTarget::Relation(c) = rule.target {
            check_relation(model, c)?;
        }
        let residual = model.composition_residual(rule);
        let target_norm = model.target_params(rule.target).norm();
        rows.push(RuleAuditRow {
            rule: *rule,
            name: rule.describe(vocab),
            residual,
            normalized_residual: normalized(residual, target_norm),
        });
    }
    rows.sort_by(|a, b| a.residual.total_cmp(&b.residual));
    Ok(rows)
}

pub fn mean_normalized_residual(rows: &[RuleAuditRow]) -> f64 {
    rows.iter().map(|r| r.normalized_residual).sum::<f64>() / rows.len().max(1) as f64
}

pub fn audit_csv(rows: &[RuleAuditRow]) -> String {
    let mut out = String::from("rule,residual,normalized_residual\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", csv_field(&r.name), r.residual, r.normalized_residual));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinedComposition {
    pub left_a: RelationId,
    pub left_b: RelationId,
    pub target: RuleTarget,
    pub residual: f64,
    pub normalized_residual: f64,
}

impl MinedComposition {
    pub fn describe(&self, vocab: &Vocabulary) -> String {
        let target = match self.target {
            RuleTarget::Identity => IDENTITY_TOKEN,
            RuleTarget::Relation(c) => vocab.relation_name(c).unwrap_or("?"),
        };
        format!(
            "{}·{}={}",
            vocab.relation_name(self.left_a).unwrap_or("?"),
            vocab.relation_name(self.left_b).unwrap_or("?"),
            target
        )
    }
}

/// Every `(a, b, target)` with `‖params(a∘b) − params(target)‖ < threshold`,
/// targets ranging over all relations and the identity. Sorted ascending by
/// residual.
///
/// Fails when `N_r` exceeds `max_relations`, since the sweep is `O(N_r³)`.
pub fn mine_compositions(model: &Model, threshold: f64, max_relations: usize) -> Result<Vec<MinedComposition>> {
    let nr = model.config().num_relations;
    if nr > max_relations {
        return Err(Error::Validation(format!(
            "{nr} relations exceed the mining cap of {max_relations}"
        )));
    }
    let targets: Vec<(RuleTarget, crate::RelationParams)> = std::iter::once(RuleTarget::Identity)
        .chain((0..nr).map(RuleTarget::Relation))
        .map(|t| (t, model.target_params(t)))
        .collect();
    let mut found = Vec::new();
    for a in 0..nr {
        for b in 0..nr {
            let composed = model.compose(a, b);
            for (target, params) in &targets {
                let residual = composed.distance(params);
                if residual < threshold {
                    found.push(MinedComposition {
                        left_a: a,
                        left_b: b,
                        target: *target,
                        residual,
                        normalized_residual: normalized(residual, params.norm()),
                    });
                }
            }
        }
    }
    found.sort_by(|x, y| x.residual.total_cmp(&y.residual));
    Ok(found)
}

pub fn mined_csv(rows: &[MinedComposition], vocab: &Vocabulary) -> String {
    let mut out = String::from("rule,residual,normalized_residual\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            csv_field(&r.describe(vocab)),
            r.residual,
            r.normalized_residual
        ));
    }
    out
}
