//! Triplet and rule file ingestion, vocabularies and the filtered-ranking index.
//!
//! Triplet files are tab separated `head\trelation\ttail` lines with no header,
//! which is how WN18RR and FB15k-237 are distributed. Rule files are
//! `relA\trelB\ttarget\tlambda` where `target` may be the token `IDENTITY`.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Token used in rule files for the identity target.
pub const IDENTITY_TOKEN: &str = "IDENTITY";

pub type EntityId = usize;
pub type RelationId = usize;

/// A single fact `(head, relation, tail)` in id space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triplet {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }
}

/// Dense 0-based id assignment for entity and relation names.
///
/// Ids are handed out in first-insertion order. Once `freeze` is called,
/// lookups of unseen names fail instead of extending the tables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    entities: Vec<String>,
    relations: Vec<String>,
    entity_ids: HashMap<String, EntityId>,
    relation_ids: HashMap<String, RelationId>,
    frozen: bool,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a vocabulary from ordered name lists. Fails on duplicates.
    pub fn from_names(entities: Vec<String>, relations: Vec<String>) -> Result<Self> {
        let mut vocab = Vocabulary::new();
        for name in entities {
            if vocab.entity_ids.contains_key(&name) {
                return Err(Error::Validation(format!("duplicate entity name `{name}`")));
            }
            vocab.intern_entity(&name);
        }
        for name in relations {
            if vocab.relation_ids.contains_key(&name) {
                return Err(Error::Validation(format!("duplicate relation name `{name}`")));
            }
            vocab.intern_relation(&name);
        }
        vocab.frozen = true;
        Ok(vocab)
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entities
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relations
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_ids.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_ids.get(name).copied()
    }

    pub fn entity_name(&self, id: EntityId) -> Option<&str> {
        self.entities.get(id).map(String::as_str)
    }

    pub fn relation_name(&self, id: RelationId) -> Option<&str> {
        self.relations.get(id).map(String::as_str)
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Stops the vocabulary from growing.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    fn intern_entity(&mut self, name: &str) -> EntityId {
        if let Some(&id) = self.entity_ids.get(name) {
            return id;
        }
        let id = self.entities.len();
        self.entities.push(name.to_owned());
        self.entity_ids.insert(name.to_owned(), id);
        id
    }

    fn intern_relation(&mut self, name: &str) -> RelationId {
        if let Some(&id) = self.relation_ids.get(name) {
            return id;
        }
        let id = self.relations.len();
        self.relations.push(name.to_owned());
        self.relation_ids.insert(name.to_owned(), id);
        id
    }

    fn resolve_entity(&mut self, name: &str) -> Result<EntityId> {
        match self.entity_id(name) {
            Some(id) => Ok(id),
            None if !self.frozen => Ok(self.intern_entity(name)),
            None => Err(Error::UnknownToken {
                kind: "entity",
                token: name.to_owned(),
            }),
        }
    }

    fn resolve_relation(&mut self, name: &str) -> Result<RelationId> {
        match self.relation_id(name) {
            Some(id) => Ok(id),
            None if !self.frozen => Ok(self.intern_relation(name)),
            None => Err(Error::UnknownToken {
                kind: "relation",
                token: name.to_owned(),
            }),
        }
    }

    /// Renders a triplet with names, for reports and error messages.
    pub fn describe(&self, t: &Triplet) -> String {
        format!(
            "({}, {}, {})",
            self.entity_name(t.head).unwrap_or("?"),
            self.relation_name(t.relation).unwrap_or("?"),
            self.entity_name(t.tail).unwrap_or("?")
        )
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Loads a triplet file.
///
/// With a non-frozen vocabulary unseen names are appended; with a frozen one
/// they are a vocabulary error. Duplicate lines within the file are rejected.
pub fn load_triplets(path: impl AsRef<Path>, vocab: Vocabulary) -> Result<(Vec<Triplet>, Vocabulary)> {
    let path = path.as_ref();
    let text = read_text(path)?;
    parse_triplets(&text, path, vocab)
}

pub(crate) fn parse_triplets(
    text: &str,
    path: &Path,
    mut vocab: Vocabulary,
) -> Result<(Vec<Triplet>, Vocabulary)> {
    let mut triplets = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: line_no,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let head = vocab.resolve_entity(fields[0])?;
        let relation = vocab.resolve_relation(fields[1])?;
        let tail = vocab.resolve_entity(fields[2])?;
        let t = Triplet::new(head, relation, tail);
        if !seen.insert(t) {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: line_no,
                message: format!("duplicate triplet {}", line.replace('\t', " ")),
            });
        }
        triplets.push(t);
    }
    Ok((triplets, vocab))
}

/// Right-hand side of a composition rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleTarget {
    Relation(RelationId),
    Identity,
}

/// `left_a ∘ left_b ≈ target`, weighted by `weight`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleConstraint {
    pub left_a: RelationId,
    pub left_b: RelationId,
    pub target: RuleTarget,
    pub weight: f64,
}

impl RuleConstraint {
    pub fn describe(&self, vocab: &Vocabulary) -> String {
        let target = match self.target {
            RuleTarget::Identity => IDENTITY_TOKEN,
            RuleTarget::Relation(r) => vocab.relation_name(r).unwrap_or("?"),
        };
        format!(
            "{}·{}={}",
            vocab.relation_name(self.left_a).unwrap_or("?"),
            vocab.relation_name(self.left_b).unwrap_or("?"),
            target
        )
    }
}

/// Loads a rule file against a vocabulary. Relation names must already exist.
pub fn load_rules(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Vec<RuleConstraint>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    parse_rules(&text, path, vocab)
}

pub(crate) fn parse_rules(text: &str, path: &Path, vocab: &Vocabulary) -> Result<Vec<RuleConstraint>> {
    let relation = |name: &str| {
        vocab.relation_id(name).ok_or_else(|| Error::UnknownToken {
            kind: "relation",
            token: name.to_owned(),
        })
    };
    let mut rules = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: line_no,
                message: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let weight: f64 = fields[3].trim().parse().map_err(|_| Error::Parse {
            path: path.to_owned(),
            line: line_no,
            message: format!("invalid rule weight `{}`", fields[3]),
        })?;
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::Validation(format!(
                "{}:{}: rule weight must be a finite non-negative number, got {}",
                path.display(),
                line_no,
                fields[3]
            )));
        }
        let target = if fields[2] == IDENTITY_TOKEN {
            RuleTarget::Identity
        } else {
            RuleTarget::Relation(relation(fields[2])?)
        };
        rules.push(RuleConstraint {
            left_a: relation(fields[0])?,
            left_b: relation(fields[1])?,
            target,
            weight,
        });
    }
    Ok(rules)
}

/// Known true answers for `(h, r, ?)` and `(?, r, t)` queries.
#[derive(Debug, Clone, Default)]
pub struct FilterIndex {
    tails: HashMap<(EntityId, RelationId), HashSet<EntityId>>,
    heads: HashMap<(RelationId, EntityId), HashSet<EntityId>>,
}

impl FilterIndex {
    pub fn new<'a>(triplets: impl IntoIterator<Item = &'a Triplet>) -> Self {
        let mut index = FilterIndex::default();
        for t in triplets {
            index.insert(*t);
        }
        index
    }

    pub fn insert(&mut self, t: Triplet) {
        self.tails.entry((t.head, t.relation)).or_default().insert(t.tail);
        self.heads.entry((t.relation, t.tail)).or_default().insert(t.head);
    }

    /// True tails of `(head, relation, ?)`; empty for unseen pairs.
    pub fn tails(&self, head: EntityId, relation: RelationId) -> impl Iterator<Item = EntityId> + '_ {
        self.tails
            .get(&(head, relation))
            .into_iter()
            .flat_map(|s| s.iter().copied())
    }

    /// True heads of `(?, relation, tail)`; empty for unseen pairs.
    pub fn heads(&self, relation: RelationId, tail: EntityId) -> impl Iterator<Item = EntityId> + '_ {
        self.heads
            .get(&(relation, tail))
            .into_iter()
            .flat_map(|s| s.iter().copied())
    }

    pub fn tail_set(&self, head: EntityId, relation: RelationId) -> Option<&HashSet<EntityId>> {
        self.tails.get(&(head, relation))
    }

    pub fn head_set(&self, relation: RelationId, tail: EntityId) -> Option<&HashSet<EntityId>> {
        self.heads.get(&(relation, tail))
    }

    pub fn contains(&self, t: &Triplet) -> bool {
        self.tail_set(t.head, t.relation)
            .is_some_and(|s| s.contains(&t.tail))
    }

    /// Number of distinct indexed triplets.
    pub fn len(&self) -> usize {
        self.tails.values().map(HashSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.tails.is_empty()
    }
}

/// Train / valid / test triplets sharing one vocabulary.
#[derive(Debug, Clone)]
pub struct DatasetSplits {
    pub vocab: Vocabulary,
    pub train: Vec<Triplet>,
    pub valid: Vec<Triplet>,
    pub test: Vec<Triplet>,
    pub filter_index: FilterIndex,
}

impl DatasetSplits {
    /// Builds splits from in-memory triplets and indexes all of them.
    pub fn new(vocab: Vocabulary, train: Vec<Triplet>, valid: Vec<Triplet>, test: Vec<Triplet>) -> Self {
        let filter_index = build_filter_index(&train, &valid, &test);
        Self {
            vocab,
            train,
            valid,
            test,
            filter_index,
        }
    }

    /// Loads `train` with a growing vocabulary, then `valid`/`test` against the frozen result.
    pub fn load(train: impl AsRef<Path>, valid: impl AsRef<Path>, test: impl AsRef<Path>) -> Result<Self> {
        let (train, mut vocab) = load_triplets(train, Vocabulary::new())?;
        vocab.freeze();
        let (valid, vocab) = load_triplets(valid, vocab)?;
        let (test, vocab) = load_triplets(test, vocab)?;
        Ok(Self::new(vocab, train, valid, test))
    }

    /// Loads `train.txt`, `valid.txt` and `test.txt` from a directory.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Self::load(dir.join("train.txt"), dir.join("valid.txt"), dir.join("test.txt"))
    }

    pub fn split(&self, which: Split) -> &[Triplet] {
        match which {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }
}

/// Indexes the union of all splits.
pub fn build_filter_index(train: &[Triplet], valid: &[Triplet], test: &[Triplet]) -> FilterIndex {
    FilterIndex::new(train.iter().chain(valid).chain(test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" | "validation" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}
