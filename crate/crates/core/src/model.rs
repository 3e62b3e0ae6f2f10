//! Block-diagonal matrix semigroup embeddings.
//!
//! An entity is a vector of `n` blocks of size `k`. A relation acts on it
//! block by block:
//!
//! * [`Variant::Full`]: block `b` is multiplied by its own `k × k` matrix.
//! * [`Variant::Shared`]: every block is multiplied by one shared matrix.
//! * [`Variant::SharedShift`]: one shared matrix followed by a per-block shift.
//!
//! The `(nk) × (nk)` block-diagonal matrix is never built. Relation
//! parameters of one relation are stored contiguously: the matrices first
//! (row-major, block after block), then the shifts for `SharedShift`.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{EntityId, RelationId, RuleConstraint, RuleTarget};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    Shared,
    SharedShift,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Shared => "shared",
            Variant::SharedShift => "shared_shift",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" | "seme" => Ok(Variant::Full),
            "shared" | "seme-s" => Ok(Variant::Shared),
            "shared_shift" | "shared-shift" | "seme-ds" => Ok(Variant::SharedShift),
            other => Err(Error::Config(format!("unknown variant `{other}`"))),
        }
    }
}

/// Geometry of the relation action: variant, block size `k`, block count `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockShape {
    pub variant: Variant,
    pub k: usize,
    pub n: usize,
}

impl BlockShape {
    pub fn new(variant: Variant, k: usize, n: usize) -> Self {
        Self { variant, k, n }
    }

    /// Entity dimension `n·k`.
    pub fn dim(&self) -> usize {
        self.n * self.k
    }

    /// Parameters per relation: `n·k²`, `k²` or `k² + n·k`.
    pub fn relation_len(&self) -> usize {
        let kk = self.k * self.k;
        match self.variant {
            Variant::Full => self.n * kk,
            Variant::Shared => kk,
            Variant::SharedShift => kk + self.n * self.k,
        }
    }

    /// Number of stored `k × k` matrices (`n` for full, 1 otherwise).
    pub fn num_matrices(&self) -> usize {
        match self.variant {
            Variant::Full => self.n,
            Variant::Shared | Variant::SharedShift => 1,
        }
    }

    /// Offset of the matrix acting on block `block`.
    #[inline]
    pub fn matrix_offset(&self, block: usize) -> usize {
        match self.variant {
            Variant::Full => block * self.k * self.k,
            Variant::Shared | Variant::SharedShift => 0,
        }
    }

    /// Offset of the shift of block `block`, if the variant has shifts.
    #[inline]
    pub fn shift_offset(&self, block: usize) -> Option<usize> {
        match self.variant {
            Variant::SharedShift => Some(self.k * self.k + block * self.k),
            Variant::Full | Variant::Shared => None,
        }
    }

    /// `out = M·v (+ δ)` blockwise.
    #[inline]
    pub fn apply_into(&self, params: &[f64], v: &[f64], out: &mut [f64]) {
        let k = self.k;
        debug_assert_eq!(params.len(), self.relation_len());
        debug_assert_eq!(v.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        for b in 0..self.n {
            let m = &params[self.matrix_offset(b)..][..k * k];
            let vb = &v[b * k..(b + 1) * k];
            let ob = &mut out[b * k..(b + 1) * k];
            for (row, o) in m.chunks_exact(k).zip(ob.iter_mut()) {
                *o = row.iter().zip(vb).map(|(x, y)| x * y).sum();
            }
            if let Some(off) = self.shift_offset(b) {
                for (o, d) in ob.iter_mut().zip(&params[off..off + k]) {
                    *o += d;
                }
            }
        }
    }

    /// Parameters of "apply `a`, then `b`".
    ///
    /// Matrices multiply as `M_b · M_a`; for `SharedShift` the composed shift
    /// of block `i` is `M_b · δ_a,i + δ_b,i`.
    pub fn compose(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut out = vec![0.0; self.relation_len()];
        for m in 0..self.num_matrices() {
            let off = m * k * k;
            matmul(&b[off..off + k * k], &a[off..off + k * k], &mut out[off..off + k * k], k);
        }
        if self.variant == Variant::SharedShift {
            let mb = &b[..k * k];
            for blk in 0..self.n {
                let off = k * k + blk * k;
                for i in 0..k {
                    let mut acc = b[off + i];
                    for j in 0..k {
                        acc += mb[i * k + j] * a[off + j];
                    }
                    out[off + i] = acc;
                }
            }
        }
        out
    }

    /// Identity matrices and zero shifts.
    pub fn identity(&self) -> Vec<f64> {
        let k = self.k;
        let mut out = vec![0.0; self.relation_len()];
        for m in 0..self.num_matrices() {
            for i in 0..k {
                out[m * k * k + i * k + i] = 1.0;
            }
        }
        out
    }
}

/// `out = x · y` for row-major `k × k` matrices.
#[inline]
pub(crate) fn matmul(x: &[f64], y: &[f64], out: &mut [f64], k: usize) {
    for i in 0..k {
        for j in 0..k {
            let mut acc = 0.0;
            for l in 0..k {
                acc += x[i * k + l] * y[l * k + j];
            }
            out[i * k + j] = acc;
        }
    }
}

/// Euclidean norm over a flat parameter slice.
pub fn l2_norm(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Owned parameters of one relation (or of a composition of relations).
#[derive(Debug, Clone, PartialEq)]
pub struct RelationParams {
    pub shape: BlockShape,
    pub data: Vec<f64>,
}

impl RelationParams {
    pub fn new(shape: BlockShape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.relation_len() {
            return Err(Error::Validation(format!(
                "relation parameter length {} does not match {} for {:?}",
                data.len(),
                shape.relation_len(),
                shape
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn identity(shape: BlockShape) -> Self {
        Self {
            shape,
            data: shape.identity(),
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.shape.dim()];
        self.shape.apply_into(&self.data, v, &mut out);
        out
    }

    /// "`self` then `then`". Panics if the shapes differ.
    pub fn then(&self, then: &RelationParams) -> RelationParams {
        assert_eq!(self.shape, then.shape, "composition of relations with different shapes");
        RelationParams {
            shape: self.shape,
            data: self.shape.compose(&self.data, &then.data),
        }
    }

    /// Matrix of block `block`.
    pub fn block(&self, block: usize) -> &[f64] {
        let k = self.shape.k;
        &self.data[self.shape.matrix_offset(block)..][..k * k]
    }

    pub fn shift(&self, block: usize) -> Option<&[f64]> {
        self.shape
            .shift_offset(block)
            .map(|off| &self.data[off..off + self.shape.k])
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.data)
    }

    /// Euclidean distance between two parameter sets of the same shape.
    pub fn distance(&self, other: &RelationParams) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub k: usize,
    pub n: usize,
    pub num_entities: usize,
    pub num_relations: usize,
}

impl ModelConfig {
    pub fn shape(&self) -> BlockShape {
        BlockShape::new(self.variant, self.k, self.n)
    }

    pub fn dim(&self) -> usize {
        self.k * self.n
    }

    pub fn params_per_relation(&self) -> usize {
        self.shape().relation_len()
    }

    pub fn entity_table_len(&self) -> usize {
        self.num_entities * self.dim()
    }

    pub fn relation_table_len(&self) -> usize {
        self.num_relations * self.params_per_relation()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 {
            return Err(Error::Config(format!(
                "block size k and block count n must be positive (k={}, n={})",
                self.k, self.n
            )));
        }
        if self.num_entities == 0 || self.num_relations == 0 {
            return Err(Error::Config("model needs at least one entity and one relation".into()));
        }
        Ok(())
    }
}

/// Initialization ranges.
///
/// Entities are uniform in `[-entity_range, entity_range]`. Relation
/// matrices are the identity plus uniform noise in
/// `[-relation_noise, relation_noise]` per entry; shifts start at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitScheme {
    pub entity_range: f64,
    pub relation_noise: f64,
}

impl InitScheme {
    /// `entity_range = γ / (n·k)`, `relation_noise = 0.1 / √k`.
    pub fn for_margin(gamma: f64, config: &ModelConfig) -> Self {
        Self {
            entity_range: gamma / config.dim() as f64,
            relation_noise: 0.1 / (config.k as f64).sqrt(),
        }
    }
}

/// Entity and relation tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    shape: BlockShape,
    entities: Vec<f64>,
    relations: Vec<f64>,
}

impl Model {
    pub fn from_tables(config: ModelConfig, entities: Vec<f64>, relations: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if entities.len() != config.entity_table_len() || relations.len() != config.relation_table_len() {
            return Err(Error::Validation(format!(
                "table sizes ({}, {}) do not match config ({}, {})",
                entities.len(),
                relations.len(),
                config.entity_table_len(),
                config.relation_table_len()
            )));
        }
        Ok(Self {
            shape: config.shape(),
            config,
            entities,
            relations,
        })
    }

    /// Deterministic initialization from `seed`.
    pub fn init(config: ModelConfig, scheme: InitScheme, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entity_dist = Uniform::new_inclusive(-scheme.entity_range, scheme.entity_range);
        let entities: Vec<f64> = (0..config.entity_table_len())
            .map(|_| entity_dist.sample(&mut rng))
            .collect();

        let shape = config.shape();
        let noise = Uniform::new_inclusive(-scheme.relation_noise, scheme.relation_noise);
        let kk = shape.k * shape.k;
        let mut relations = Vec::with_capacity(config.relation_table_len());
        for _ in 0..config.num_relations {
            let mut params = shape.identity();
            for x in &mut params[..shape.num_matrices() * kk] {
                *x += noise.sample(&mut rng);
            }
            relations.extend_from_slice(&params);
        }
        Self::from_tables(config, entities, relations)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    pub fn entity(&self, e: EntityId) -> &[f64] {
        let d = self.shape.dim();
        &self.entities[e * d..(e + 1) * d]
    }

    pub fn relation(&self, r: RelationId) -> &[f64] {
        let len = self.shape.relation_len();
        &self.relations[r * len..(r + 1) * len]
    }

    pub fn relation_params(&self, r: RelationId) -> RelationParams {
        RelationParams {
            shape: self.shape,
            data: self.relation(r).to_vec(),
        }
    }

    pub fn entity_table(&self) -> &[f64] {
        &self.entities
    }

    pub fn relation_table(&self) -> &[f64] {
        &self.relations
    }

    pub(crate) fn entity_table_mut(&mut self) -> &mut [f64] {
        &mut self.entities
    }

    pub(crate) fn relation_table_mut(&mut self) -> &mut [f64] {
        &mut self.relations
    }

    pub fn entity_mut(&mut self, e: EntityId) -> &mut [f64] {
        let d = self.shape.dim();
        &mut self.entities[e * d..(e + 1) * d]
    }

    pub fn relation_mut(&mut self, r: RelationId) -> &mut [f64] {
        let len = self.shape.relation_len();
        &mut self.relations[r * len..(r + 1) * len]
    }

    /// Applies relation `rel` to an arbitrary vector of dimension `n·k`.
    ///
    /// Panics on a dimension mismatch.
    pub fn apply_relation(&self, rel: RelationId, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.shape.dim(), "vector dimension does not match n·k");
        let mut out = vec![0.0; v.len()];
        self.shape.apply_into(self.relation(rel), v, &mut out);
        out
    }

    /// `‖M_r v_h − v_t‖₂`.
    pub fn score(&self, h: EntityId, rel: RelationId, t: EntityId) -> f64 {
        let mut buf = vec![0.0; self.shape.dim()];
        self.score_with(h, rel, t, &mut buf)
    }

    /// [`Model::score`] with a caller-provided scratch buffer of length `n·k`.
    pub fn score_with(&self, h: EntityId, rel: RelationId, t: EntityId, buf: &mut [f64]) -> f64 {
        self.shape.apply_into(self.relation(rel), self.entity(h), buf);
        distance(buf, self.entity(t))
    }

    /// Parameters of `rel_a` followed by `rel_b`.
    pub fn compose(&self, rel_a: RelationId, rel_b: RelationId) -> RelationParams {
        RelationParams {
            shape: self.shape,
            data: self.shape.compose(self.relation(rel_a), self.relation(rel_b)),
        }
    }

    /// Parameters a rule target stands for.
    pub fn target_params(&self, target: RuleTarget) -> RelationParams {
        match target {
            RuleTarget::Identity => RelationParams::identity(self.shape),
            RuleTarget::Relation(r) => self.relation_params(r),
        }
    }

    /// `‖params(a∘b) − params(target)‖₂` over every parameter entry.
    pub fn composition_residual(&self, rule: &RuleConstraint) -> f64 {
        self.compose(rule.left_a, rule.left_b)
            .distance(&self.target_params(rule.target))
    }

    /// First non-finite parameter, if any, as a description.
    pub fn find_non_finite(&self) -> Option<String> {
        let d = self.shape.dim();
        if let Some(i) = self.entities.iter().position(|x| !x.is_finite()) {
            return Some(format!("entity {} component {}", i / d, i % d));
        }
        let len = self.shape.relation_len();
        self.relations
            .iter()
            .position(|x| !x.is_finite())
            .map(|i| format!("relation {} parameter {}", i / len, i % len))
    }
}

#[inline]
pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}
