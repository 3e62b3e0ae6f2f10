//! Binary checkpoints.
//!
//! Layout, all integers little endian:
//!
//! ```text
//! magic      8 bytes  "SEMECKPT"
//! version    u32      FORMAT_VERSION
//! header_len u64
//! header     JSON     {"config": ModelConfig, "entities": [..], "relations": [..]}
//! entities   f64 × N_e·n·k
//! relations  f64 × N_r·params_per_relation
//! crc32      u32      over every preceding byte
//! ```
//!
//! Parameters are stored as raw IEEE-754 bits, so a write/read cycle is exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Vocabulary;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};

pub const MAGIC: &[u8; 8] = b"SEMECKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    entities: Vec<String>,
    relations: Vec<String>,
}

pub fn encode(model: &Model, vocab: &Vocabulary) -> Result<Vec<u8>> {
    let config = *model.config();
    if vocab.num_entities() != config.num_entities || vocab.num_relations() != config.num_relations {
        return Err(Error::Checkpoint(format!(
            "vocabulary ({} entities, {} relations) does not match model ({}, {})",
            vocab.num_entities(),
            vocab.num_relations(),
            config.num_entities,
            config.num_relations
        )));
    }
    let header = serde_json::to_vec(&Header {
        config,
        entities: vocab.entity_names().to_vec(),
        relations: vocab.relation_names().to_vec(),
    })
    .map_err(|e| Error::Checkpoint(format!("cannot encode header: {e}")))?;

    let floats = model.entity_table().len() + model.relation_table().len();
    let mut out = Vec::with_capacity(8 + 4 + 8 + header.len() + 8 * floats + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for x in model.entity_table().iter().chain(model.relation_table()) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated file while reading {what}")))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| Error::Checkpoint(format!("{what} size overflows")))?;
        Ok(self
            .take(len, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<(Model, Vocabulary)> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Checkpoint(
            "bad format tag: not a seme checkpoint (expected magic SEMECKPT)".into(),
        ));
    }
    let mut r = Reader { bytes, pos: MAGIC.len() };
    let version = r.u32("format version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version} (this build reads version {FORMAT_VERSION})"
        )));
    }
    if bytes.len() < 4 {
        return Err(Error::Checkpoint("truncated file".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored_crc = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored_crc {
        return Err(Error::Checkpoint("checksum mismatch: file is corrupted".into()));
    }
    let mut r = Reader { bytes: body, pos: r.pos };
    let header_len = r.u64("header length")? as usize;
    let header: Header = serde_json::from_slice(r.take(header_len, "header")?)
        .map_err(|e| Error::Checkpoint(format!("malformed header: {e}")))?;
    let config = header.config;
    config
        .validate()
        .map_err(|e| Error::Checkpoint(format!("invalid model config in header: {e}")))?;
    let entities = r.f64s(config.entity_table_len(), "entity table")?;
    let relations = r.f64s(config.relation_table_len(), "relation table")?;
    if r.pos != body.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", body.len() - r.pos)));
    }
    let vocab = Vocabulary::from_names(header.entities, header.relations)
        .map_err(|e| Error::Checkpoint(format!("invalid vocabulary: {e}")))?;
    if vocab.num_entities() != config.num_entities || vocab.num_relations() != config.num_relations {
        return Err(Error::Checkpoint("vocabulary size does not match model config".into()));
    }
    let model = Model::from_tables(config, entities, relations)?;
    Ok((model, vocab))
}

pub fn write_checkpoint(path: impl AsRef<Path>, model: &Model, vocab: &Vocabulary) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(model, vocab)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(Model, Vocabulary)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
