//! Exact cosine top-k index over entity vectors.

mod file;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::embedding::{
    embed_entity, EmbedConfig, Embedder, EmbeddingError, SentenceMask, Strategy, WeightVector, DIM,
};
use crate::graph::KnowledgeGraph;
use crate::model::EntityId;

pub use file::{load_vd, read_vd, save_vd, vd_to_bytes, write_vd};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IndexError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("entity {0} already indexed")]
    DuplicateId(EntityId),
    #[error("vector norm is too small")]
    DegenerateVector,
    #[error("index has no searchable records")]
    EmptyIndex,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("malformed vector file: {0}")]
    MalformedFile(String),
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for IndexError {
    fn from(e: std::io::Error) -> Self {
        IndexError::Io(e.to_string())
    }
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, IndexError> {
    if u.len() != v.len() {
        return Err(IndexError::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(dot / (nu * nv))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyTag {
    Strategy1,
    Strategy2,
    Transe,
    External,
}

impl StrategyTag {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyTag::Strategy1 => "strategy1",
            StrategyTag::Strategy2 => "strategy2",
            StrategyTag::Transe => "transe",
            StrategyTag::External => "external",
        }
    }

    pub fn parse(s: &str) -> Option<StrategyTag> {
        [StrategyTag::Strategy1, StrategyTag::Strategy2, StrategyTag::Transe, StrategyTag::External]
            .into_iter()
            .find(|t| t.as_str() == s)
    }
}

impl From<Strategy> for StrategyTag {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Strategy1 => StrategyTag::Strategy1,
            Strategy::Strategy2 => StrategyTag::Strategy2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub entity_id: EntityId,
    pub score: f64,
}

/// Vectors are stored unit-normalized as `f32`; scores are computed in
/// `f64` against the stored values.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorDb {
    dim: usize,
    pub strategy_tag: StrategyTag,
    pub weights: Option<WeightVector>,
    pub mask: SentenceMask,
    records: BTreeMap<EntityId, Vec<f32>>,
    norms: BTreeMap<EntityId, f64>,
}

impl VectorDb {
    pub fn new(strategy_tag: StrategyTag, weights: Option<WeightVector>, mask: SentenceMask) -> Self {
        VectorDb {
            dim: DIM,
            strategy_tag,
            weights,
            mask,
            records: BTreeMap::new(),
            norms: BTreeMap::new(),
        }
    }

    pub fn for_config(cfg: &EmbedConfig) -> Self {
        let weights = (cfg.strategy == Strategy::Strategy2).then_some(cfg.weights);
        VectorDb::new(cfg.strategy.into(), weights, cfg.mask)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, id: EntityId) -> bool {
        self.records.contains_key(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.records.keys().copied()
    }

    /// The stored (normalized, `f32`-rounded) vector.
    pub fn vector(&self, id: EntityId) -> Option<Vec<f64>> {
        self.records.get(&id).map(|v| v.iter().map(|&x| f64::from(x)).collect())
    }

    pub(crate) fn raw_records(&self) -> &BTreeMap<EntityId, Vec<f32>> {
        &self.records
    }

    pub fn insert(&mut self, id: EntityId, vec: &[f64]) -> Result<(), IndexError> {
        if vec.len() != self.dim {
            return Err(IndexError::DimensionMismatch {
                expected: self.dim,
                got: vec.len(),
            });
        }
        if self.records.contains_key(&id) {
            return Err(IndexError::DuplicateId(id));
        }
        let n = vec.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n >= 1e-12) || !n.is_finite() {
            return Err(IndexError::DegenerateVector);
        }
        let stored: Vec<f32> = vec.iter().map(|x| (x / n) as f32).collect();
        self.insert_stored(id, stored);
        Ok(())
    }

    pub(crate) fn insert_stored(&mut self, id: EntityId, stored: Vec<f32>) {
        let norm = stored.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
        self.norms.insert(id, norm);
        self.records.insert(id, stored);
    }

    pub fn remove(&mut self, id: EntityId) -> bool {
        self.norms.remove(&id);
        self.records.remove(&id).is_some()
    }

    /// Exact scan. Hits are ordered by score descending, then id ascending.
    pub fn top_k(
        &self,
        query: &[f64],
        k: usize,
        exclude: &BTreeSet<EntityId>,
    ) -> Result<Vec<SearchHit>, IndexError> {
        if query.len() != self.dim {
            return Err(IndexError::DimensionMismatch {
                expected: self.dim,
                got: query.len(),
            });
        }
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        let qn = query.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(qn >= 1e-12) {
            return Err(IndexError::DegenerateVector);
        }
        let mut hits: Vec<SearchHit> = self
            .records
            .iter()
            .filter(|(id, _)| !exclude.contains(id))
            .map(|(&id, v)| {
                let dot: f64 = query.iter().zip(v).map(|(a, &b)| a * f64::from(b)).sum();
                SearchHit {
                    entity_id: id,
                    score: dot / (qn * self.norms[&id]),
                }
            })
            .collect();
        if hits.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.entity_id.cmp(&b.entity_id)));
        hits.truncate(k);
        Ok(hits)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildFailure {
    pub entity_id: EntityId,
    pub error: String,
}

/// Embeds every entity. Failing entities are reported and skipped; an
/// unavailable embedder aborts.
pub fn build_vd(
    kg: &KnowledgeGraph,
    embedder: &dyn Embedder,
    cfg: &EmbedConfig,
) -> Result<(VectorDb, Vec<BuildFailure>), EmbeddingError> {
    let mut db = VectorDb::for_config(cfg);
    let mut failures = Vec::new();
    for e in kg.entities() {
        match embed_entity(e, embedder, cfg) {
            Ok(v) => {
                if let Err(err) = db.insert(e.id, v.as_slice()) {
                    failures.push(BuildFailure {
                        entity_id: e.id,
                        error: err.to_string(),
                    });
                }
            }
            Err(err @ EmbeddingError::BackendUnavailable(_)) => return Err(err),
            Err(err) => failures.push(BuildFailure {
                entity_id: e.id,
                error: err.to_string(),
            }),
        }
    }
    Ok((db, failures))
}
