//! Retrieval-quality evaluation: k-hop Hits@q, precision over labelled
//! retrievals, the two-sample Kolmogorov-Smirnov statistic, and a TransE
//! baseline.

mod transe;

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{Direction, GraphError, KnowledgeGraph};
use crate::index::{IndexError, VectorDb};
use crate::model::{EntityId, EntityType};

pub use transe::{transe_train, transe_vd, tail_rank, triples_from_kg, TranseConfig, TranseModel, Triple};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("only {available} {entity_type} entities, {requested} requested")]
    InsufficientEntities {
        entity_type: EntityType,
        requested: usize,
        available: usize,
    },
    #[error("entity {0} has no vector")]
    MissingVector(EntityId),
    #[error("invalid evaluation input: {0}")]
    InvalidInput(String),
    #[error("no triples to train on")]
    EmptyTriples,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// Uniform sampling without replacement per entity type, in the fixed type
/// order; ids within a type are returned ascending.
pub fn sample_entities(
    kg: &KnowledgeGraph,
    counts: &BTreeMap<EntityType, usize>,
    seed: u64,
) -> Result<Vec<EntityId>, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &t in EntityType::ALL {
        let want = counts.get(&t).copied().unwrap_or(0);
        if want == 0 {
            continue;
        }
        let pool: Vec<EntityId> = kg.entities().filter(|e| e.entity_type == t).map(|e| e.id).collect();
        if want > pool.len() {
            return Err(EvalError::InsufficientEntities {
                entity_type: t,
                requested: want,
                available: pool.len(),
            });
        }
        let mut picked: Vec<EntityId> = rand::seq::index::sample(&mut rng, pool.len(), want)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        picked.sort();
        out.extend(picked);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReachEvalConfig {
    pub k: usize,
    pub q_values: Vec<usize>,
    pub direction: Direction,
    pub sample_counts: BTreeMap<EntityType, usize>,
    pub seed: u64,
}

impl Default for ReachEvalConfig {
    fn default() -> Self {
        ReachEvalConfig {
            k: 5,
            q_values: vec![1, 5, 10, 15],
            direction: Direction::Either,
            sample_counts: BTreeMap::from([
                (EntityType::Definition, 50),
                (EntityType::Theorem, 30),
                (EntityType::Problem, 20),
            ]),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleHits {
    pub entity_id: EntityId,
    pub q: usize,
    pub r: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitsResult {
    pub k: usize,
    pub direction: Direction,
    pub rates: BTreeMap<usize, f64>,
    pub details: Vec<SampleHits>,
}

impl HitsResult {
    /// `q,rate` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("q,rate\n");
        for (q, rate) in &self.rates {
            s.push_str(&format!("{q},{rate}\n"));
        }
        s
    }
}

/// Hits@q for one q: each sample's top-q neighbours (itself excluded) are
/// checked for k-hop reachability, and r/q is averaged over samples.
pub fn hits_at_q(
    kg: &KnowledgeGraph,
    vd: &VectorDb,
    samples: &[EntityId],
    k: usize,
    q: usize,
    direction: Direction,
) -> Result<HitsResult, EvalError> {
    hits_at_qs(kg, vd, samples, k, &[q], direction)
}

pub fn hits_at_qs(
    kg: &KnowledgeGraph,
    vd: &VectorDb,
    samples: &[EntityId],
    k: usize,
    q_values: &[usize],
    direction: Direction,
) -> Result<HitsResult, EvalError> {
    if k == 0 || q_values.is_empty() || q_values.contains(&0) {
        return Err(EvalError::InvalidInput("k and every q must be at least 1".into()));
    }
    if samples.is_empty() {
        return Err(EvalError::InvalidInput("no samples".into()));
    }
    let max_q = *q_values.iter().max().unwrap_or(&1);
    let mut details = Vec::with_capacity(samples.len() * q_values.len());
    for &s in samples {
        let v = vd.vector(s).ok_or(EvalError::MissingVector(s))?;
        let reachable = kg.k_hop_reachable(s, k, direction)?;
        let hits = match vd.top_k(&v, max_q, &BTreeSet::from([s])) {
            Ok(h) => h,
            Err(IndexError::EmptyIndex) => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        for &q in q_values {
            let r = hits.iter().take(q).filter(|h| reachable.contains(&h.entity_id)).count();
            details.push(SampleHits { entity_id: s, q, r });
        }
    }
    let mut rates = BTreeMap::new();
    for &q in q_values {
        let sum: f64 = details.iter().filter(|d| d.q == q).map(|d| d.r as f64 / q as f64).sum();
        rates.insert(q, sum / samples.len() as f64);
    }
    Ok(HitsResult {
        k,
        direction,
        rates,
        details,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionSample {
    pub entity_id: EntityId,
    pub labels: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionSummary {
    pub per_sample: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n - 1); zero for a single sample.
    pub stdev: f64,
}

pub fn precision(samples: &[PrecisionSample]) -> Result<PrecisionSummary, EvalError> {
    let t = samples
        .first()
        .map(|s| s.labels.len())
        .ok_or_else(|| EvalError::InvalidInput("no precision samples".into()))?;
    if t == 0 || samples.iter().any(|s| s.labels.len() != t) {
        return Err(EvalError::InvalidInput("label lists must share one nonzero length".into()));
    }
    let per_sample: Vec<f64> = samples
        .iter()
        .map(|s| s.labels.iter().filter(|&&l| l).count() as f64 / t as f64)
        .collect();
    let n = per_sample.len() as f64;
    let mean = per_sample.iter().sum::<f64>() / n;
    let stdev = if per_sample.len() < 2 {
        0.0
    } else {
        (per_sample.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(PrecisionSummary { per_sample, mean, stdev })
}

/// Two-sample statistic D = sup |F_a - F_b| over the empirical CDFs.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::InvalidInput("both samples must be nonempty".into()));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(EvalError::InvalidInput("NaN in sample".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}
