//! Edge triples and a TransE trainer (margin ranking over h + r ≈ t).

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::embedding::{SentenceMask, DIM};
use crate::graph::KnowledgeGraph;
use crate::index::{StrategyTag, VectorDb};
use crate::model::{EdgeTactic, EntityId};

/// One edge: `head` is referenced by `tail`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: EdgeTactic,
    pub tail: EntityId,
}

pub fn triples_from_kg(kg: &KnowledgeGraph) -> Vec<Triple> {
    let mut out: Vec<Triple> = kg
        .edges()
        .map(|e| Triple {
            head: e.from,
            relation: e.tactic,
            tail: e.to,
        })
        .collect();
    out.sort_by_key(|t| (t.head, t.tail));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TranseConfig {
    pub dim: usize,
    pub margin: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub negatives_per_positive: usize,
    pub seed: u64,
}

impl Default for TranseConfig {
    fn default() -> Self {
        TranseConfig {
            dim: DIM,
            margin: 1.0,
            learning_rate: 0.01,
            epochs: 100,
            negatives_per_positive: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranseModel {
    pub entities: BTreeMap<EntityId, Vec<f64>>,
    pub relations: BTreeMap<EdgeTactic, Vec<f64>>,
    /// Mean hinge loss per epoch, measured before each update.
    pub epoch_losses: Vec<f64>,
}

impl TranseModel {
    /// ‖h + r − t‖₂; `None` for an unknown entity or relation.
    pub fn distance(&self, head: EntityId, relation: EdgeTactic, tail: EntityId) -> Option<f64> {
        Some(dist(
            self.entities.get(&head)?,
            self.relations.get(&relation)?,
            self.entities.get(&tail)?,
        ))
    }
}

fn dist(h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    h.iter()
        .zip(r)
        .zip(t)
        .map(|((h, r), t)| (h + r - t) * (h + r - t))
        .sum::<f64>()
        .sqrt()
}

/// Writes the unit direction of h + r − t into `out` (zeros when the
/// residual vanishes).
fn residual_dir(h: &[f64], r: &[f64], t: &[f64], out: &mut [f64]) {
    let mut n = 0.0;
    for (i, o) in out.iter_mut().enumerate() {
        *o = h[i] + r[i] - t[i];
        n += *o * *o;
    }
    let n = n.sqrt();
    if n < 1e-12 {
        out.iter_mut().for_each(|o| *o = 0.0);
    } else {
        out.iter_mut().for_each(|o| *o /= n);
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Vectors are drawn uniform in ±6/√dim (entities in id order, then relations
/// in tactic order) and scaled to unit length. Each epoch visits the triples in a seeded shuffle; every
/// positive is paired with corrupted triples whose head or tail (fair coin)
/// is replaced by a different entity drawn uniformly.
pub fn transe_train(triples: &[Triple], cfg: &TranseConfig) -> Result<TranseModel, EvalError> {
    if triples.is_empty() {
        return Err(EvalError::EmptyTriples);
    }
    if cfg.dim == 0
        || cfg.negatives_per_positive == 0
        || !(cfg.margin > 0.0 && cfg.margin.is_finite())
        || !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite())
    {
        return Err(EvalError::InvalidInput(
            "dim, margin, learning rate and negatives must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = 6.0 / (cfg.dim as f64).sqrt();
    let init = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut v: Vec<f64> = (0..cfg.dim).map(|_| rng.random_range(-bound..=bound)).collect();
        normalize(&mut v);
        v
    };

    let ids: Vec<EntityId> = triples
        .iter()
        .flat_map(|t| [t.head, t.tail])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let rel_ids: Vec<EdgeTactic> = triples
        .iter()
        .map(|t| t.relation)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut ent: Vec<Vec<f64>> = ids.iter().map(|_| init(&mut rng)).collect();
    let mut rel: Vec<Vec<f64>> = rel_ids.iter().map(|_| init(&mut rng)).collect();
    let pos = |id: EntityId| ids.binary_search(&id).expect("entity indexed");
    let indexed: Vec<(usize, usize, usize)> = triples
        .iter()
        .map(|t| (pos(t.head), rel_ids.binary_search(&t.relation).expect("relation indexed"), pos(t.tail)))
        .collect();

    let n = ids.len();
    let lr = cfg.learning_rate;
    let mut order: Vec<usize> = (0..triples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let (mut gp, mut gn) = (vec![0.0; cfg.dim], vec![0.0; cfg.dim]);
    for _ in 0..cfg.epochs {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let mut total = 0.0;
        for &ti in &order {
            let (h, ri, tl) = indexed[ti];
            for _ in 0..cfg.negatives_per_positive {
                let corrupt_head = rng.random_bool(0.5);
                let orig = if corrupt_head { h } else { tl };
                let mut other = if n > 1 { rng.random_range(0..n - 1) } else { orig };
                if n > 1 && other >= orig {
                    other += 1;
                }
                let (h2, t2) = if corrupt_head { (other, tl) } else { (h, other) };
                let r = &rel[ri];
                let loss = cfg.margin + dist(&ent[h], r, &ent[tl]) - dist(&ent[h2], r, &ent[t2]);
                if loss <= 0.0 {
                    continue;
                }
                total += loss;
                residual_dir(&ent[h], r, &ent[tl], &mut gp);
                residual_dir(&ent[h2], r, &ent[t2], &mut gn);
                let r = &mut rel[ri];
                for i in 0..cfg.dim {
                    r[i] -= lr * (gp[i] - gn[i]);
                    ent[h][i] -= lr * gp[i];
                    ent[tl][i] += lr * gp[i];
                    ent[h2][i] += lr * gn[i];
                    ent[t2][i] -= lr * gn[i];
                }
                for e in [h, tl, h2, t2] {
                    normalize(&mut ent[e]);
                }
            }
        }
        epoch_losses.push(total / (triples.len() * cfg.negatives_per_positive) as f64);
    }
    Ok(TranseModel {
        entities: ids.into_iter().zip(ent).collect(),
        relations: rel_ids.into_iter().zip(rel).collect(),
        epoch_losses,
    })
}

/// 1-based rank of the true tail among all entities by ‖h + r − e‖₂; ties
/// with the true tail count against it.
pub fn tail_rank(model: &TranseModel, triple: &Triple) -> Option<usize> {
    let h = model.entities.get(&triple.head)?;
    let r = model.relations.get(&triple.relation)?;
    let target = dist(h, r, model.entities.get(&triple.tail)?);
    Some(
        1 + model
            .entities
            .iter()
            .filter(|(&id, e)| id != triple.tail && dist(h, r, e) <= target)
            .count(),
    )
}

/// A transe-tagged index over the trained entity vectors, so the Hits@q
/// evaluation runs unchanged. Requires the index dimension.
pub fn transe_vd(model: &TranseModel) -> Result<VectorDb, EvalError> {
    let mut vd = VectorDb::new(StrategyTag::Transe, None, SentenceMask::ALL);
    for (&id, v) in &model.entities {
        vd.insert(id, v)?;
    }
    Ok(vd)
}
