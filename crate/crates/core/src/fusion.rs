//! Knowledge fusion: folding an input graph into an existing one.
//!
//! Each input entity is embedded, its nearest existing entities are judged
//! for consistency by the LLM, and it is either merged into the single
//! agreeing candidate or added as a new node. Entities added earlier in a
//! batch become candidates for later ones.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::embedding::{EmbedConfig, Embedder, EmbeddingError};
use crate::graph::{normalize_title, GraphError, KnowledgeGraph};
use crate::index::{build_vd, IndexError, SearchHit, VectorDb};
use crate::llm::{judge_best_candidate, judge_consistency, CompletionParams, LlmBackend, LlmError, Verdict};
use crate::model::{Entity, EntityId, TacticLabel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FusionError {
    #[error("n_candidates must be at least 1")]
    InvalidConfig,
    #[error("merge target {0} does not exist")]
    UnknownTarget(EntityId),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub n_candidates: usize,
    pub embed: EmbedConfig,
    pub params: CompletionParams,
    pub attempts: u32,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            n_candidates: 5,
            embed: EmbedConfig::default(),
            params: CompletionParams::default(),
            attempts: crate::llm::DEFAULT_RETRIES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    AddNew,
    Merge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionDecision {
    pub kind: DecisionKind,
    pub target: Option<EntityId>,
    pub yes_candidates: Vec<EntityId>,
}

impl FusionDecision {
    fn add_new(yes_candidates: Vec<EntityId>) -> Self {
        FusionDecision {
            kind: DecisionKind::AddNew,
            target: None,
            yes_candidates,
        }
    }

    fn merge(target: EntityId, yes_candidates: Vec<EntityId>) -> Self {
        FusionDecision {
            kind: DecisionKind::Merge,
            target: Some(target),
            yes_candidates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateVerdict {
    pub candidate: EntityId,
    /// Unset when the response could not be read.
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decided {
    pub decision: FusionDecision,
    pub verdicts: Vec<CandidateVerdict>,
    pub warning: Option<String>,
}

/// Judges each candidate in rank order and picks merge-or-add. Any
/// unreadable response makes the decision add-new; only an unavailable
/// backend is an error.
pub fn decide(
    input: &Entity,
    candidates: &[(EntityId, &Entity)],
    llm: &dyn LlmBackend,
    params: &CompletionParams,
    attempts: u32,
) -> Result<Decided, LlmError> {
    let mut verdicts = Vec::with_capacity(candidates.len());
    let mut yes = Vec::new();
    let mut warning = None;
    for &(id, cand) in candidates {
        match judge_consistency(input, cand, llm, params, attempts) {
            Ok(v) => {
                if v == Verdict::Yes {
                    yes.push(id);
                }
                verdicts.push(CandidateVerdict {
                    candidate: id,
                    verdict: Some(v),
                });
            }
            Err(e @ LlmError::BackendUnavailable(_)) => return Err(e),
            Err(e) => {
                warning.get_or_insert_with(|| format!("consistency with {id}: {e}"));
                verdicts.push(CandidateVerdict {
                    candidate: id,
                    verdict: None,
                });
            }
        }
    }
    let decision = if warning.is_some() || yes.is_empty() {
        FusionDecision::add_new(yes)
    } else if yes.len() == 1 {
        FusionDecision::merge(yes[0], yes)
    } else {
        let pool: Vec<(EntityId, &Entity)> = candidates
            .iter()
            .filter(|(id, _)| yes.contains(id))
            .copied()
            .collect();
        match judge_best_candidate(input, &pool, llm, params, attempts) {
            Ok(best) => FusionDecision::merge(best, yes),
            Err(e @ LlmError::BackendUnavailable(_)) => return Err(e),
            Err(e) => {
                warning = Some(format!("choosing among {} agreeing candidates: {e}", yes.len()));
                FusionDecision::add_new(yes)
            }
        }
    };
    Ok(Decided {
        decision,
        verdicts,
        warning,
    })
}

/// The `n` nearest stored entities; empty when the index is.
pub fn candidate_entities(existing_vd: &VectorDb, input_vec: &[f64], n: usize) -> Vec<SearchHit> {
    if existing_vd.is_empty() || n == 0 {
        return Vec::new();
    }
    existing_vd.top_k(input_vec, n, &BTreeSet::new()).unwrap_or_default()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeSummary {
    pub refs_added: usize,
    pub records_appended: usize,
    pub aliases: Vec<String>,
    pub warnings: Vec<String>,
}

/// Folds `incoming` into `target`. The target keeps its title, contents and
/// field and wins tactic conflicts; incoming references and derivation
/// records are unioned in, and incoming's title and label become aliases of
/// the target.
pub fn merge_entities(
    existing: &mut KnowledgeGraph,
    target: EntityId,
    incoming: &Entity,
) -> Result<MergeSummary, FusionError> {
    let mut t = existing
        .entity(target)
        .cloned()
        .ok_or(FusionError::UnknownTarget(target))?;
    let mut summary = MergeSummary::default();
    summary.refs_added = union_refs(
        &mut t.refs,
        &mut t.references_tactics,
        &incoming.refs,
        &incoming.references_tactics,
    );
    let incoming_records = incoming.derivations();
    if !incoming_records.is_empty() {
        match t.derivations_mut() {
            Some(records) => {
                for rec in incoming_records {
                    match records.iter_mut().find(|r| r.contents == rec.contents) {
                        Some(same) => {
                            union_refs(&mut same.refs, &mut same.references_tactics, &rec.refs, &rec.references_tactics);
                        }
                        None => {
                            records.push(rec.clone());
                            summary.records_appended += 1;
                        }
                    }
                }
            }
            None => summary.warnings.push(format!(
                "{} derivation record(s) of {} dropped: target {} is a {}",
                incoming_records.len(),
                incoming.display_name(),
                target,
                t.entity_type
            )),
        }
    }
    existing.replace_entity(t)?;
    for name in [&incoming.title, &incoming.label] {
        if existing.add_alias(name, target)? {
            summary.aliases.push(name.clone());
        }
    }
    Ok(summary)
}

/// Adds references missing from `refs` (by normalized title) and tactics for
/// references that have none. Returns the number of references added.
fn union_refs(
    refs: &mut Vec<String>,
    tactics: &mut BTreeMap<String, TacticLabel>,
    new_refs: &[String],
    new_tactics: &BTreeMap<String, TacticLabel>,
) -> usize {
    let mut added = 0;
    let names = new_refs.iter().chain(new_tactics.keys().filter(|k| !new_refs.contains(k)));
    for name in names {
        let key = normalize_title(name);
        let slot = match refs.iter().find(|r| normalize_title(r) == key) {
            Some(existing) => existing.clone(),
            None => {
                refs.push(name.clone());
                added += 1;
                name.clone()
            }
        };
        if let Some(&tactic) = new_tactics.get(name) {
            let labelled = tactics.keys().any(|k| normalize_title(k) == key);
            if !labelled {
                tactics.insert(slot, tactic);
            }
        }
    }
    added
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionOutcome {
    pub input_id: EntityId,
    pub candidates: Vec<SearchHit>,
    pub verdicts: Vec<CandidateVerdict>,
    pub decision: Option<FusionDecision>,
    /// Id of the new node, or the merge target.
    pub result_id: Option<EntityId>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    pub entities: Vec<FusionOutcome>,
    pub added: usize,
    pub merged: usize,
    /// Entities left out because the LLM backend failed on them.
    pub failed: usize,
    pub warnings: Vec<String>,
}

/// Fuses every entity of `input` into `existing` in ascending id order and
/// rebuilds `existing`'s edges once at the end.
pub fn fuse(
    input: &KnowledgeGraph,
    existing: &mut KnowledgeGraph,
    embedder: &dyn Embedder,
    llm: &dyn LlmBackend,
    cfg: &FusionConfig,
) -> Result<FusionReport, FusionError> {
    if cfg.n_candidates == 0 {
        return Err(FusionError::InvalidConfig);
    }
    let (input_vd, input_failures) = build_vd(input, embedder, &cfg.embed)?;
    let (mut existing_vd, existing_failures) = build_vd(existing, embedder, &cfg.embed)?;
    let mut report = FusionReport::default();
    for f in &input_failures {
        report.warnings.push(format!("input entity {} not embedded: {}", f.entity_id, f.error));
    }
    for f in &existing_failures {
        report.warnings.push(format!("existing entity {} not embedded: {}", f.entity_id, f.error));
    }

    for incoming in input.entities() {
        let vector = input_vd.vector(incoming.id);
        let candidates = vector
            .as_deref()
            .map(|v| candidate_entities(&existing_vd, v, cfg.n_candidates))
            .unwrap_or_default();
        let mut outcome = FusionOutcome {
            input_id: incoming.id,
            candidates: candidates.clone(),
            verdicts: Vec::new(),
            decision: None,
            result_id: None,
            error: None,
        };
        let pool: Vec<(EntityId, &Entity)> = candidates
            .iter()
            .filter_map(|h| existing.entity(h.entity_id).map(|e| (h.entity_id, e)))
            .collect();
        let decided = match decide(incoming, &pool, llm, &cfg.params, cfg.attempts) {
            Ok(d) => d,
            Err(e) => {
                log::warn!("fusion of input entity {}: {e}", incoming.id);
                outcome.error = Some(e.to_string());
                report.failed += 1;
                report.entities.push(outcome);
                continue;
            }
        };
        if let Some(w) = &decided.warning {
            report.warnings.push(format!("input entity {}: {w}; added as new", incoming.id));
        }
        outcome.verdicts = decided.verdicts;
        match decided.decision.target {
            Some(target) => {
                let summary = merge_entities(existing, target, incoming)?;
                report
                    .warnings
                    .extend(summary.warnings.into_iter().map(|w| format!("input entity {}: {w}", incoming.id)));
                outcome.result_id = Some(target);
                report.merged += 1;
            }
            None => {
                let id = add_new(existing, incoming, &mut report.warnings)?;
                if let Some(v) = &vector {
                    existing_vd.insert(id, v)?;
                }
                outcome.result_id = Some(id);
                report.added += 1;
            }
        }
        outcome.decision = Some(decided.decision);
        report.entities.push(outcome);
    }
    let rebuild = existing.rebuild_edges();
    report.warnings.extend(
        rebuild
            .warnings
            .iter()
            .map(|w| format!("edge {} -> {} starts at a {}", w.from, w.to, w.source_type)),
    );
    Ok(report)
}

fn add_new(
    existing: &mut KnowledgeGraph,
    incoming: &Entity,
    warnings: &mut Vec<String>,
) -> Result<EntityId, FusionError> {
    let id = existing.next_id();
    let mut e = incoming.clone();
    e.id = id;
    e.in_refs.clear();
    e.in_ref_ids.clear();
    e.out_refs.clear();
    e.out_ref_ids.clear();
    if existing.exact_lookup(&e.title).is_some() {
        let renamed = format!("{} ({})", e.title, id);
        warnings.push(format!("input entity {}: title {:?} taken; stored as {:?}", incoming.id, e.title, renamed));
        e.title = renamed;
    }
    Ok(existing.add_entity(e)?)
}
