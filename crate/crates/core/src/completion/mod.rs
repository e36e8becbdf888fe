//! Knowledge completion: supplying missing proofs and solutions.
//!
//! For each incomplete entity the problem is classified, the knowledge it
//! needs is listed by the LLM and looked up (exact title search, then vector
//! search), and answers are generated until they pass every applicable
//! calibration rule or the round budget runs out.

mod rules;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::embedding::{embed_entity, EmbedConfig, Embedder, EmbeddingError};
use crate::graph::{normalize_title, GraphError, KnowledgeGraph};
use crate::index::{IndexError, SearchHit, VectorDb};
use crate::llm::{ask, render_template, CompletionParams, LlmBackend, LlmError, TemplateContext, TemplateId};
use crate::model::{DerivationRecord, Entity, EntityId, EntityType};

pub use rules::{
    default_rules, CalibrationRule, FinalStatement, NonEmptyAnswer, NumericResult, RestatesAskedQuantity,
};

pub const COMPLETION_SOURCE: &str = "completion";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompletionError {
    #[error("max_rounds must be at least 1")]
    InvalidConfig,
    #[error("entity {0} does not exist")]
    UnknownEntity(EntityId),
    #[error("entity {0} is not missing a proof or solution")]
    EntityNotIncomplete(EntityId),
    #[error("completion of entity {0} did not pass calibration")]
    NotComplete(EntityId),
    #[error("backend unavailable after {} round(s): {message}", trace.len())]
    BackendUnavailable { message: String, trace: Vec<TraceEntry> },
    #[error(transparent)]
    Llm(LlmError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemCategory {
    Application,
    Calculation,
    Proof,
}

impl ProblemCategory {
    pub const ALL: [ProblemCategory; 3] = [
        ProblemCategory::Application,
        ProblemCategory::Calculation,
        ProblemCategory::Proof,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemCategory::Application => "application",
            ProblemCategory::Calculation => "calculation",
            ProblemCategory::Proof => "proof",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindHint {
    Definition,
    Theorem,
    Unspecified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgePoint {
    pub text: String,
    pub kind_hint: KindHint,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalBundle {
    pub exact_hits: Vec<EntityId>,
    pub fuzzy_hits: Vec<SearchHit>,
    pub selected: Vec<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub answer: String,
    pub violations: Vec<String>,
    /// Empty when the answer passed.
    pub error_summary: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompletionStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub answer: String,
    pub rounds: usize,
    pub trace: Vec<TraceEntry>,
    pub status: CompletionStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionConfig {
    pub max_rounds: usize,
    /// Vector-search hits per retrieval seed.
    pub fuzzy_k: usize,
    pub embed: EmbedConfig,
    pub params: CompletionParams,
    pub attempts: u32,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        CompletionConfig {
            max_rounds: 3,
            fuzzy_k: 3,
            embed: EmbedConfig::default(),
            params: CompletionParams::default(),
            attempts: crate::llm::DEFAULT_RETRIES,
        }
    }
}

/// Theorems without proofs and problems without solutions, ascending.
pub fn find_incomplete(kg: &KnowledgeGraph) -> Vec<EntityId> {
    kg.entities()
        .filter(|e| is_incomplete(e))
        .map(|e| e.id)
        .collect()
}

fn is_incomplete(e: &Entity) -> bool {
    match e.entity_type {
        EntityType::Theorem => e.proofs.is_empty(),
        EntityType::Problem => e.solutions.is_empty(),
        _ => false,
    }
}

pub fn parse_category(text: &str) -> Result<ProblemCategory, LlmError> {
    let lower = text.to_lowercase();
    let words: BTreeSet<&str> = lower.split(|c: char| !c.is_alphanumeric()).collect();
    let found: Vec<ProblemCategory> = ProblemCategory::ALL
        .into_iter()
        .filter(|c| words.contains(c.as_str()))
        .collect();
    match found.as_slice() {
        [one] => Ok(*one),
        _ => Err(LlmError::UndecidableResponse(text.trim().to_string())),
    }
}

pub fn classify_problem(
    llm: &dyn LlmBackend,
    text: &str,
    params: &CompletionParams,
    attempts: u32,
) -> Result<ProblemCategory, LlmError> {
    let prompt = render_template(TemplateId::CompletionClassify, &TemplateContext::new().section("Problem", text))?;
    ask(llm, &prompt, params, attempts, parse_category)
}

/// One point per line; `definition:`/`theorem:` prefixes set the kind hint.
/// Bullets and numbering are stripped and repeated points dropped.
pub fn parse_knowledge_points(text: &str) -> Result<Vec<KnowledgePoint>, LlmError> {
    let mut out: Vec<KnowledgePoint> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut nonempty = false;
    for raw in text.lines() {
        if !matches!(raw.trim(), "" | "[]") {
            nonempty = true;
        }
        let line = raw
            .trim()
            .trim_start_matches(|c: char| c == '-' || c == '*' || c == '•' || c.is_ascii_digit())
            .trim_start_matches(['.', ')'])
            .trim();
        if line.is_empty() || line == "[]" {
            continue;
        }
        let (kind_hint, rest) = match line.split_once(':') {
            Some((k, rest)) if k.trim().eq_ignore_ascii_case("definition") => (KindHint::Definition, rest),
            Some((k, rest)) if k.trim().eq_ignore_ascii_case("theorem") => (KindHint::Theorem, rest),
            _ => (KindHint::Unspecified, line),
        };
        let text = rest.trim().trim_end_matches(['.', ';', ',']).trim();
        if text.is_empty() || !text.chars().any(char::is_alphanumeric) {
            continue;
        }
        if seen.insert(normalize_title(text)) {
            out.push(KnowledgePoint {
                text: text.to_string(),
                kind_hint,
            });
        }
    }
    if nonempty && out.is_empty() {
        return Err(LlmError::ParseFailure(format!("no knowledge points in `{}`", text.trim())));
    }
    Ok(out)
}

pub fn generate_knowledge_points(
    llm: &dyn LlmBackend,
    text: &str,
    params: &CompletionParams,
    attempts: u32,
) -> Result<Vec<KnowledgePoint>, LlmError> {
    let prompt = render_template(
        TemplateId::CompletionKnowledgePoints,
        &TemplateContext::new().section("Problem", text),
    )?;
    ask(llm, &prompt, params, attempts, parse_knowledge_points)
}

/// Stage 1 looks each point up by exact title, also under its
/// `Definition:`/`Theorem:` prefixed form. Stage 2 searches the index with
/// the embedding of each point text and the stored vector of each stage-1
/// hit. Entities in `exclude` never appear.
pub fn two_stage_retrieve(
    points: &[KnowledgePoint],
    kg: &KnowledgeGraph,
    vd: &VectorDb,
    embedder: &dyn Embedder,
    cfg: &CompletionConfig,
    exclude: &BTreeSet<EntityId>,
) -> Result<RetrievalBundle, CompletionError> {
    let mut bundle = RetrievalBundle::default();
    for p in points {
        let prefixes: &[&str] = match p.kind_hint {
            KindHint::Definition => &["", "Definition:"],
            KindHint::Theorem => &["", "Theorem:"],
            KindHint::Unspecified => &["", "Definition:", "Theorem:"],
        };
        let hit = prefixes
            .iter()
            .find_map(|pre| kg.exact_lookup(&format!("{pre}{}", p.text)));
        if let Some(id) = hit.filter(|id| !exclude.contains(id)) {
            if !bundle.exact_hits.contains(&id) {
                bundle.exact_hits.push(id);
            }
        }
    }
    if vd.is_empty() || cfg.fuzzy_k == 0 {
        bundle.selected = bundle.exact_hits.clone();
        return Ok(bundle);
    }

    let mut seeds: Vec<(Vec<f64>, Option<EntityId>)> = Vec::new();
    for p in points {
        match embedder.embed_text(&p.text) {
            Ok(v) => seeds.push((v.into_inner(), None)),
            Err(EmbeddingError::DegenerateVector) => {}
            Err(e) => return Err(e.into()),
        }
    }
    for &id in &bundle.exact_hits {
        let v = match vd.vector(id) {
            Some(v) => v,
            None => match kg.entity(id).map(|e| embed_entity(e, embedder, &cfg.embed)) {
                Some(Ok(v)) => v.into_inner(),
                _ => continue,
            },
        };
        seeds.push((v, Some(id)));
    }
    let mut best: BTreeMap<EntityId, f64> = BTreeMap::new();
    for (v, seed) in &seeds {
        let mut skip = exclude.clone();
        skip.extend(*seed);
        let hits = match vd.top_k(v, cfg.fuzzy_k, &skip) {
            Ok(h) => h,
            Err(IndexError::EmptyIndex) => continue,
            Err(e) => return Err(e.into()),
        };
        for h in hits {
            let slot = best.entry(h.entity_id).or_insert(h.score);
            *slot = slot.max(h.score);
        }
    }
    let mut fuzzy: Vec<SearchHit> = best
        .into_iter()
        .map(|(entity_id, score)| SearchHit { entity_id, score })
        .collect();
    fuzzy.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.entity_id.cmp(&b.entity_id)));
    bundle.selected = bundle.exact_hits.clone();
    for h in &fuzzy {
        if !bundle.selected.contains(&h.entity_id) {
            bundle.selected.push(h.entity_id);
        }
    }
    bundle.fuzzy_hits = fuzzy;
    Ok(bundle)
}

/// The selected entities as "Title\ncontents" paragraphs.
pub fn package_knowledge(kg: &KnowledgeGraph, bundle: &RetrievalBundle) -> String {
    let parts: Vec<String> = bundle
        .selected
        .iter()
        .filter_map(|id| kg.entity(*id))
        .map(crate::llm::entity_summary)
        .collect();
    if parts.is_empty() {
        "(none)".to_string()
    } else {
        parts.join("\n\n")
    }
}

/// The problem statement handed to the LLM: display name and contents.
pub fn problem_text(e: &Entity) -> String {
    crate::llm::entity_summary(e)
}

fn check_answer(
    rules: &[Box<dyn CalibrationRule>],
    category: ProblemCategory,
    problem: &str,
    answer: &str,
) -> Vec<String> {
    rules
        .iter()
        .filter(|r| r.applies_to(category))
        .filter_map(|r| r.check(problem, answer).err().map(|v| format!("{}: {v}", r.name())))
        .collect()
}

/// Generates answers until one passes every rule applying to `category`.
/// Round 1 asks for an answer; each later round asks for a correction of
/// the previous answer given its violations and the error summaries so far.
/// One backend answer call is made per round.
pub fn complete_entity(
    llm: &dyn LlmBackend,
    entity: &Entity,
    category: ProblemCategory,
    knowledge: &str,
    rules: &[Box<dyn CalibrationRule>],
    cfg: &CompletionConfig,
) -> Result<CompletionResult, CompletionError> {
    if cfg.max_rounds == 0 {
        return Err(CompletionError::InvalidConfig);
    }
    let problem = problem_text(entity);
    let mut trace: Vec<TraceEntry> = Vec::new();
    for round in 1..=cfg.max_rounds {
        let ctx = TemplateContext::new()
            .section("Problem", problem.clone())
            .section("Category", category.as_str())
            .section("Knowledge", knowledge);
        let (id, ctx) = match trace.last() {
            None => (TemplateId::CompletionAnswer, ctx),
            Some(prev) => {
                let summaries: Vec<&str> = trace.iter().map(|t| t.error_summary.as_str()).collect();
                let ctx = ctx
                    .section("Answer", non_blank(&prev.answer))
                    .section("Violations", prev.violations.join("\n"))
                    .section("Error summary", summaries.join("\n"));
                (TemplateId::CompletionCalibrate, ctx)
            }
        };
        let prompt = render_template(id, &ctx).map_err(CompletionError::Llm)?;
        let answer = match ask(llm, &prompt, &cfg.params, cfg.attempts, |t| Ok(t.trim().to_string())) {
            Ok(a) => a,
            Err(LlmError::BackendUnavailable(message)) => {
                return Err(CompletionError::BackendUnavailable { message, trace })
            }
            Err(e) => return Err(CompletionError::Llm(e)),
        };
        let violations = check_answer(rules, category, &problem, &answer);
        let passed = violations.is_empty();
        let error_summary = if passed {
            String::new()
        } else {
            format!("Round {round}: {}", violations.join("; "))
        };
        trace.push(TraceEntry {
            answer: answer.clone(),
            violations,
            error_summary,
        });
        if passed {
            return Ok(CompletionResult {
                answer,
                rounds: trace.len(),
                trace,
                status: CompletionStatus::Complete,
            });
        }
    }
    Ok(CompletionResult {
        answer: trace.last().map(|t| t.answer.clone()).unwrap_or_default(),
        rounds: trace.len(),
        trace,
        status: CompletionStatus::Failed,
    })
}

fn non_blank(s: &str) -> &str {
    if s.trim().is_empty() {
        "(empty)"
    } else {
        s
    }
}

/// Appends the accepted answer as a proof or solution whose references are
/// the titles of the selected knowledge, then rebuilds edges.
pub fn write_back(
    kg: &mut KnowledgeGraph,
    id: EntityId,
    result: &CompletionResult,
    bundle: &RetrievalBundle,
) -> Result<(), CompletionError> {
    let mut e = kg.entity(id).cloned().ok_or(CompletionError::UnknownEntity(id))?;
    if !is_incomplete(&e) {
        return Err(CompletionError::EntityNotIncomplete(id));
    }
    if result.status != CompletionStatus::Complete {
        return Err(CompletionError::NotComplete(id));
    }
    let mut record = DerivationRecord::from_contents(vec![result.answer.clone()]);
    record.source = COMPLETION_SOURCE.to_string();
    for sel in &bundle.selected {
        if let Some(s) = kg.entity(*sel) {
            let name = if s.title.is_empty() { s.label.clone() } else { s.title.clone() };
            if !name.is_empty() && !record.refs.contains(&name) {
                record.refs.push(name);
            }
        }
    }
    match e.derivations_mut() {
        Some(records) => records.push(record),
        None => return Err(CompletionError::EntityNotIncomplete(id)),
    }
    kg.replace_entity(e)?;
    kg.rebuild_edges();
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityCompletion {
    pub entity: EntityId,
    pub category: Option<ProblemCategory>,
    pub points: Vec<KnowledgePoint>,
    pub bundle: RetrievalBundle,
    pub result: Option<CompletionResult>,
    pub written: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompletionReport {
    pub entities: Vec<EntityCompletion>,
    pub completed: usize,
    pub failed: usize,
}

/// Completes every incomplete entity in ascending id order. Theorems are
/// proof problems without asking the backend. Retrieval uses `vd` as given;
/// it is not refreshed after write-backs. Per-entity errors are recorded and
/// processing continues.
pub fn complete_kg(
    kg: &mut KnowledgeGraph,
    vd: &VectorDb,
    embedder: &dyn Embedder,
    llm: &dyn LlmBackend,
    rules: &[Box<dyn CalibrationRule>],
    cfg: &CompletionConfig,
) -> Result<CompletionReport, CompletionError> {
    if cfg.max_rounds == 0 {
        return Err(CompletionError::InvalidConfig);
    }
    let mut report = CompletionReport::default();
    for id in find_incomplete(kg) {
        let mut item = EntityCompletion {
            entity: id,
            category: None,
            points: Vec::new(),
            bundle: RetrievalBundle::default(),
            result: None,
            written: false,
            error: None,
        };
        if let Err(e) = complete_one(kg, vd, embedder, llm, rules, cfg, &mut item) {
            log::warn!("completion of entity {id}: {e}");
            if let CompletionError::BackendUnavailable { trace, .. } = &e {
                if !trace.is_empty() {
                    item.result = Some(CompletionResult {
                        answer: trace.last().map(|t| t.answer.clone()).unwrap_or_default(),
                        rounds: trace.len(),
                        trace: trace.clone(),
                        status: CompletionStatus::Failed,
                    });
                }
            }
            item.error = Some(e.to_string());
        }
        if item.written {
            report.completed += 1;
        } else {
            report.failed += 1;
        }
        report.entities.push(item);
    }
    Ok(report)
}

fn complete_one(
    kg: &mut KnowledgeGraph,
    vd: &VectorDb,
    embedder: &dyn Embedder,
    llm: &dyn LlmBackend,
    rules: &[Box<dyn CalibrationRule>],
    cfg: &CompletionConfig,
    item: &mut EntityCompletion,
) -> Result<(), CompletionError> {
    let entity = kg.entity(item.entity).cloned().ok_or(CompletionError::UnknownEntity(item.entity))?;
    let problem = problem_text(&entity);
    let category = match entity.entity_type {
        EntityType::Theorem => ProblemCategory::Proof,
        _ => classify_problem(llm, &problem, &cfg.params, cfg.attempts).map_err(llm_error)?,
    };
    item.category = Some(category);
    item.points = generate_knowledge_points(llm, &problem, &cfg.params, cfg.attempts).map_err(llm_error)?;
    item.bundle = two_stage_retrieve(&item.points, kg, vd, embedder, cfg, &BTreeSet::from([entity.id]))?;
    let knowledge = package_knowledge(kg, &item.bundle);
    let result = complete_entity(llm, &entity, category, &knowledge, rules, cfg)?;
    if result.status == CompletionStatus::Complete {
        write_back(kg, entity.id, &result, &item.bundle)?;
        item.written = true;
    }
    item.result = Some(result);
    Ok(())
}

fn llm_error(e: LlmError) -> CompletionError {
    match e {
        LlmError::BackendUnavailable(message) => CompletionError::BackendUnavailable {
            message,
            trace: Vec::new(),
        },
        other => CompletionError::Llm(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_parsing() {
        assert_eq!(parse_category("calculation").unwrap(), ProblemCategory::Calculation);
        assert_eq!(parse_category("This is a Proof problem.").unwrap(), ProblemCategory::Proof);
        assert!(parse_category("geometry").is_err());
        assert!(parse_category("proof or calculation").is_err());
    }

    #[test]
    fn knowledge_point_parsing() {
        let pts = parse_knowledge_points("definition: positive definite matrix").unwrap();
        assert_eq!(
            pts,
            vec![KnowledgePoint {
                text: "positive definite matrix".into(),
                kind_hint: KindHint::Definition
            }]
        );
        assert!(parse_knowledge_points("").unwrap().is_empty());
        assert!(parse_knowledge_points("[]").unwrap().is_empty());
        let pts = parse_knowledge_points(
            "1. Theorem: Lagrange\n- definition: Group.\n* definition: group\nCayley table\n",
        )
        .unwrap();
        let got: Vec<(&str, KindHint)> = pts.iter().map(|p| (p.text.as_str(), p.kind_hint)).collect();
        assert_eq!(
            got,
            vec![
                ("Lagrange", KindHint::Theorem),
                ("Group", KindHint::Definition),
                ("Cayley table", KindHint::Unspecified)
            ]
        );
        assert!(parse_knowledge_points("---\n...").is_err());
    }
}
