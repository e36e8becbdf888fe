//! Content and relationship augmentation of extracted entities.
//!
//! Only empty attributes are asked for, so running the pipeline on an
//! augmented entity changes nothing. References proposed by the backend are
//! unioned with the rule-extracted ones; tactics are asked only for
//! references that have none yet.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::parse::{
    parse_bodylist_response, parse_field_response, parse_refs_response, parse_tactics_response,
    parse_title_response,
};
use super::{ask, render_template, CompletionParams, LlmBackend, LlmError, Subject, TemplateContext, TemplateId};
use crate::graph::{normalize_title, KnowledgeGraph};
use crate::model::{BodySegment, Entity, EntityId, TacticLabel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub params: CompletionParams,
    /// Tries per attribute, the first included.
    pub attempts: u32,
    pub parallelism: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            params: CompletionParams::default(),
            attempts: super::DEFAULT_RETRIES,
            parallelism: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentFailure {
    pub entity: EntityId,
    pub attribute: String,
    /// `entity`, `proof N` or `solution N`.
    pub level: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub entity: Entity,
    pub failures: Vec<AugmentFailure>,
}

struct Session<'a> {
    backend: &'a dyn LlmBackend,
    cfg: &'a AugmentConfig,
    id: EntityId,
    failures: Vec<AugmentFailure>,
}

impl Session<'_> {
    /// Runs one attribute request. Parse failures are recorded and yield
    /// `None`; an unavailable backend aborts.
    fn request<T>(
        &mut self,
        attribute: &str,
        level: &str,
        id: Option<TemplateId>,
        ctx: TemplateContext,
        parse: impl Fn(&str) -> Result<T, LlmError>,
    ) -> Result<Option<T>, LlmError> {
        let Some(id) = id else { return Ok(None) };
        let result = render_template(id, &ctx)
            .and_then(|p| ask(self.backend, &p, &self.cfg.params, self.cfg.attempts, parse));
        match result {
            Ok(v) => Ok(Some(v)),
            Err(e @ LlmError::BackendUnavailable(_)) => Err(e),
            Err(e) => {
                log::warn!("entity {}: {attribute} ({level}) failed: {e}", self.id);
                self.failures.push(AugmentFailure {
                    entity: self.id,
                    attribute: attribute.to_string(),
                    level: level.to_string(),
                    error: e.to_string(),
                });
                Ok(None)
            }
        }
    }

    fn level(
        &mut self,
        level: &str,
        subject: Subject,
        contents: &[String],
        refs: &mut Vec<String>,
        tactics: &mut BTreeMap<String, TacticLabel>,
        bodylist: Option<&mut Vec<BodySegment>>,
    ) -> Result<(), LlmError> {
        if contents.is_empty() {
            return Ok(());
        }
        let content_ctx = || TemplateContext::new().list_section("Content list", contents);
        if let Some(b) = bodylist.filter(|b| b.is_empty()) {
            if let Some(v) = self.request(
                "bodylist",
                level,
                TemplateId::bodylist(subject),
                content_ctx(),
                parse_bodylist_response,
            )? {
                *b = v;
            }
        }
        if tactics.is_empty() {
            if let Some(found) =
                self.request("refs", level, TemplateId::refs(subject), content_ctx(), parse_refs_response)?
            {
                for r in found {
                    let key = normalize_title(&r);
                    if !refs.iter().any(|x| normalize_title(x) == key) {
                        refs.push(r);
                    }
                }
            }
        }
        let unlabeled: Vec<String> = refs.iter().filter(|r| !tactics.contains_key(*r)).cloned().collect();
        if !unlabeled.is_empty() {
            let ctx = content_ctx().list_section("References", &unlabeled);
            if let Some(found) = self.request(
                "references_tactics",
                level,
                Some(TemplateId::tactics(subject)),
                ctx,
                |t| parse_tactics_response(t, &unlabeled),
            )? {
                tactics.extend(found);
            }
        }
        Ok(())
    }
}

/// Fills title, field, bodylist, problem references and missing tactics of
/// the entity and each of its proofs and solutions. Only an unavailable
/// backend is an error; other failures are listed in the result.
pub fn augment_entity(
    e: &Entity,
    backend: &dyn LlmBackend,
    cfg: &AugmentConfig,
) -> Result<Augmented, LlmError> {
    let mut out = e.clone();
    let mut s = Session {
        backend,
        cfg,
        id: e.id,
        failures: Vec::new(),
    };
    if e.contents.is_empty() {
        s.failures.push(AugmentFailure {
            entity: e.id,
            attribute: "contents".into(),
            level: "entity".into(),
            error: "entity has no contents".into(),
        });
        return Ok(Augmented { entity: out, failures: s.failures });
    }
    let subject = Subject::of(e.entity_type);
    let content = e.content_text();
    if out.title.trim().is_empty() {
        let ctx = TemplateContext::new().section("Content", content.clone());
        if let Some(t) = s.request("title", "entity", TemplateId::title(subject), ctx, parse_title_response)? {
            out.title = t;
        }
    }
    if out.field.is_none() {
        let ctx = TemplateContext::new().section("Content", content);
        out.field = s.request("field", "entity", TemplateId::field(subject), ctx, parse_field_response)?;
    }
    let body = (subject != Subject::Problem).then_some(&mut out.bodylist);
    s.level("entity", subject, &e.contents, &mut out.refs, &mut out.references_tactics, body)?;
    for (i, p) in out.proofs.iter_mut().enumerate() {
        let contents = p.contents.clone();
        s.level(
            &format!("proof {i}"),
            Subject::Proof,
            &contents,
            &mut p.refs,
            &mut p.references_tactics,
            Some(&mut p.bodylist),
        )?;
    }
    for (i, sol) in out.solutions.iter_mut().enumerate() {
        let contents = sol.contents.clone();
        s.level(
            &format!("solution {i}"),
            Subject::Solution,
            &contents,
            &mut sol.refs,
            &mut sol.references_tactics,
            None,
        )?;
    }
    Ok(Augmented { entity: out, failures: s.failures })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub entities: usize,
    pub changed: usize,
    pub failures: Vec<AugmentFailure>,
    pub warnings: Vec<String>,
}

/// Augments every entity, with at most `cfg.parallelism` requests in flight,
/// then applies the results in ascending id order and rebuilds edges. A
/// generated title that collides with an existing one gets the entity id
/// appended.
pub fn augment_kg(
    kg: &mut KnowledgeGraph,
    backend: &dyn LlmBackend,
    cfg: &AugmentConfig,
) -> Result<AugmentReport, LlmError> {
    let originals: Vec<Entity> = kg.entities().cloned().collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism.max(1))
        .build()
        .map_err(|e| LlmError::BackendUnavailable(format!("thread pool: {e}")))?;
    let results: Vec<Result<Augmented, LlmError>> =
        pool.install(|| originals.par_iter().map(|e| augment_entity(e, backend, cfg)).collect());

    let mut report = AugmentReport {
        entities: originals.len(),
        ..Default::default()
    };
    for (orig, res) in originals.iter().zip(results) {
        let Augmented { mut entity, failures } = res?;
        report.failures.extend(failures);
        if orig.title.trim().is_empty() && !entity.title.is_empty() {
            let taken = |t: &str| {
                kg.title_index()
                    .get(&normalize_title(t))
                    .is_some_and(|&other| other != entity.id)
            };
            if taken(&entity.title) {
                let renamed = format!("{} ({})", entity.title, entity.id);
                report.warnings.push(format!(
                    "entity {}: generated title `{}` already used, stored as `{renamed}`",
                    entity.id, entity.title
                ));
                entity.title = renamed;
            }
        }
        if entity == *orig {
            continue;
        }
        match kg.replace_entity(entity) {
            Ok(()) => report.changed += 1,
            Err(e) => report.warnings.push(format!("entity {}: result not applied: {e}", orig.id)),
        }
    }
    kg.rebuild_edges();
    Ok(report)
}
