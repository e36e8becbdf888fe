//! Consistency judgments used by fusion.

use super::parse::{parse_candidate_id, parse_verdict, Verdict};
use super::{ask, render_template, CompletionParams, LlmBackend, LlmError, Subject, TemplateContext, TemplateId};
use crate::model::{Entity, EntityId};

/// Title line followed by the content paragraphs.
pub fn entity_summary(e: &Entity) -> String {
    let mut s = e.display_name();
    for c in &e.contents {
        s.push('\n');
        s.push_str(c);
    }
    s
}

fn kind_word(e: &Entity) -> &'static str {
    Subject::of(e.entity_type).phrase()
}

pub fn judge_consistency(
    a: &Entity,
    b: &Entity,
    backend: &dyn LlmBackend,
    params: &CompletionParams,
    attempts: u32,
) -> Result<Verdict, LlmError> {
    let ctx = TemplateContext::new()
        .with_kind(kind_word(a))
        .section("First", entity_summary(a))
        .section("Second", entity_summary(b));
    let prompt = render_template(TemplateId::FusionStep4, &ctx)?;
    ask(backend, &prompt, params, attempts, parse_verdict)
}

pub fn judge_best_candidate(
    e: &Entity,
    candidates: &[(EntityId, &Entity)],
    backend: &dyn LlmBackend,
    params: &CompletionParams,
    attempts: u32,
) -> Result<EntityId, LlmError> {
    if candidates.is_empty() {
        return Err(LlmError::MissingContext("Candidates".into()));
    }
    let listing = candidates
        .iter()
        .map(|(id, c)| format!("id {}: {}", id, entity_summary(c)))
        .collect::<Vec<_>>()
        .join("\n\n");
    let ctx = TemplateContext::new()
        .with_kind(kind_word(e))
        .section("New", entity_summary(e))
        .section("Candidates", listing);
    let prompt = render_template(TemplateId::FusionStep5, &ctx)?;
    let ids: Vec<EntityId> = candidates.iter().map(|(id, _)| *id).collect();
    ask(backend, &prompt, params, attempts, |t| parse_candidate_id(t, &ids))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedMockBackend;
    use crate::model::EntityType;

    fn thm(id: u64, title: &str) -> Entity {
        Entity::new(EntityId(id), EntityType::Theorem)
            .with_title(title)
            .with_contents([format!("statement of {title}")])
    }

    #[test]
    fn consistency_verdicts() {
        let p = CompletionParams::default();
        let (a, b) = (thm(0, "A"), thm(1, "B"));
        assert_eq!(judge_consistency(&a, &b, &ScriptedMockBackend::new("yes"), &p, 3).unwrap(), Verdict::Yes);
        assert_eq!(
            judge_consistency(&a, &b, &ScriptedMockBackend::new("No, they differ"), &p, 3).unwrap(),
            Verdict::No
        );
        assert!(matches!(
            judge_consistency(&a, &b, &ScriptedMockBackend::new("perhaps"), &p, 3),
            Err(LlmError::UndecidableResponse(_))
        ));
    }

    #[test]
    fn best_candidate() {
        let p = CompletionParams::default();
        let e = thm(10, "New");
        let (c3, c7) = (thm(3, "C3"), thm(7, "C7"));
        let cands = [(EntityId(3), &c3), (EntityId(7), &c7)];
        let mock = ScriptedMockBackend::new("The answer is 7.");
        assert_eq!(judge_best_candidate(&e, &cands, &mock, &p, 3).unwrap(), EntityId(7));
        assert_eq!(
            judge_best_candidate(&e, &cands[..1], &ScriptedMockBackend::new("3"), &p, 3).unwrap(),
            EntityId(3)
        );
        assert_eq!(
            judge_best_candidate(&e, &cands, &ScriptedMockBackend::new("99"), &p, 3).unwrap_err(),
            LlmError::IdNotInCandidates(EntityId(99))
        );
    }
}
