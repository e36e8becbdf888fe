//! Parsers for backend responses. Every accepted value lies in its closed
//! vocabulary; anything else is an error.

use std::collections::BTreeMap;

use serde_json::Value;

use super::LlmError;
use crate::graph::normalize_title;
use crate::model::{BodySegment, EntityId, MathField, TacticLabel};

/// Lowercase, punctuation replaced by spaces, whitespace collapsed.
pub fn normalize_response(text: &str) -> String {
    let mapped: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { ' ' })
        .collect::<String>()
        .to_lowercase();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn contains_phrase(haystack: &str, phrase: &str) -> bool {
    format!(" {haystack} ").contains(&format!(" {phrase} "))
}

pub fn parse_field_response(text: &str) -> Result<MathField, LlmError> {
    let norm = normalize_response(text);
    let found: Vec<MathField> = MathField::ALL
        .iter()
        .copied()
        .filter(|f| contains_phrase(&norm, f.as_str()))
        .collect();
    match found.as_slice() {
        [one] => Ok(*one),
        _ => Err(LlmError::AmbiguousField(text.trim().to_string())),
    }
}

fn parse_label(raw: &str) -> Result<TacticLabel, LlmError> {
    let cleaned = raw.trim().trim_matches(|c: char| !c.is_alphanumeric());
    cleaned
        .parse::<TacticLabel>()
        .map_err(|_| LlmError::UnknownLabel(raw.trim().to_string()))
}

fn parse_failure(reason: impl Into<String>) -> LlmError {
    LlmError::ParseFailure(reason.into())
}

/// The outermost `open`..`close` span of the text, if any.
fn json_span(text: &str, open: char, close: char) -> Option<&str> {
    let start = text.find(open)?;
    let end = text.rfind(close)?;
    (end > start).then(|| &text[start..=end])
}

pub fn parse_bodylist_response(text: &str) -> Result<Vec<BodySegment>, LlmError> {
    let span = json_span(text, '[', ']').ok_or_else(|| parse_failure("no JSON list in response"))?;
    let items: Vec<Value> =
        serde_json::from_str(span).map_err(|e| parse_failure(format!("bodylist: {e}")))?;
    if items.is_empty() {
        return Err(parse_failure("empty bodylist"));
    }
    items
        .iter()
        .map(|item| {
            let description = item
                .get("description")
                .and_then(Value::as_str)
                .map(str::trim)
                .filter(|d| !d.is_empty())
                .ok_or_else(|| parse_failure("segment without description"))?;
            let action = item
                .get("action")
                .and_then(Value::as_str)
                .ok_or_else(|| parse_failure("segment without action"))?;
            Ok(BodySegment {
                description: description.to_string(),
                action: parse_label(action)?,
            })
        })
        .collect()
}

/// Canonical `kind:name` form of a reference line, if it has a kind prefix.
fn canonical_reference(line: &str) -> Option<String> {
    let line = line
        .trim()
        .trim_start_matches(|c: char| c == '-' || c == '*' || c == '•')
        .trim();
    let line = strip_enumeration(line).trim_matches(|c| c == '"' || c == '\'' || c == '`');
    let (kind, rest) = line.split_once(':')?;
    let kind = kind.trim().to_lowercase();
    if kind != "definition" && kind != "theorem" {
        return None;
    }
    let name = rest
        .trim()
        .trim_matches(|c| c == '"' || c == '\'' || c == '`')
        .trim_end_matches(['.', ',', ';'])
        .trim();
    (!name.is_empty()).then(|| format!("{kind}:{name}"))
}

fn strip_enumeration(line: &str) -> &str {
    let digits = line.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            return r.trim_start();
        }
    }
    line
}

fn is_empty_answer(text: &str) -> bool {
    let t = normalize_response(text);
    t.is_empty() || matches!(t.as_str(), "none" | "no reference" | "no references" | "empty list")
        || text.trim() == "[]"
}

/// References as `definition:name` / `theorem:name`. A JSON string array or
/// one reference per line are accepted; "[]" or an empty answer means none.
pub fn parse_refs_response(text: &str) -> Result<Vec<String>, LlmError> {
    if is_empty_answer(text) {
        return Ok(Vec::new());
    }
    let mut out: Vec<String> = Vec::new();
    let trimmed = text.trim();
    if trimmed.starts_with('[') {
        let items: Vec<String> = serde_json::from_str(trimmed)
            .map_err(|e| parse_failure(format!("references: {e}")))?;
        for it in items {
            let r = canonical_reference(&it)
                .ok_or_else(|| parse_failure(format!("reference without kind prefix: {it}")))?;
            if !out.contains(&r) {
                out.push(r);
            }
        }
        return Ok(out);
    }
    for line in trimmed.lines() {
        if let Some(r) = canonical_reference(line) {
            if !out.contains(&r) {
                out.push(r);
            }
        }
    }
    if out.is_empty() {
        return Err(parse_failure("no reference lines found"));
    }
    Ok(out)
}

/// Tactic labels for `refs`. Accepts a JSON object keyed by reference, lines
/// of `reference: label`, or a bare label when exactly one reference is asked.
/// Keys are matched to `refs` by normalized title; unknown keys are ignored.
pub fn parse_tactics_response(
    text: &str,
    refs: &[String],
) -> Result<BTreeMap<String, TacticLabel>, LlmError> {
    let lookup = |key: &str| -> Option<&String> {
        let k = normalize_title(key.trim().trim_matches(|c| c == '"' || c == '\''));
        refs.iter().find(|r| normalize_title(r) == k)
    };
    let mut out = BTreeMap::new();
    if let Some(span) = json_span(text, '{', '}') {
        let obj: serde_json::Map<String, Value> =
            serde_json::from_str(span).map_err(|e| parse_failure(format!("tactics: {e}")))?;
        for (k, v) in obj {
            let label = v.as_str().ok_or_else(|| parse_failure("tactic label is not a string"))?;
            let label = parse_label(label)?;
            if let Some(r) = lookup(&k) {
                out.insert(r.clone(), label);
            }
        }
    } else if refs.len() == 1 && !text.contains(':') && !text.trim().is_empty() {
        out.insert(refs[0].clone(), parse_label(text.lines().next().unwrap_or(""))?);
    } else {
        for line in text.lines() {
            let Some((k, label)) = line.rsplit_once(':') else {
                continue;
            };
            if let Some(r) = lookup(k.trim_start_matches(['-', '*', ' '])) {
                out.insert(r.clone(), parse_label(label)?);
            }
        }
    }
    if out.is_empty() {
        return Err(parse_failure("no tactic for any asked reference"));
    }
    Ok(out)
}

pub fn parse_title_response(text: &str) -> Result<String, LlmError> {
    let line = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .ok_or_else(|| parse_failure("empty title"))?;
    let line = line.trim_start_matches('#').trim();
    let line = match line.get(..6) {
        Some(p) if p.eq_ignore_ascii_case("title:") => line[6..].trim(),
        _ => line,
    };
    let title = line.trim_matches(|c| c == '"' || c == '\'' || c == '*' || c == '`').trim();
    if title.is_empty() {
        return Err(parse_failure("empty title"));
    }
    Ok(title.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
}

pub fn parse_verdict(text: &str) -> Result<Verdict, LlmError> {
    match normalize_response(text).split(' ').next() {
        Some("yes") => Ok(Verdict::Yes),
        Some("no") => Ok(Verdict::No),
        _ => Err(LlmError::UndecidableResponse(text.trim().to_string())),
    }
}

/// The first integer in the text that names a candidate.
pub fn parse_candidate_id(text: &str, candidates: &[EntityId]) -> Result<EntityId, LlmError> {
    let numbers: Vec<u64> = text
        .split(|c: char| !c.is_ascii_digit())
        .filter_map(|t| t.parse().ok())
        .collect();
    if let Some(n) = numbers.iter().find(|n| candidates.contains(&EntityId(**n))) {
        return Ok(EntityId(*n));
    }
    match numbers.first() {
        Some(n) => Err(LlmError::IdNotInCandidates(EntityId(*n))),
        None => Err(LlmError::UndecidableResponse(text.trim().to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_responses() {
        assert_eq!(parse_field_response("algebra").unwrap(), MathField::Algebra);
        assert_eq!(
            parse_field_response("The answer is: probability and statistics.").unwrap(),
            MathField::ProbabilityAndStatistics
        );
        assert_eq!(
            parse_field_response("\"Applied Mathematics\"").unwrap(),
            MathField::AppliedMathematics
        );
        assert!(matches!(parse_field_response("calculus"), Err(LlmError::AmbiguousField(_))));
        assert!(matches!(
            parse_field_response("algebra or geometry"),
            Err(LlmError::AmbiguousField(_))
        ));
        assert!(matches!(parse_field_response("algebraic"), Err(LlmError::AmbiguousField(_))));
    }

    #[test]
    fn bodylist_mirrors_symmetric_group() {
        let text = r#"[{"description": "Let $S$ be a set.", "action": "premise"},
                       {"description": "The symmetric group on $S$ is the group of permutations of $S$.", "action": "definition"}]"#;
        let b = parse_bodylist_response(text).unwrap();
        assert_eq!(
            b.iter().map(|s| s.action).collect::<Vec<_>>(),
            vec![TacticLabel::Premise, TacticLabel::Definition]
        );
        assert!(matches!(parse_bodylist_response(""), Err(LlmError::ParseFailure(_))));
        assert!(matches!(
            parse_bodylist_response(r#"[{"description": "x", "action": "axiom"}]"#),
            Err(LlmError::UnknownLabel(l)) if l == "axiom"
        ));
    }

    #[test]
    fn refs_responses() {
        assert_eq!(
            parse_refs_response("definition: positive definite matrix").unwrap(),
            vec!["definition:positive definite matrix"]
        );
        assert_eq!(
            parse_refs_response("Here they are:\n1. Theorem: Mean Value Theorem\n- definition:derivative.").unwrap(),
            vec!["theorem:Mean Value Theorem", "definition:derivative"]
        );
        assert!(parse_refs_response("[]").unwrap().is_empty());
        assert!(parse_refs_response("").unwrap().is_empty());
        assert_eq!(
            parse_refs_response(r#"["definition: set"]"#).unwrap(),
            vec!["definition:set"]
        );
        assert!(parse_refs_response("lots of words").is_err());
    }

    #[test]
    fn tactics_responses() {
        let refs = vec!["Definition:Set".to_string(), "Definition:Mapping".to_string()];
        let m = parse_tactics_response(
            r#"{"definition: set": "premise", "Definition:Mapping": "Definition", "other": "lemma"}"#,
            &refs,
        )
        .unwrap();
        assert_eq!(m["Definition:Set"], TacticLabel::Premise);
        assert_eq!(m["Definition:Mapping"], TacticLabel::Definition);
        assert_eq!(m.len(), 2);
        let one = vec!["definition:positive definite matrix".to_string()];
        assert_eq!(
            parse_tactics_response("deduction", &one).unwrap()["definition:positive definite matrix"],
            TacticLabel::Deduction
        );
        let lines = parse_tactics_response("Definition:Set: premise\nDefinition:Mapping: lemma", &refs).unwrap();
        assert_eq!(lines["Definition:Mapping"], TacticLabel::Lemma);
        assert!(matches!(
            parse_tactics_response(r#"{"Definition:Set": "axiom"}"#, &refs),
            Err(LlmError::UnknownLabel(_))
        ));
    }

    #[test]
    fn title_verdict_and_ids() {
        assert_eq!(parse_title_response("Title: \"Symmetric Group\"\nmore").unwrap(), "Symmetric Group");
        assert!(parse_title_response("  \n").is_err());
        assert_eq!(parse_verdict("yes").unwrap(), Verdict::Yes);
        assert_eq!(parse_verdict("No, they differ").unwrap(), Verdict::No);
        assert_eq!(parse_verdict("\"Yes.\"").unwrap(), Verdict::Yes);
        assert!(parse_verdict("maybe").is_err());
        assert!(parse_verdict("yesterday").is_err());
        let c = [EntityId(3), EntityId(7)];
        assert_eq!(parse_candidate_id("The answer is 7.", &c).unwrap(), EntityId(7));
        assert_eq!(parse_candidate_id("99", &c).unwrap_err(), LlmError::IdNotInCandidates(EntityId(99)));
        assert!(matches!(parse_candidate_id("none", &c), Err(LlmError::UndecidableResponse(_))));
    }
}
