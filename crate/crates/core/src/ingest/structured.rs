//! Mapping of generic key-value records (JSON objects) onto raw entities.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::refs::{extract_refs_rule_based, RefPatterns};
use super::{IngestError, RawDerivation, RawEntity};
use crate::model::EntityType;

/// Where a record's entity type comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeBinding {
    Fixed(EntityType),
    /// Key whose string value names the type.
    Field(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredRecordMapping {
    pub entity_type: TypeBinding,
    pub contents: String,
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub refs: Option<String>,
    #[serde(default)]
    pub proof: Option<String>,
    #[serde(default)]
    pub solution: Option<String>,
}

impl StructuredRecordMapping {
    /// Question/answer layout: every record is a problem with one solution.
    pub fn problem_solution(question_key: &str, answer_key: &str) -> Self {
        StructuredRecordMapping {
            entity_type: TypeBinding::Fixed(EntityType::Problem),
            contents: question_key.to_string(),
            title: None,
            label: None,
            refs: None,
            proof: None,
            solution: Some(answer_key.to_string()),
        }
    }
}

fn invalid(index: usize, field: &str, reason: impl Into<String>) -> IngestError {
    IngestError::InvalidFieldValue {
        index,
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// A string becomes one paragraph; an array of strings becomes several.
fn text_list(v: &Value, index: usize, field: &str) -> Result<Vec<String>, IngestError> {
    match v {
        Value::Null => Ok(Vec::new()),
        Value::String(s) => Ok(if s.trim().is_empty() { vec![] } else { vec![s.clone()] }),
        Value::Array(items) => items
            .iter()
            .map(|it| match it {
                Value::String(s) => Ok(s.clone()),
                _ => Err(invalid(index, field, "expected a string")),
            })
            .filter(|r| !matches!(r, Ok(s) if s.trim().is_empty()))
            .collect(),
        _ => Err(invalid(index, field, "expected a string or an array of strings")),
    }
}

fn text(v: &Value, index: usize, field: &str) -> Result<String, IngestError> {
    match v {
        Value::Null => Ok(String::new()),
        Value::String(s) => Ok(s.clone()),
        _ => Err(invalid(index, field, "expected a string")),
    }
}

fn derivation(
    v: &Value,
    index: usize,
    field: &str,
    patterns: &RefPatterns,
) -> Result<RawDerivation, IngestError> {
    let (contents, bound_refs) = match v {
        Value::Object(m) => (
            text_list(m.get("contents").unwrap_or(&Value::Null), index, field)?,
            text_list(m.get("refs").unwrap_or(&Value::Null), index, field)?,
        ),
        _ => (text_list(v, index, field)?, Vec::new()),
    };
    let refs = merge_refs(bound_refs, extract_refs_rule_based(&contents, patterns));
    Ok(RawDerivation { contents, refs })
}

/// One or several derivations: a string or object is one; an array of
/// strings or objects is one per element.
fn derivations(
    v: &Value,
    index: usize,
    field: &str,
    patterns: &RefPatterns,
) -> Result<Vec<RawDerivation>, IngestError> {
    let all = match v {
        Value::Null => Vec::new(),
        Value::Array(items) => items
            .iter()
            .map(|it| derivation(it, index, field, patterns))
            .collect::<Result<Vec<_>, _>>()?,
        _ => vec![derivation(v, index, field, patterns)?],
    };
    Ok(all.into_iter().filter(|d| !d.contents.is_empty()).collect())
}

fn merge_refs(mut bound: Vec<String>, harvested: Vec<String>) -> Vec<String> {
    bound.dedup();
    for r in harvested {
        if !bound.contains(&r) {
            bound.push(r);
        }
    }
    bound
}

/// One raw entity per record. Proofs are kept only on theorem records and
/// solutions only on problem records; bound references are followed by any
/// harvested from the contents.
pub fn ingest_structured(
    records: &[Value],
    mapping: &StructuredRecordMapping,
    source: &str,
    patterns: &RefPatterns,
) -> Result<Vec<RawEntity>, IngestError> {
    let mut out = Vec::with_capacity(records.len());
    for (index, record) in records.iter().enumerate() {
        let Value::Object(m) = record else {
            return Err(invalid(index, "<record>", "expected a JSON object"));
        };
        let get = |key: &str| m.get(key).unwrap_or(&Value::Null);
        let entity_type = match &mapping.entity_type {
            TypeBinding::Fixed(t) => *t,
            TypeBinding::Field(key) => {
                let raw = m.get(key).ok_or_else(|| IngestError::MissingBoundField {
                    index,
                    field: key.clone(),
                })?;
                text(raw, index, key)?
                    .parse::<EntityType>()
                    .map_err(|e| invalid(index, key, e.to_string()))?
            }
        };
        let contents_v = m.get(&mapping.contents).ok_or_else(|| IngestError::MissingBoundField {
            index,
            field: mapping.contents.clone(),
        })?;
        let contents = text_list(contents_v, index, &mapping.contents)?;
        if contents.is_empty() {
            return Err(invalid(index, &mapping.contents, "contents are empty"));
        }
        let title = match &mapping.title {
            Some(k) => text(get(k), index, k)?.trim().to_string(),
            None => String::new(),
        };
        let label = match &mapping.label {
            Some(k) => text(get(k), index, k)?.trim().to_string(),
            None => String::new(),
        };
        let bound_refs = match &mapping.refs {
            Some(k) => text_list(get(k), index, k)?,
            None => Vec::new(),
        };
        let refs = merge_refs(bound_refs, extract_refs_rule_based(&contents, patterns));
        let proofs = match (&mapping.proof, entity_type) {
            (Some(k), EntityType::Theorem) => derivations(get(k), index, k, patterns)?,
            _ => Vec::new(),
        };
        let solutions = match (&mapping.solution, entity_type) {
            (Some(k), EntityType::Problem) => derivations(get(k), index, k, patterns)?,
            _ => Vec::new(),
        };
        out.push(RawEntity {
            entity_type,
            label,
            title,
            contents,
            refs,
            source: source.to_string(),
            proofs,
            solutions,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn question_rationale_record() {
        let rec = json!({"question": "What is 2+2?", "rationale": "2+2=4. The answer is 4."});
        let m = StructuredRecordMapping::problem_solution("question", "rationale");
        let out = ingest_structured(&[rec], &m, "TheoremQA", &RefPatterns::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].entity_type, EntityType::Problem);
        assert_eq!(out[0].solutions.len(), 1);
        assert_eq!(out[0].source, "TheoremQA");
    }

    #[test]
    fn missing_contents_key() {
        let m = StructuredRecordMapping::problem_solution("question", "rationale");
        let recs = [json!({"question": "q"}), json!({"rationale": "r"})];
        assert_eq!(
            ingest_structured(&recs, &m, "s", &RefPatterns::default()).unwrap_err(),
            IngestError::MissingBoundField {
                index: 1,
                field: "question".into()
            }
        );
    }

    #[test]
    fn type_field_and_bound_refs() {
        let m = StructuredRecordMapping {
            entity_type: TypeBinding::Field("kind".into()),
            contents: "body".into(),
            title: Some("title".into()),
            label: None,
            refs: Some("links".into()),
            proof: Some("proofs".into()),
            solution: None,
        };
        let rec = json!({
            "kind": "Theorem",
            "title": "Union of Sets",
            "body": ["Let [[Definition:Set]] ...", "Then [[Definition:Union]]."],
            "links": ["Definition:Union"],
            "proofs": [{"contents": "Direct from [[Axiom:Extension]]."}, "Second proof."]
        });
        let out = ingest_structured(&[rec], &m, "ProofWiki", &RefPatterns::default()).unwrap();
        assert_eq!(out[0].entity_type, EntityType::Theorem);
        assert_eq!(out[0].refs, vec!["Definition:Union", "Definition:Set"]);
        assert_eq!(out[0].proofs.len(), 2);
        assert_eq!(out[0].proofs[0].refs, vec!["Axiom:Extension"]);

        let bad = json!({"kind": "lemma", "body": "x"});
        assert!(matches!(
            ingest_structured(&[bad], &m, "s", &RefPatterns::default()),
            Err(IngestError::InvalidFieldValue { index: 0, .. })
        ));
    }

    #[test]
    fn mapping_reads_from_json() {
        let m: StructuredRecordMapping = serde_json::from_value(json!({
            "entity_type": {"fixed": "problem"},
            "contents": "question",
            "solution": "rationale"
        }))
        .unwrap();
        assert_eq!(m, StructuredRecordMapping::problem_solution("question", "rationale"));
    }
}
