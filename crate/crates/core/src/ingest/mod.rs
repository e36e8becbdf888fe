//! Rule-based extraction of raw entities from LaTeX sources and structured
//! records, and assembly of the extracted entities into an input graph.

pub mod latex;
pub mod refs;
pub mod structured;

use serde::{Deserialize, Serialize};

use crate::graph::{GraphError, KnowledgeGraph};
use crate::model::{DerivationRecord, Entity, EntityId, EntityType};

pub use latex::{extract_from_latex, EnvironmentRule, LatexConfig};
pub use refs::{extract_refs_rule_based, PatternSpec, RefPatterns};
pub use structured::{ingest_structured, StructuredRecordMapping, TypeBinding};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IngestError {
    #[error("no environment rules configured")]
    NoRules,
    #[error("unbalanced environment `{env}` at byte {offset}")]
    UnbalancedEnvironment { env: String, offset: usize },
    #[error("record {index}: missing bound field `{field}`")]
    MissingBoundField { index: usize, field: String },
    #[error("record {index}: field `{field}`: {reason}")]
    InvalidFieldValue {
        index: usize,
        field: String,
        reason: String,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A proof or solution body as found in the source.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RawDerivation {
    pub contents: Vec<String>,
    pub refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEntity {
    #[serde(rename = "type")]
    pub entity_type: EntityType,
    pub label: String,
    pub title: String,
    pub contents: Vec<String>,
    pub refs: Vec<String>,
    pub source: String,
    pub proofs: Vec<RawDerivation>,
    pub solutions: Vec<RawDerivation>,
}

/// Builds the input graph: ids are assigned densely from 0 in input order,
/// harvested references go into `refs` with no tactics, and edges are
/// rebuilt once at the end.
pub fn to_input_kg(raws: &[RawEntity]) -> Result<KnowledgeGraph, IngestError> {
    let mut kg = KnowledgeGraph::new();
    for (i, raw) in raws.iter().enumerate() {
        let mut e = Entity::new(EntityId(i as u64), raw.entity_type);
        e.label = raw.label.clone();
        e.title = raw.title.clone();
        e.contents = raw.contents.clone();
        e.refs = raw.refs.clone();
        e.source = raw.source.clone();
        let to_record = |d: &RawDerivation| DerivationRecord {
            refs: d.refs.clone(),
            ..DerivationRecord::from_contents(d.contents.clone())
        };
        e.proofs = raw.proofs.iter().map(to_record).collect();
        e.solutions = raw.solutions.iter().map(to_record).collect();
        kg.add_entity(e)?;
    }
    kg.rebuild_edges();
    Ok(kg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_gives_empty_graph() {
        assert!(to_input_kg(&[]).unwrap().is_empty());
    }

    #[test]
    fn proofs_become_derivation_records() {
        let raws = extract_from_latex(
            r"\begin{definition}[Definition:Set]\label{def:set}A set.\end{definition}
              \begin{theorem}[Cantor]By \ref{def:set} ...\end{theorem}
              \begin{proof}Diagonal over \ref{def:set}.\end{proof}",
            &LatexConfig::default(),
        )
        .unwrap();
        let kg = to_input_kg(&raws).unwrap();
        assert_eq!(kg.len(), 2);
        let thm = kg.entity(EntityId(1)).unwrap();
        assert_eq!(thm.proofs.len(), 1);
        assert_eq!(thm.proofs[0].refs, vec!["def:set"]);
        assert!(thm.references_tactics.is_empty());
        assert_eq!(kg.edge_count(), 1);
        assert_eq!(kg.out_edges(EntityId(0))[0].to, EntityId(1));
    }
}
