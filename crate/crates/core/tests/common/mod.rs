#![allow(dead_code)]

use std::path::PathBuf;

use mathkg_core::ingest::{extract_from_latex, to_input_kg, LatexConfig};
use mathkg_core::llm::{augment_kg, AugmentConfig, AugmentReport, ScriptedMockBackend};
use mathkg_core::KnowledgeGraph;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

pub fn read(path: PathBuf) -> String {
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn mini_input_kg() -> KnowledgeGraph {
    let raws = extract_from_latex(&read(fixture("mini_corpus.tex")), &LatexConfig::default()).unwrap();
    to_input_kg(&raws).unwrap()
}

pub fn mini_mock() -> ScriptedMockBackend {
    ScriptedMockBackend::from_jsonl(&read(fixture("mini_mock.jsonl")), "").unwrap()
}

pub fn mini_augmented_kg() -> (KnowledgeGraph, AugmentReport) {
    let mut kg = mini_input_kg();
    let report = augment_kg(&mut kg, &mini_mock(), &AugmentConfig::default()).unwrap();
    (kg, report)
}

/// Writes `bytes` to the fixture when `MATHKG_BLESS` is set, otherwise
/// compares against it.
pub fn assert_snapshot(path: PathBuf, bytes: &[u8]) {
    if std::env::var_os("MATHKG_BLESS").is_some() {
        std::fs::write(&path, bytes).unwrap();
        return;
    }
    let want = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(want == bytes, "{} differs from the produced output", path.display());
}

pub fn proofwiki_input_kg() -> KnowledgeGraph {
    use mathkg_core::ingest::{ingest_structured, RefPatterns, StructuredRecordMapping};
    let manifest: serde_json::Value =
        serde_json::from_str(&read(fixture("proofwiki_sample.manifest.json"))).unwrap();
    let mapping: StructuredRecordMapping = serde_json::from_value(manifest["mapping"].clone()).unwrap();
    let records: Vec<serde_json::Value> = read(fixture("proofwiki_sample.jsonl"))
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let raws = ingest_structured(&records, &mapping, "proofwiki", &RefPatterns::default()).unwrap();
    to_input_kg(&raws).unwrap()
}

pub fn mini_kg() -> KnowledgeGraph {
    mathkg_core::store::load_kg(fixture("mini_kg.jsonl")).unwrap()
}

/// Definitions `n0..n{n-1}`; each `(i, j)` pair makes `n{j}` reference
/// `n{i}`, i.e. an edge i → j.
pub fn digraph(n: usize, edges: &[(usize, usize)]) -> KnowledgeGraph {
    use mathkg_core::{Entity, EntityId, EntityType, TacticLabel};
    let mut kg = KnowledgeGraph::new();
    for j in 0..n {
        let mut e = Entity::new(EntityId(j as u64), EntityType::Definition)
            .with_title(format!("n{j}"))
            .with_contents([format!("node {j}")]);
        for &(a, b) in edges {
            if b == j {
                e = e.with_ref(format!("n{a}"), TacticLabel::Premise);
            }
        }
        kg.add_entity(e).unwrap();
    }
    kg.rebuild_edges();
    kg
}
