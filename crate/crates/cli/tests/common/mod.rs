#![allow(dead_code)]

use std::path::PathBuf;

use mathkg_core::embedding::{EmbedConfig, HashEmbedder};
use mathkg_core::index::{build_vd, VectorDb};
use mathkg_core::store::load_kg;
use mathkg_core::KnowledgeGraph;

pub fn core_fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

pub fn mini_kg() -> KnowledgeGraph {
    load_kg(core_fixture("mini_kg.jsonl")).unwrap()
}

pub fn mini_vd(kg: &KnowledgeGraph) -> VectorDb {
    build_vd(kg, &HashEmbedder, &EmbedConfig::default()).unwrap().0
}
