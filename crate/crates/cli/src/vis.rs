//! Graph export for off-the-shelf viewers: a vis.js-style JSON document or
//! Graphviz DOT. Node color follows the entity type.

use mathkg_core::{EntityType, KnowledgeGraph};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VisFormat {
    Visjson,
    Dot,
}

impl std::str::FromStr for VisFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "visjson" => Ok(VisFormat::Visjson),
            "dot" => Ok(VisFormat::Dot),
            other => Err(format!("unknown format `{other}` (visjson or dot)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisNode {
    pub id: u64,
    pub title: String,
    #[serde(rename = "type")]
    pub entity_type: EntityType,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisEdge {
    pub from: u64,
    pub to: u64,
    /// Empty when the reference carries no tactic.
    pub tactic: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisExport {
    pub nodes: Vec<VisNode>,
    pub edges: Vec<VisEdge>,
}

pub fn type_color(t: EntityType) -> &'static str {
    match t {
        EntityType::Definition => "yellow",
        EntityType::Theorem => "blue",
        EntityType::Problem => "red",
        EntityType::Other => "gray",
    }
}

pub fn vis_export(kg: &KnowledgeGraph) -> VisExport {
    let nodes = kg
        .entities()
        .map(|e| VisNode {
            id: e.id.0,
            title: e.display_name(),
            entity_type: e.entity_type,
            color: type_color(e.entity_type).to_string(),
        })
        .collect();
    let mut edges: Vec<VisEdge> = kg
        .edges()
        .map(|e| VisEdge {
            from: e.from.0,
            to: e.to.0,
            tactic: e.tactic.0.map(|t| t.as_str().to_string()).unwrap_or_default(),
        })
        .collect();
    edges.sort_by_key(|e| (e.from, e.to));
    VisExport { nodes, edges }
}

fn dot_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn to_dot(export: &VisExport) -> String {
    let mut s = String::from("digraph mathkg {\n  node [style=filled];\n");
    for n in &export.nodes {
        s.push_str(&format!(
            "  n{} [label={}, type={}, fillcolor={}];\n",
            n.id,
            dot_string(&n.title),
            n.entity_type.as_str(),
            n.color
        ));
    }
    for e in &export.edges {
        if e.tactic.is_empty() {
            s.push_str(&format!("  n{} -> n{};\n", e.from, e.to));
        } else {
            s.push_str(&format!("  n{} -> n{} [label={}];\n", e.from, e.to, dot_string(&e.tactic)));
        }
    }
    s.push_str("}\n");
    s
}

pub fn render(kg: &KnowledgeGraph, format: VisFormat) -> String {
    let export = vis_export(kg);
    match format {
        VisFormat::Visjson => serde_json::to_string(&export).expect("serializable") + "\n",
        VisFormat::Dot => to_dot(&export),
    }
}
