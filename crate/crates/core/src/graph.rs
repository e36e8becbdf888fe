//! The directed reference graph.
//!
//! An edge `i -> j` means entity `j` references entity `i` somewhere in its
//! statement, one of its proofs, or one of its solutions. Adjacency is derived
//! state: it is recomputed from the entities' reference lists by
//! [`KnowledgeGraph::rebuild_edges`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::cycles;
use crate::model::{EdgeTactic, Entity, EntityId, EntityType, MathField};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("entity id {0} already present")]
    DuplicateId(EntityId),
    #[error("title `{title}` of entity {new} collides with entity {existing}")]
    DuplicateTitle {
        title: String,
        existing: EntityId,
        new: EntityId,
    },
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("entity {id} is invalid: {reason}")]
    InvalidEntity { id: EntityId, reason: String },
}

/// Canonical form used for title lookup: lowercase, internal whitespace
/// collapsed, trimmed, and no whitespace around `:` so that
/// `Definition: Set` and `definition:set` coincide.
pub fn normalize_title(s: &str) -> String {
    let lowered = s.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .split(':')
        .map(str::trim)
        .collect::<Vec<_>>()
        .join(":")
}

/// Strips a leading `definition:`/`theorem:`/`problem:` kind prefix from a
/// normalized title.
fn strip_kind_prefix(normalized: &str) -> Option<&str> {
    ["definition:", "theorem:", "problem:"]
        .iter()
        .find_map(|p| normalized.strip_prefix(p))
        .filter(|rest| !rest.is_empty())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    /// The referenced entity.
    pub from: EntityId,
    /// The referencing entity.
    pub to: EntityId,
    pub tactic: EdgeTactic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeWarning {
    pub from: EntityId,
    pub to: EntityId,
    pub source_type: EntityType,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RebuildSummary {
    pub edge_count: usize,
    /// Edges whose referenced entity is a problem or an unclassified record.
    pub warnings: Vec<EdgeWarning>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
    Either,
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "forward" => Ok(Direction::Forward),
            "backward" => Ok(Direction::Backward),
            "either" => Ok(Direction::Either),
            _ => Err(format!("unknown direction `{s}`")),
        }
    }
}

pub const DEFAULT_CYCLE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub node_count: usize,
    pub edge_count: usize,
    pub type_counts: BTreeMap<EntityType, usize>,
    pub head_count: usize,
    pub leaf_count: usize,
    pub simple_cycle_count: usize,
    pub simple_cycle_enumeration_capped: bool,
    pub field_distribution: BTreeMap<MathField, usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeGraph {
    entities: BTreeMap<EntityId, Entity>,
    title_index: BTreeMap<String, EntityId>,
    label_index: BTreeMap<String, EntityId>,
    aliases: BTreeMap<String, EntityId>,
    out_adj: BTreeMap<EntityId, Vec<Edge>>,
    in_adj: BTreeMap<EntityId, Vec<Edge>>,
    unresolved_refs: Vec<(EntityId, String)>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entity(&self, id: EntityId) -> Option<&Entity> {
        self.entities.get(&id)
    }

    pub fn contains(&self, id: EntityId) -> bool {
        self.entities.contains_key(&id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.entities.keys().copied()
    }

    /// Smallest id greater than every id in the graph.
    pub fn next_id(&self) -> EntityId {
        self.entities
            .keys()
            .next_back()
            .map(|id| EntityId(id.0 + 1))
            .unwrap_or(EntityId(0))
    }

    pub fn title_index(&self) -> &BTreeMap<String, EntityId> {
        &self.title_index
    }

    pub fn aliases(&self) -> &BTreeMap<String, EntityId> {
        &self.aliases
    }

    pub fn unresolved_refs(&self) -> &[(EntityId, String)] {
        &self.unresolved_refs
    }

    pub fn out_edges(&self, id: EntityId) -> &[Edge] {
        self.out_adj.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn in_edges(&self, id: EntityId) -> &[Edge] {
        self.in_adj.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.out_adj.values().flatten()
    }

    pub fn edge_count(&self) -> usize {
        self.out_adj.values().map(Vec::len).sum()
    }

    /// Inserts an entity. Adjacency is left untouched until the next
    /// [`rebuild_edges`](Self::rebuild_edges).
    pub fn add_entity(&mut self, e: Entity) -> Result<EntityId, GraphError> {
        if self.entities.contains_key(&e.id) {
            return Err(GraphError::DuplicateId(e.id));
        }
        e.validate()
            .map_err(|reason| GraphError::InvalidEntity { id: e.id, reason })?;
        let key = normalize_title(&e.title);
        if !key.is_empty() {
            if let Some(&existing) = self.title_index.get(&key) {
                return Err(GraphError::DuplicateTitle {
                    title: e.title.clone(),
                    existing,
                    new: e.id,
                });
            }
        }
        let id = e.id;
        self.index_entity(&e);
        self.entities.insert(id, e);
        Ok(id)
    }

    fn index_entity(&mut self, e: &Entity) {
        let key = normalize_title(&e.title);
        if !key.is_empty() {
            self.title_index.insert(key, e.id);
        }
        let label = normalize_title(&e.label);
        if !label.is_empty() {
            self.label_index.entry(label).or_insert(e.id);
        }
    }

    fn unindex_entity(&mut self, e: &Entity) {
        let key = normalize_title(&e.title);
        if self.title_index.get(&key) == Some(&e.id) {
            self.title_index.remove(&key);
        }
        let label = normalize_title(&e.label);
        if self.label_index.get(&label) == Some(&e.id) {
            self.label_index.remove(&label);
        }
    }

    /// Replaces a stored entity, keeping the title and label indices current.
    pub fn replace_entity(&mut self, e: Entity) -> Result<(), GraphError> {
        let old = self
            .entities
            .get(&e.id)
            .cloned()
            .ok_or(GraphError::UnknownEntity(e.id))?;
        e.validate()
            .map_err(|reason| GraphError::InvalidEntity { id: e.id, reason })?;
        let key = normalize_title(&e.title);
        if let Some(&existing) = self.title_index.get(&key) {
            if existing != e.id && !key.is_empty() {
                return Err(GraphError::DuplicateTitle {
                    title: e.title.clone(),
                    existing,
                    new: e.id,
                });
            }
        }
        self.unindex_entity(&old);
        self.index_entity(&e);
        self.entities.insert(e.id, e);
        Ok(())
    }

    /// Records `name` as another name of `target`. Returns false when the name
    /// already resolves somewhere.
    pub fn add_alias(&mut self, name: &str, target: EntityId) -> Result<bool, GraphError> {
        if !self.entities.contains_key(&target) {
            return Err(GraphError::UnknownEntity(target));
        }
        let key = normalize_title(name);
        if key.is_empty()
            || self.title_index.contains_key(&key)
            || self.label_index.contains_key(&key)
            || self.aliases.contains_key(&key)
        {
            return Ok(false);
        }
        self.aliases.insert(key, target);
        Ok(true)
    }

    pub(crate) fn restore_aliases(&mut self, aliases: BTreeMap<String, EntityId>) {
        self.aliases = aliases;
    }

    /// Exact title search over titles and recorded aliases.
    pub fn exact_lookup(&self, query_title: &str) -> Option<EntityId> {
        let key = normalize_title(query_title);
        if key.is_empty() {
            return None;
        }
        self.title_index
            .get(&key)
            .or_else(|| self.aliases.get(&key))
            .copied()
    }

    /// Resolves a reference string: exact title, then label, then alias, then
    /// the title with its kind prefix removed.
    pub fn resolve_reference(&self, reference: &str) -> Option<EntityId> {
        let key = normalize_title(reference);
        if key.is_empty() {
            return None;
        }
        if let Some(id) = self
            .title_index
            .get(&key)
            .or_else(|| self.label_index.get(&key))
            .or_else(|| self.aliases.get(&key))
        {
            return Some(*id);
        }
        strip_kind_prefix(&key)
            .and_then(|bare| self.title_index.get(bare).or_else(|| self.aliases.get(bare)))
            .copied()
    }

    /// Recomputes adjacency from every entity's entity-, proof- and
    /// solution-level references, then rewrites each entity's
    /// `in_refs`/`out_refs` and id lists.
    pub fn rebuild_edges(&mut self) -> RebuildSummary {
        // (from, to) -> tactic; first labelled occurrence wins
        let mut pairs: BTreeMap<(EntityId, EntityId), EdgeTactic> = BTreeMap::new();
        let mut unresolved: Vec<(EntityId, String)> = Vec::new();
        for e in self.entities.values() {
            for (refs, tactics) in e.reference_levels() {
                let names = refs
                    .iter()
                    .map(String::as_str)
                    .chain(tactics.keys().map(String::as_str).filter(|k| !refs.iter().any(|r| r == k)));
                for name in names {
                    let tactic = EdgeTactic(tactics.get(name).copied());
                    match self.resolve_reference(name) {
                        Some(from) => {
                            let slot = pairs.entry((from, e.id)).or_insert(tactic);
                            if slot.0.is_none() {
                                *slot = tactic;
                            }
                        }
                        None => {
                            let item = (e.id, name.to_string());
                            if !unresolved.contains(&item) {
                                unresolved.push(item);
                            }
                        }
                    }
                }
            }
        }

        self.out_adj.clear();
        self.in_adj.clear();
        let mut warnings = Vec::new();
        for (&(from, to), &tactic) in &pairs {
            let edge = Edge { from, to, tactic };
            self.out_adj.entry(from).or_default().push(edge);
            self.in_adj.entry(to).or_default().push(edge);
            let source_type = self.entities[&from].entity_type;
            if matches!(source_type, EntityType::Problem | EntityType::Other) {
                warnings.push(EdgeWarning {
                    from,
                    to,
                    source_type,
                });
            }
        }
        for edges in self.in_adj.values_mut() {
            edges.sort_by_key(|e| e.from);
        }

        let names: BTreeMap<EntityId, String> = self
            .entities
            .values()
            .map(|e| (e.id, e.display_name()))
            .collect();
        let keyed = |id: EntityId, map: &BTreeMap<String, EdgeTactic>| {
            let name = &names[&id];
            if map.contains_key(name) {
                format!("{name} #{id}")
            } else {
                name.clone()
            }
        };
        for (id, e) in self.entities.iter_mut() {
            e.in_refs.clear();
            e.in_ref_ids.clear();
            for edge in self.in_adj.get(id).map(Vec::as_slice).unwrap_or(&[]) {
                let k = keyed(edge.from, &e.in_refs);
                e.in_refs.insert(k, edge.tactic);
                e.in_ref_ids.push(edge.from);
            }
            e.out_refs.clear();
            e.out_ref_ids.clear();
            for edge in self.out_adj.get(id).map(Vec::as_slice).unwrap_or(&[]) {
                let k = keyed(edge.to, &e.out_refs);
                e.out_refs.insert(k, edge.tactic);
                e.out_ref_ids.push(edge.to);
            }
        }
        self.unresolved_refs = unresolved;
        RebuildSummary {
            edge_count: pairs.len(),
            warnings,
        }
    }

    fn neighbors(&self, id: EntityId, direction: Direction) -> impl Iterator<Item = EntityId> + '_ {
        let fwd = matches!(direction, Direction::Forward | Direction::Either);
        let bwd = matches!(direction, Direction::Backward | Direction::Either);
        let out = self.out_edges(id).iter().filter(move |_| fwd).map(|e| e.to);
        let inn = self.in_edges(id).iter().filter(move |_| bwd).map(|e| e.from);
        out.chain(inn)
    }

    /// Nodes joined to `src` by a walk of 1..=k steps. `src` itself appears
    /// only when such a walk returns to it.
    pub fn k_hop_reachable(
        &self,
        src: EntityId,
        k: usize,
        direction: Direction,
    ) -> Result<BTreeSet<EntityId>, GraphError> {
        if !self.contains(src) {
            return Err(GraphError::UnknownEntity(src));
        }
        let mut reached = BTreeSet::new();
        let mut frontier = vec![src];
        for _ in 0..k {
            let mut next = Vec::new();
            for &v in &frontier {
                for w in self.neighbors(v, direction) {
                    if reached.insert(w) {
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(reached)
    }

    /// Shortest-hop distances from `src` following `direction`, BFS order.
    pub fn hop_distances(&self, src: EntityId, direction: Direction) -> BTreeMap<EntityId, usize> {
        let mut dist = BTreeMap::new();
        let mut queue = VecDeque::from([(src, 0usize)]);
        dist.insert(src, 0);
        while let Some((v, d)) = queue.pop_front() {
            for w in self.neighbors(v, direction) {
                if !dist.contains_key(&w) {
                    dist.insert(w, d + 1);
                    queue.push_back((w, d + 1));
                }
            }
        }
        dist
    }

    pub fn graph_stats(&self, simple_cycle_cap: usize) -> GraphStats {
        let mut type_counts = BTreeMap::new();
        let mut field_distribution = BTreeMap::new();
        let mut head_count = 0;
        let mut leaf_count = 0;
        for e in self.entities.values() {
            *type_counts.entry(e.entity_type).or_insert(0) += 1;
            if let Some(f) = e.field {
                *field_distribution.entry(f).or_insert(0) += 1;
            }
            if self.in_edges(e.id).is_empty() {
                head_count += 1;
            }
            if self.out_edges(e.id).is_empty() {
                leaf_count += 1;
            }
        }
        let (simple_cycle_count, capped) = cycles::count_simple_cycles(&self.dense_adjacency(), simple_cycle_cap);
        GraphStats {
            node_count: self.len(),
            edge_count: self.edge_count(),
            type_counts,
            head_count,
            leaf_count,
            simple_cycle_count,
            simple_cycle_enumeration_capped: capped,
            field_distribution,
        }
    }

    /// Out-adjacency over dense indices `0..n` in ascending id order.
    pub fn dense_adjacency(&self) -> Vec<Vec<usize>> {
        let index: BTreeMap<EntityId, usize> =
            self.entities.keys().enumerate().map(|(i, id)| (*id, i)).collect();
        self.entities
            .keys()
            .map(|id| self.out_edges(*id).iter().map(|e| index[&e.to]).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TacticLabel;

    fn ent(id: u64, t: EntityType, title: &str) -> Entity {
        Entity::new(EntityId(id), t).with_title(title)
    }

    fn chain() -> KnowledgeGraph {
        // a -> b -> c
        let mut kg = KnowledgeGraph::new();
        kg.add_entity(ent(0, EntityType::Definition, "a")).unwrap();
        kg.add_entity(ent(1, EntityType::Definition, "b").with_ref("a", TacticLabel::Premise))
            .unwrap();
        kg.add_entity(ent(2, EntityType::Theorem, "c").with_ref("b", TacticLabel::Lemma))
            .unwrap();
        kg.rebuild_edges();
        kg
    }

    #[test]
    fn normalization_collapses_case_space_and_colon() {
        assert_eq!(normalize_title("Definition:Symmetric Group"), "definition:symmetric group");
        assert_eq!(normalize_title("  definition: symmetric   group "), "definition:symmetric group");
        assert_eq!(normalize_title("DEFINITION :\tSymmetric\nGroup"), "definition:symmetric group");
        assert_eq!(normalize_title("   "), "");
    }

    #[test]
    fn add_into_empty_graph() {
        let mut kg = KnowledgeGraph::new();
        kg.add_entity(ent(0, EntityType::Definition, "x")).unwrap();
        assert_eq!(kg.len(), 1);
        assert_eq!(kg.edge_count(), 0);
    }

    #[test]
    fn duplicate_id_and_title_rejected() {
        let mut kg = KnowledgeGraph::new();
        kg.add_entity(ent(0, EntityType::Definition, "Definition:Set")).unwrap();
        assert_eq!(
            kg.add_entity(ent(0, EntityType::Definition, "other")),
            Err(GraphError::DuplicateId(EntityId(0)))
        );
        assert!(matches!(
            kg.add_entity(ent(1, EntityType::Definition, "definition: set")),
            Err(GraphError::DuplicateTitle { existing: EntityId(0), .. })
        ));
        // untitled entities never collide
        kg.add_entity(ent(2, EntityType::Theorem, "")).unwrap();
        kg.add_entity(ent(3, EntityType::Theorem, "")).unwrap();
    }

    #[test]
    fn exact_lookup_normalizes() {
        let mut kg = KnowledgeGraph::new();
        assert_eq!(kg.exact_lookup("anything"), None);
        kg.add_entity(ent(4, EntityType::Definition, "Definition:Symmetric Group")).unwrap();
        assert!(kg.title_index().contains_key("definition:symmetric group"));
        assert_eq!(kg.exact_lookup("Definition:Symmetric Group"), Some(EntityId(4)));
        assert_eq!(kg.exact_lookup("definition: symmetric  group"), Some(EntityId(4)));
        assert_eq!(kg.exact_lookup("symmetric group"), None);
        assert_eq!(kg.resolve_reference("theorem: Symmetric Group"), None);
        assert_eq!(kg.resolve_reference("Definition:Symmetric Group"), Some(EntityId(4)));
    }

    #[test]
    fn no_references_means_all_heads_and_leaves() {
        let mut kg = KnowledgeGraph::new();
        for i in 0..4 {
            kg.add_entity(ent(i, EntityType::Definition, &format!("d{i}"))).unwrap();
        }
        let s = kg.rebuild_edges();
        assert_eq!(s.edge_count, 0);
        let st = kg.graph_stats(DEFAULT_CYCLE_CAP);
        assert_eq!((st.head_count, st.leaf_count), (4, 4));
    }

    #[test]
    fn problem_source_edges_warn() {
        let mut kg = KnowledgeGraph::new();
        kg.add_entity(ent(0, EntityType::Problem, "p")).unwrap();
        kg.add_entity(ent(1, EntityType::Definition, "d")).unwrap();
        kg.add_entity(
            ent(2, EntityType::Theorem, "t")
                .with_ref("p", TacticLabel::Calculation)
                .with_ref("d", TacticLabel::Premise),
        )
        .unwrap();
        let s = kg.rebuild_edges();
        assert_eq!(s.edge_count, 2);
        assert_eq!(
            s.warnings,
            vec![EdgeWarning { from: EntityId(0), to: EntityId(2), source_type: EntityType::Problem }]
        );
        let mut edges: Vec<_> = kg.edges().map(|e| (e.from.0, e.to.0)).collect();
        edges.sort();
        assert_eq!(edges, vec![(0, 2), (1, 2)]);
    }

    #[test]
    fn proof_level_references_create_edges_and_unresolved_are_kept() {
        let mut kg = KnowledgeGraph::new();
        kg.add_entity(ent(0, EntityType::Definition, "d")).unwrap();
        let mut t = ent(1, EntityType::Theorem, "t");
        let mut proof = crate::model::DerivationRecord::from_contents(vec!["by d".into()]);
        proof.refs = vec!["d".into(), "missing".into()];
        t.proofs.push(proof);
        kg.add_entity(t).unwrap();
        kg.rebuild_edges();
        assert_eq!(kg.in_edges(EntityId(1)).len(), 1);
        assert_eq!(kg.in_edges(EntityId(1))[0].tactic, EdgeTactic(None));
        assert_eq!(kg.unresolved_refs(), &[(EntityId(1), "missing".to_string())]);
        let t = kg.entity(EntityId(1)).unwrap();
        assert_eq!(t.in_ref_ids, vec![EntityId(0)]);
        assert!(t.in_refs.contains_key("d"));
    }

    #[test]
    fn k_hop_on_chain() {
        let kg = chain();
        let f = |id, k, d| kg.k_hop_reachable(EntityId(id), k, d).unwrap().into_iter().map(|i| i.0).collect::<Vec<_>>();
        assert_eq!(f(0, 1, Direction::Forward), vec![1]);
        assert_eq!(f(0, 2, Direction::Forward), vec![1, 2]);
        assert_eq!(f(1, 1, Direction::Either), vec![0, 2]);
        assert_eq!(f(2, 2, Direction::Backward), vec![0, 1]);
        assert!(f(0, 0, Direction::Either).is_empty());
        assert_eq!(
            kg.k_hop_reachable(EntityId(9), 1, Direction::Forward),
            Err(GraphError::UnknownEntity(EntityId(9)))
        );
    }

    #[test]
    fn three_cycle_stats() {
        let mut kg = KnowledgeGraph::new();
        kg.add_entity(ent(0, EntityType::Theorem, "a").with_ref("c", TacticLabel::Lemma)).unwrap();
        kg.add_entity(ent(1, EntityType::Theorem, "b").with_ref("a", TacticLabel::Lemma)).unwrap();
        kg.add_entity(ent(2, EntityType::Theorem, "c").with_ref("b", TacticLabel::Lemma)).unwrap();
        kg.rebuild_edges();
        let st = kg.graph_stats(DEFAULT_CYCLE_CAP);
        assert_eq!((st.head_count, st.leaf_count, st.simple_cycle_count), (0, 0, 1));
        assert!(!st.simple_cycle_enumeration_capped);
        assert_eq!(st.node_count, 3);
        // src lies on a 3-cycle: reachable from itself at k=3, not before
        assert!(!kg.k_hop_reachable(EntityId(0), 2, Direction::Forward).unwrap().contains(&EntityId(0)));
        assert!(kg.k_hop_reachable(EntityId(0), 3, Direction::Forward).unwrap().contains(&EntityId(0)));
    }

    #[test]
    fn aliases_resolve_after_rebuild() {
        let mut kg = chain();
        assert!(kg.add_alias("Alpha", EntityId(0)).unwrap());
        assert!(!kg.add_alias("a", EntityId(1)).unwrap());
        kg.add_entity(ent(3, EntityType::Problem, "p").with_ref("alpha", TacticLabel::Deduction))
            .unwrap();
        kg.rebuild_edges();
        assert_eq!(kg.in_edges(EntityId(3))[0].from, EntityId(0));
    }
}
