//! Entity schema: the sixteen stored attributes and their closed vocabularies.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u64);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for EntityId {
    fn from(v: u64) -> Self {
        EntityId(v)
    }
}

/// Error returned when a string is outside one of the closed vocabularies.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("`{value}` is not a valid {kind}")]
pub struct UnknownVariant {
    pub kind: &'static str,
    pub value: String,
}

macro_rules! closed_vocabulary {
    ($(#[$meta:meta])* $name:ident, $kind:literal, { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = UnknownVariant;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let t = s.trim().to_lowercase();
                match t.as_str() {
                    $($text => Ok($name::$variant),)+
                    _ => Err(UnknownVariant { kind: $kind, value: s.to_string() }),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

closed_vocabulary!(
    EntityType, "entity type", {
        Definition => "definition",
        Theorem => "theorem",
        Problem => "problem",
        Other => "other",
    }
);

closed_vocabulary!(
    /// Role an entity plays when it is referenced. Also used as the action
    /// label of body segments.
    TacticLabel, "tactic label", {
        Premise => "premise",
        Assumption => "assumption",
        Lemma => "lemma",
        Proposition => "proposition",
        Corollary => "corollary",
        Calculation => "calculation",
        Enumeration => "enumeration",
        Definition => "definition",
        Conclusion => "conclusion",
        Deduction => "deduction",
    }
);

closed_vocabulary!(
    MathField, "mathematical field", {
        Algebra => "algebra",
        Geometry => "geometry",
        Analysis => "analysis",
        Logic => "logic",
        ProbabilityAndStatistics => "probability and statistics",
        AppliedMathematics => "applied mathematics",
        FoundationsOfMathematics => "foundations of mathematics",
    }
);

/// Serializes `Option<T>` as the variant string, or `""` when unset.
pub(crate) mod empty_str_option {
    use super::*;

    pub fn serialize<T, S>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error>
    where
        T: Serialize,
        S: Serializer,
    {
        match v {
            Some(t) => t.serialize(s),
            None => s.serialize_str(""),
        }
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<Option<T>, D::Error>
    where
        T: FromStr,
        T::Err: fmt::Display,
        D: Deserializer<'de>,
    {
        let s = String::deserialize(d)?;
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(serde::de::Error::custom)
        }
    }
}

/// Tactic attached to an edge. References harvested by markup rules carry no
/// tactic until augmentation labels them; those serialize as `""`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct EdgeTactic(pub Option<TacticLabel>);

impl Serialize for EdgeTactic {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        empty_str_option::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for EdgeTactic {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        empty_str_option::deserialize(d).map(EdgeTactic)
    }
}

impl fmt::Display for EdgeTactic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(t) => f.write_str(t.as_str()),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySegment {
    pub description: String,
    pub action: TacticLabel,
}

/// A proof (for theorems) or a solution (for problems).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivationRecord {
    pub contents: Vec<String>,
    pub refs: Vec<String>,
    pub bodylist: Vec<BodySegment>,
    pub references_tactics: BTreeMap<String, TacticLabel>,
    /// Only set on records produced by knowledge completion.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub source: String,
}

impl DerivationRecord {
    pub fn from_contents(contents: Vec<String>) -> Self {
        DerivationRecord {
            contents,
            ..Default::default()
        }
    }

    /// References in `refs` followed by tactic keys missing from `refs`.
    pub fn reference_titles(&self) -> Vec<&str> {
        reference_union(&self.refs, &self.references_tactics)
    }
}

fn reference_union<'a>(
    refs: &'a [String],
    tactics: &'a BTreeMap<String, TacticLabel>,
) -> Vec<&'a str> {
    let mut out: Vec<&str> = refs.iter().map(String::as_str).collect();
    for k in tactics.keys() {
        if !refs.iter().any(|r| r == k) {
            out.push(k);
        }
    }
    out
}

/// One vertex of the graph. Field order here is the on-disk key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entity {
    pub id: EntityId,
    #[serde(rename = "type")]
    pub entity_type: EntityType,
    pub label: String,
    pub title: String,
    #[serde(with = "empty_str_option")]
    pub field: Option<MathField>,
    pub contents: Vec<String>,
    pub bodylist: Vec<BodySegment>,
    pub refs: Vec<String>,
    pub references_tactics: BTreeMap<String, TacticLabel>,
    pub source: String,
    pub proofs: Vec<DerivationRecord>,
    pub solutions: Vec<DerivationRecord>,
    pub in_refs: BTreeMap<String, EdgeTactic>,
    pub in_ref_ids: Vec<EntityId>,
    pub out_refs: BTreeMap<String, EdgeTactic>,
    pub out_ref_ids: Vec<EntityId>,
}

impl Entity {
    pub fn new(id: EntityId, entity_type: EntityType) -> Self {
        Entity {
            id,
            entity_type,
            label: String::new(),
            title: String::new(),
            field: None,
            contents: Vec::new(),
            bodylist: Vec::new(),
            refs: Vec::new(),
            references_tactics: BTreeMap::new(),
            source: String::new(),
            proofs: Vec::new(),
            solutions: Vec::new(),
            in_refs: BTreeMap::new(),
            in_ref_ids: Vec::new(),
            out_refs: BTreeMap::new(),
            out_ref_ids: Vec::new(),
        }
    }

    pub fn with_title(mut self, title: impl Into<String>) -> Self {
        self.title = title.into();
        self
    }

    pub fn with_contents<I, S>(mut self, contents: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.contents = contents.into_iter().map(Into::into).collect();
        self
    }

    /// Adds a reference with a tactic at entity level.
    pub fn with_ref(mut self, title: impl Into<String>, tactic: TacticLabel) -> Self {
        let title = title.into();
        if !self.refs.contains(&title) {
            self.refs.push(title.clone());
        }
        self.references_tactics.insert(title, tactic);
        self
    }

    /// Title if set, then label, then `#id`.
    pub fn display_name(&self) -> String {
        if !self.title.trim().is_empty() {
            self.title.clone()
        } else if !self.label.trim().is_empty() {
            self.label.clone()
        } else {
            format!("#{}", self.id)
        }
    }

    pub fn content_text(&self) -> String {
        self.contents.join(" ")
    }

    /// Proofs for theorems, solutions for problems, nothing otherwise.
    pub fn derivations(&self) -> &[DerivationRecord] {
        match self.entity_type {
            EntityType::Theorem => &self.proofs,
            EntityType::Problem => &self.solutions,
            _ => &[],
        }
    }

    pub fn derivations_mut(&mut self) -> Option<&mut Vec<DerivationRecord>> {
        match self.entity_type {
            EntityType::Theorem => Some(&mut self.proofs),
            EntityType::Problem => Some(&mut self.solutions),
            _ => None,
        }
    }

    pub fn reference_titles(&self) -> Vec<&str> {
        reference_union(&self.refs, &self.references_tactics)
    }

    /// Every reference level in order: entity, proofs, solutions.
    pub fn reference_levels(&self) -> Vec<(&[String], &BTreeMap<String, TacticLabel>)> {
        let mut levels = vec![(self.refs.as_slice(), &self.references_tactics)];
        for r in self.proofs.iter().chain(self.solutions.iter()) {
            levels.push((r.refs.as_slice(), &r.references_tactics));
        }
        levels
    }

    /// Checks the structural invariants of the record.
    pub fn validate(&self) -> Result<(), String> {
        if !self.proofs.is_empty() && self.entity_type != EntityType::Theorem {
            return Err(format!("{} entity carries proofs", self.entity_type));
        }
        if !self.solutions.is_empty() && self.entity_type != EntityType::Problem {
            return Err(format!("{} entity carries solutions", self.entity_type));
        }
        for key in self.references_tactics.keys() {
            if !self.refs.contains(key) {
                return Err(format!("tactic key `{key}` missing from refs"));
            }
        }
        for (i, r) in self.proofs.iter().chain(&self.solutions).enumerate() {
            for key in r.references_tactics.keys() {
                if !r.refs.contains(key) {
                    return Err(format!("record {i}: tactic key `{key}` missing from refs"));
                }
            }
        }
        for s in &self.solutions {
            if !s.bodylist.is_empty() {
                return Err("solution records carry no bodylist".into());
            }
        }
        let segments = self
            .bodylist
            .iter()
            .chain(self.proofs.iter().flat_map(|p| p.bodylist.iter()));
        for seg in segments {
            if seg.description.trim().is_empty() {
                return Err("empty bodylist description".into());
            }
        }
        Ok(())
    }
}
