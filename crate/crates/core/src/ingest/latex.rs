//! Environment-based extraction from LaTeX sources.
//!
//! Comments are removed first (verbatim-like environments are copied
//! untouched), then `\begin{..}`/`\end{..}` pairs are matched with a stack.
//! A matched environment nested inside another matched environment is cut out
//! of the outer body, so every character of a body lands in exactly one
//! entity.

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::refs::{extract_refs_rule_based, RefPatterns};
use super::{IngestError, RawDerivation, RawEntity};
use crate::model::EntityType;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvironmentRule {
    pub env_name: String,
    pub entity_type: EntityType,
    #[serde(default)]
    pub attach_following_proof: bool,
}

impl EnvironmentRule {
    pub fn new(env_name: &str, entity_type: EntityType, attach_following_proof: bool) -> Self {
        EnvironmentRule {
            env_name: env_name.to_string(),
            entity_type,
            attach_following_proof,
        }
    }
}

/// An environment whose body becomes a proof or solution of the nearest
/// preceding entity of type `attaches_to`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivationRule {
    pub env_name: String,
    pub attaches_to: EntityType,
}

#[derive(Debug, Clone)]
pub struct LatexConfig {
    pub rules: Vec<EnvironmentRule>,
    pub derivations: Vec<DerivationRule>,
    /// Environments whose bodies are skipped verbatim.
    pub skip: Vec<String>,
    pub source: String,
    pub patterns: RefPatterns,
}

pub fn default_rules() -> Vec<EnvironmentRule> {
    use EntityType::*;
    let mut rules = Vec::new();
    for name in ["theorem", "proposition", "lemma", "corollary"] {
        rules.push(EnvironmentRule::new(name, Theorem, true));
    }
    rules.push(EnvironmentRule::new("definition", Definition, false));
    for name in ["problem", "exercise", "example"] {
        rules.push(EnvironmentRule::new(name, Problem, true));
    }
    for name in ["remark", "notation"] {
        rules.push(EnvironmentRule::new(name, Other, false));
    }
    rules
}

pub fn default_derivations() -> Vec<DerivationRule> {
    vec![
        DerivationRule {
            env_name: "proof".into(),
            attaches_to: EntityType::Theorem,
        },
        DerivationRule {
            env_name: "solution".into(),
            attaches_to: EntityType::Problem,
        },
    ]
}

impl Default for LatexConfig {
    fn default() -> Self {
        LatexConfig {
            rules: default_rules(),
            derivations: default_derivations(),
            skip: ["verbatim", "lstlisting", "minted", "comment"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            source: "textbook".into(),
            patterns: RefPatterns::default(),
        }
    }
}

impl LatexConfig {
    pub fn with_rules(rules: Vec<EnvironmentRule>) -> Self {
        LatexConfig {
            rules,
            ..Default::default()
        }
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }
}

fn base_name(name: &str) -> &str {
    name.trim().trim_end_matches('*')
}

/// Source text with comments removed, plus the original byte offset of every
/// retained byte.
struct Cleaned {
    text: String,
    orig: Vec<usize>,
}

impl Cleaned {
    fn offset(&self, i: usize) -> usize {
        self.orig.get(i).copied().unwrap_or_else(|| self.orig.last().map_or(0, |o| o + 1))
    }
}

fn is_escaped(bytes: &[u8], i: usize) -> bool {
    let mut n = 0;
    let mut j = i;
    while j > 0 && bytes[j - 1] == b'\\' {
        n += 1;
        j -= 1;
    }
    n % 2 == 1
}

fn strip_comments(src: &str, skip: &[String], begin_re: &Regex) -> Cleaned {
    let bytes = src.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut orig = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\\' && !is_escaped(bytes, i) {
            if let Some(c) = begin_re.captures_at(src, i).filter(|c| c.get(0).unwrap().start() == i) {
                let (kw, name) = (&c[1], base_name(&c[2]));
                if kw == "begin" && skip.iter().any(|s| s == name) {
                    let close = format!("\\end{{{}}}", &c[2]);
                    let end = src[i..]
                        .find(&close)
                        .map(|p| i + p + close.len())
                        .unwrap_or(bytes.len());
                    for (k, b) in bytes[i..end].iter().enumerate() {
                        out.push(*b);
                        orig.push(i + k);
                    }
                    i = end;
                    continue;
                }
            }
        }
        if bytes[i] == b'%' && !is_escaped(bytes, i) {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        out.push(bytes[i]);
        orig.push(i);
        i += 1;
    }
    Cleaned {
        text: String::from_utf8(out).expect("comment removal keeps utf-8 boundaries"),
        orig,
    }
}

#[derive(Debug, Clone, Copy)]
enum FrameKind {
    Entity(usize),
    Derivation(usize),
    Other,
    Skip,
}

#[derive(Debug)]
struct Frame {
    name: String,
    kind: FrameKind,
    begin_at: usize,
    body_start: usize,
    title: String,
    excised: Vec<(usize, usize)>,
}

/// Parses an optional `[..]` argument starting at or after `pos` (spaces and
/// tabs allowed before it). Returns the argument and the byte after `]`.
fn bracket_arg(text: &str, pos: usize) -> Option<(String, usize)> {
    let bytes = text.as_bytes();
    let mut i = pos;
    while i < bytes.len() && (bytes[i] == b' ' || bytes[i] == b'\t') {
        i += 1;
    }
    if bytes.get(i) != Some(&b'[') {
        return None;
    }
    let start = i + 1;
    let (mut square, mut brace) = (1i32, 0i32);
    let mut j = start;
    while j < bytes.len() {
        match bytes[j] {
            b'{' => brace += 1,
            b'}' => brace -= 1,
            b'[' if brace == 0 => square += 1,
            b']' if brace == 0 => {
                square -= 1;
                if square == 0 {
                    return Some((text[start..j].trim().to_string(), j + 1));
                }
            }
            _ => {}
        }
        j += 1;
    }
    None
}

/// Body text with the excised ranges removed, as trimmed nonempty segments.
fn segments(text: &str, start: usize, end: usize, excised: &[(usize, usize)]) -> Vec<String> {
    let mut cuts: Vec<(usize, usize)> = excised.to_vec();
    cuts.sort();
    let mut out = Vec::new();
    let mut cur = start;
    for (a, b) in cuts.into_iter().chain(std::iter::once((end, end))) {
        if a > cur {
            let seg = text[cur..a].trim();
            if !seg.is_empty() {
                out.push(seg.to_string());
            }
        }
        cur = cur.max(b);
    }
    out
}

struct PendingDerivation {
    begin_at: usize,
    rule: usize,
    record: RawDerivation,
}

/// Extracts one [`RawEntity`] per matched environment, in source order.
pub fn extract_from_latex(source: &str, config: &LatexConfig) -> Result<Vec<RawEntity>, IngestError> {
    if config.rules.is_empty() {
        return Err(IngestError::NoRules);
    }
    let tag_re = Regex::new(r"\\(begin|end)\s*\{([^}]*)\}").expect("static regex");
    let label_re = Regex::new(r"\\label\s*\{([^}]*)\}").expect("static regex");
    let cleaned = strip_comments(source, &config.skip, &tag_re);
    let text = cleaned.text.as_str();

    let mut stack: Vec<Frame> = Vec::new();
    let mut entities: Vec<(usize, usize, RawEntity)> = Vec::new();
    let mut pending: Vec<PendingDerivation> = Vec::new();
    let mut pos = 0;
    while let Some(c) = tag_re.captures_at(text, pos) {
        let whole = c.get(0).unwrap();
        pos = whole.end();
        if is_escaped(text.as_bytes(), whole.start()) {
            continue;
        }
        let name = c[2].trim().to_string();
        let base = base_name(&name);
        if &c[1] == "begin" {
            if config.skip.iter().any(|s| s == base) {
                let close = format!("\\end{{{}}}", &c[2]);
                match text[pos..].find(&close) {
                    Some(p) => {
                        let frame = Frame {
                            name,
                            kind: FrameKind::Skip,
                            begin_at: whole.start(),
                            body_start: pos,
                            title: String::new(),
                            excised: Vec::new(),
                        };
                        stack.push(frame);
                        pos += p;
                        continue;
                    }
                    None => {
                        return Err(IngestError::UnbalancedEnvironment {
                            env: name,
                            offset: cleaned.offset(whole.start()),
                        })
                    }
                }
            }
            let kind = if let Some(i) = config.rules.iter().position(|r| r.env_name == base) {
                FrameKind::Entity(i)
            } else if let Some(i) = config.derivations.iter().position(|r| r.env_name == base) {
                FrameKind::Derivation(i)
            } else {
                FrameKind::Other
            };
            let (title, body_start) = match kind {
                FrameKind::Entity(_) | FrameKind::Derivation(_) => {
                    bracket_arg(text, pos).unwrap_or((String::new(), pos))
                }
                _ => (String::new(), pos),
            };
            pos = body_start;
            stack.push(Frame {
                name,
                kind,
                begin_at: whole.start(),
                body_start,
                title,
                excised: Vec::new(),
            });
            continue;
        }

        // \end{..}
        let frame = match stack.pop() {
            Some(f) if f.name == name => f,
            _ => {
                return Err(IngestError::UnbalancedEnvironment {
                    env: name,
                    offset: cleaned.offset(whole.start()),
                })
            }
        };
        let body_end = whole.start();
        let range = (frame.begin_at, whole.end());
        match frame.kind {
            FrameKind::Entity(rule) => {
                let contents = segments(text, frame.body_start, body_end, &frame.excised);
                if !contents.is_empty() {
                    let label = contents
                        .iter()
                        .find_map(|s| label_re.captures(s).map(|c| c[1].trim().to_string()))
                        .unwrap_or_default();
                    let refs = extract_refs_rule_based(&contents, &config.patterns);
                    entities.push((
                        frame.begin_at,
                        rule,
                        RawEntity {
                            entity_type: config.rules[rule].entity_type,
                            label,
                            title: frame.title,
                            contents,
                            refs,
                            source: config.source.clone(),
                            proofs: Vec::new(),
                            solutions: Vec::new(),
                        },
                    ));
                }
            }
            FrameKind::Derivation(rule) => {
                let contents = segments(text, frame.body_start, body_end, &frame.excised);
                if !contents.is_empty() {
                    let refs = extract_refs_rule_based(&contents, &config.patterns);
                    pending.push(PendingDerivation {
                        begin_at: frame.begin_at,
                        rule,
                        record: RawDerivation { contents, refs },
                    });
                }
            }
            FrameKind::Other | FrameKind::Skip => {}
        }
        if matches!(frame.kind, FrameKind::Entity(_) | FrameKind::Derivation(_)) {
            if let Some(parent) = stack
                .iter_mut()
                .rev()
                .find(|f| matches!(f.kind, FrameKind::Entity(_) | FrameKind::Derivation(_)))
            {
                parent.excised.push(range);
            }
        }
    }
    if let Some(open) = stack.pop() {
        return Err(IngestError::UnbalancedEnvironment {
            env: open.name,
            offset: cleaned.offset(open.begin_at),
        });
    }

    entities.sort_by_key(|(at, _, _)| *at);
    for d in pending {
        let target = config.derivations[d.rule].attaches_to;
        let nearest = entities
            .iter_mut()
            .rev()
            .find(|(at, _, e)| *at < d.begin_at && e.entity_type == target);
        if let Some((_, rule, e)) = nearest {
            if !config.rules[*rule].attach_following_proof {
                continue;
            }
            match target {
                EntityType::Theorem => e.proofs.push(d.record),
                EntityType::Problem => e.solutions.push(d.record),
                _ => {}
            }
        }
    }
    Ok(entities.into_iter().map(|(_, _, e)| e).collect())
}
