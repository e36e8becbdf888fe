//! Markup-based reference harvesting.

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatternSpec {
    /// `\ref{a}`, `\cref{a,b}`, `\Cref{...}`, `\autoref{...}`
    LatexRef,
    /// `[[Target]]` or `[[Target|shown text]]`
    WikiLink,
    /// A regex with one capture group holding the referenced title.
    Custom { regex: String },
}

#[derive(Debug, Clone)]
pub struct RefPatterns {
    compiled: Vec<(PatternSpec, Regex)>,
}

impl RefPatterns {
    pub fn new(specs: &[PatternSpec]) -> Result<Self, regex::Error> {
        let compiled = specs
            .iter()
            .map(|spec| {
                let re = match spec {
                    PatternSpec::LatexRef => Regex::new(r"\\(?:c|C|auto|eq)?ref\*?\{([^}]*)\}")?,
                    PatternSpec::WikiLink => Regex::new(r"\[\[([^\[\]|]+)(?:\|[^\[\]]*)?\]\]")?,
                    PatternSpec::Custom { regex } => Regex::new(regex)?,
                };
                Ok((spec.clone(), re))
            })
            .collect::<Result<_, regex::Error>>()?;
        Ok(RefPatterns { compiled })
    }

    pub fn with_custom(mut self, regex: &str) -> Result<Self, regex::Error> {
        let spec = PatternSpec::Custom {
            regex: regex.to_string(),
        };
        let re = Regex::new(regex)?;
        self.compiled.push((spec, re));
        Ok(self)
    }

    pub fn specs(&self) -> impl Iterator<Item = &PatternSpec> {
        self.compiled.iter().map(|(s, _)| s)
    }
}

impl Default for RefPatterns {
    fn default() -> Self {
        RefPatterns::new(&[PatternSpec::LatexRef, PatternSpec::WikiLink]).expect("builtin patterns compile")
    }
}

/// Harvests referenced titles in order of first appearance, without
/// duplicates. Matches from all patterns are merged by position.
pub fn extract_refs_rule_based(contents: &[String], patterns: &RefPatterns) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for text in contents {
        let mut found: Vec<(usize, String)> = Vec::new();
        for (spec, re) in &patterns.compiled {
            for caps in re.captures_iter(text) {
                let Some(m) = caps.get(1).or_else(|| caps.get(0)) else {
                    continue;
                };
                let pieces: Vec<&str> = match spec {
                    PatternSpec::LatexRef => m.as_str().split(',').collect(),
                    _ => vec![m.as_str()],
                };
                for p in pieces {
                    let p = p.trim();
                    if !p.is_empty() {
                        found.push((m.start(), p.to_string()));
                    }
                }
            }
        }
        found.sort_by_key(|(pos, _)| *pos);
        for (_, title) in found {
            if !out.contains(&title) {
                out.push(title);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refs(s: &str) -> Vec<String> {
        extract_refs_rule_based(&[s.to_string()], &RefPatterns::default())
    }

    #[test]
    fn single_latex_ref() {
        assert_eq!(refs(r"by \ref{thm:mvt} we get"), vec!["thm:mvt"]);
    }

    #[test]
    fn wiki_links_deduplicate() {
        assert_eq!(refs("[[Definition:Set]] and [[Definition:Set]]"), vec!["Definition:Set"]);
        assert_eq!(refs("a [[Definition:Set|set]] here"), vec!["Definition:Set"]);
    }

    #[test]
    fn mixed_syntaxes_keep_source_order() {
        let text = r"Using \cref{lem:a, lem:b} and [[Definition:Group|groups]], then \ref{thm:c}; see also [[Definition:Group]] and \cref{lem:a}.";
        assert_eq!(refs(text), vec!["lem:a", "lem:b", "Definition:Group", "thm:c"]);
    }

    #[test]
    fn custom_pattern() {
        let p = RefPatterns::default().with_custom(r"see ([A-Z][a-z]+ Theorem)").unwrap();
        let got = extract_refs_rule_based(&["see Rolle Theorem, then \\ref{x}".to_string()], &p);
        assert_eq!(got, vec!["Rolle Theorem", "x"]);
    }
}
