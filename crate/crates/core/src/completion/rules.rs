//! Built-in self-calibration rules.

use std::sync::LazyLock;

use regex::Regex;

use super::ProblemCategory;

/// A check an answer must pass before it is accepted. Implementations must
/// be pure.
pub trait CalibrationRule: Send + Sync {
    fn name(&self) -> &str;
    fn applies_to(&self, category: ProblemCategory) -> bool;
    /// `Err` carries a one-line description of the violation.
    fn check(&self, problem: &str, answer: &str) -> Result<(), String>;
}

pub fn default_rules() -> Vec<Box<dyn CalibrationRule>> {
    vec![
        Box::new(NonEmptyAnswer),
        Box::new(FinalStatement),
        Box::new(NumericResult),
        Box::new(RestatesAskedQuantity),
    ]
}

fn last_line(answer: &str) -> &str {
    answer.lines().rev().map(str::trim).find(|l| !l.is_empty()).unwrap_or("")
}

pub struct NonEmptyAnswer;

impl CalibrationRule for NonEmptyAnswer {
    fn name(&self) -> &str {
        "nonempty-answer"
    }

    fn applies_to(&self, _: ProblemCategory) -> bool {
        true
    }

    fn check(&self, _: &str, answer: &str) -> Result<(), String> {
        if answer.trim().is_empty() {
            Err("the answer is empty".into())
        } else {
            Ok(())
        }
    }
}

/// Proofs must close with an explicit concluding marker.
pub struct FinalStatement;

const FINAL_MARKERS: &[&str] = &[
    "q.e.d",
    "qed",
    "∎",
    "□",
    "\\blacksquare",
    "\\square",
    "\\qed",
    "completes the proof",
    "as required",
    "as desired",
    "which proves",
    "this proves",
    "hence proved",
];

impl CalibrationRule for FinalStatement {
    fn name(&self) -> &str {
        "final-statement"
    }

    fn applies_to(&self, category: ProblemCategory) -> bool {
        category == ProblemCategory::Proof
    }

    fn check(&self, _: &str, answer: &str) -> Result<(), String> {
        let last = last_line(answer).to_lowercase();
        if FINAL_MARKERS.iter().any(|m| last.contains(m)) {
            Ok(())
        } else {
            Err("the proof does not end with a concluding statement".into())
        }
    }
}

static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[-+]?\d+(?:[.,]\d+)?(?:\s*/\s*\d+)?|\\frac\{\d+\}\{\d+\}").unwrap());

/// Calculations must state a number in their last line.
pub struct NumericResult;

impl CalibrationRule for NumericResult {
    fn name(&self) -> &str {
        "numeric-result"
    }

    fn applies_to(&self, category: ProblemCategory) -> bool {
        category == ProblemCategory::Calculation
    }

    fn check(&self, _: &str, answer: &str) -> Result<(), String> {
        if NUMBER.is_match(last_line(answer)) {
            Ok(())
        } else {
            Err("the final line states no numeric result".into())
        }
    }
}

static QUESTION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:find|compute|calculate|determine|how (?:many|much|long|far)|what is|what are|name)\b([^.?!]*)").unwrap()
});

const STOPWORDS: &[&str] = &[
    "that", "this", "with", "from", "there", "their", "which", "when", "where", "what", "then", "than", "each",
    "into", "does", "have", "will", "your", "they", "them", "these", "those", "used", "value", "values",
];

/// Application answers must mention what the question asks for: at least
/// one content word of the asking clause has to reappear.
pub struct RestatesAskedQuantity;

impl CalibrationRule for RestatesAskedQuantity {
    fn name(&self) -> &str {
        "restates-asked-quantity"
    }

    fn applies_to(&self, category: ProblemCategory) -> bool {
        category == ProblemCategory::Application
    }

    fn check(&self, problem: &str, answer: &str) -> Result<(), String> {
        let Some(clause) = QUESTION.captures_iter(problem).last().map(|c| c[1].to_lowercase()) else {
            return Ok(());
        };
        let words: Vec<&str> = clause
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| w.chars().count() >= 4 && !STOPWORDS.contains(w))
            .collect();
        if words.is_empty() {
            return Ok(());
        }
        let answer = answer.to_lowercase();
        if words.iter().any(|w| answer.contains(w)) {
            Ok(())
        } else {
            Err(format!("the answer never names the asked quantity ({})", words.join(", ")))
        }
    }
}
