//! Prompt templates and their rendering.
//!
//! A rendered prompt is the instruction text followed by a context block of
//! `### Name` sections.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::LlmError;
use crate::model::EntityType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    TitleDefinition,
    TitleTheorem,
    TitleProblem,
    FieldDefinition,
    FieldTheorem,
    FieldProblem,
    BodylistDefinition,
    BodylistTheorem,
    BodylistProof,
    RefsProblem,
    RefsSolution,
    TacticsDefinition,
    TacticsTheorem,
    TacticsProof,
    TacticsProblem,
    TacticsSolution,
    FusionStep4,
    FusionStep5,
    CompletionKnowledgePoints,
    CompletionClassify,
    CompletionAnswer,
    CompletionCalibrate,
}

/// The role of the text being augmented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Definition,
    Theorem,
    Problem,
    Proof,
    Solution,
}

impl Subject {
    /// Unclassified entities are prompted with definition wording.
    pub fn of(t: EntityType) -> Subject {
        match t {
            EntityType::Theorem => Subject::Theorem,
            EntityType::Problem => Subject::Problem,
            EntityType::Definition | EntityType::Other => Subject::Definition,
        }
    }

    pub fn phrase(self) -> &'static str {
        match self {
            Subject::Definition => "definition",
            Subject::Theorem => "theorem",
            Subject::Problem => "problem",
            Subject::Proof => "theorem proof",
            Subject::Solution => "problem solution",
        }
    }
}

const FIELD_CHOICES: &str = "\"algebra\", \"geometry\", \"analysis\", \"logic\", \"probability and statistics\", \"applied mathematics\", \"foundations of mathematics\"";
const ROLE_LABELS: &str = "\"premise\", \"assumption\", \"lemma\", \"corollary\", \"definition\", \"conclusion\", \"deduction\", \"calculation\", \"enumeration\"";

impl TemplateId {
    pub const ALL: [TemplateId; 22] = [
        TemplateId::TitleDefinition,
        TemplateId::TitleTheorem,
        TemplateId::TitleProblem,
        TemplateId::FieldDefinition,
        TemplateId::FieldTheorem,
        TemplateId::FieldProblem,
        TemplateId::BodylistDefinition,
        TemplateId::BodylistTheorem,
        TemplateId::BodylistProof,
        TemplateId::RefsProblem,
        TemplateId::RefsSolution,
        TemplateId::TacticsDefinition,
        TemplateId::TacticsTheorem,
        TemplateId::TacticsProof,
        TemplateId::TacticsProblem,
        TemplateId::TacticsSolution,
        TemplateId::FusionStep4,
        TemplateId::FusionStep5,
        TemplateId::CompletionKnowledgePoints,
        TemplateId::CompletionClassify,
        TemplateId::CompletionAnswer,
        TemplateId::CompletionCalibrate,
    ];

    pub fn title(s: Subject) -> Option<TemplateId> {
        match s {
            Subject::Definition => Some(TemplateId::TitleDefinition),
            Subject::Theorem => Some(TemplateId::TitleTheorem),
            Subject::Problem => Some(TemplateId::TitleProblem),
            _ => None,
        }
    }

    pub fn field(s: Subject) -> Option<TemplateId> {
        match s {
            Subject::Definition => Some(TemplateId::FieldDefinition),
            Subject::Theorem => Some(TemplateId::FieldTheorem),
            Subject::Problem => Some(TemplateId::FieldProblem),
            _ => None,
        }
    }

    pub fn bodylist(s: Subject) -> Option<TemplateId> {
        match s {
            Subject::Definition => Some(TemplateId::BodylistDefinition),
            Subject::Theorem => Some(TemplateId::BodylistTheorem),
            Subject::Proof => Some(TemplateId::BodylistProof),
            _ => None,
        }
    }

    pub fn refs(s: Subject) -> Option<TemplateId> {
        match s {
            Subject::Problem => Some(TemplateId::RefsProblem),
            Subject::Solution => Some(TemplateId::RefsSolution),
            _ => None,
        }
    }

    pub fn tactics(s: Subject) -> TemplateId {
        match s {
            Subject::Definition => TemplateId::TacticsDefinition,
            Subject::Theorem => TemplateId::TacticsTheorem,
            Subject::Proof => TemplateId::TacticsProof,
            Subject::Problem => TemplateId::TacticsProblem,
            Subject::Solution => TemplateId::TacticsSolution,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::TitleDefinition => "title_definition",
            TemplateId::TitleTheorem => "title_theorem",
            TemplateId::TitleProblem => "title_problem",
            TemplateId::FieldDefinition => "field_definition",
            TemplateId::FieldTheorem => "field_theorem",
            TemplateId::FieldProblem => "field_problem",
            TemplateId::BodylistDefinition => "bodylist_definition",
            TemplateId::BodylistTheorem => "bodylist_theorem",
            TemplateId::BodylistProof => "bodylist_proof",
            TemplateId::RefsProblem => "refs_problem",
            TemplateId::RefsSolution => "refs_solution",
            TemplateId::TacticsDefinition => "tactics_definition",
            TemplateId::TacticsTheorem => "tactics_theorem",
            TemplateId::TacticsProof => "tactics_proof",
            TemplateId::TacticsProblem => "tactics_problem",
            TemplateId::TacticsSolution => "tactics_solution",
            TemplateId::FusionStep4 => "fusion_step4",
            TemplateId::FusionStep5 => "fusion_step5",
            TemplateId::CompletionKnowledgePoints => "completion_knowledge_points",
            TemplateId::CompletionClassify => "completion_classify",
            TemplateId::CompletionAnswer => "completion_answer",
            TemplateId::CompletionCalibrate => "completion_calibrate",
        }
    }

    fn subject(self) -> Option<Subject> {
        use TemplateId::*;
        Some(match self {
            TitleDefinition | FieldDefinition | BodylistDefinition | TacticsDefinition => Subject::Definition,
            TitleTheorem | FieldTheorem | BodylistTheorem | TacticsTheorem => Subject::Theorem,
            TitleProblem | FieldProblem | RefsProblem | TacticsProblem => Subject::Problem,
            BodylistProof | TacticsProof => Subject::Proof,
            RefsSolution | TacticsSolution => Subject::Solution,
            _ => return None,
        })
    }

    /// Context sections the template cannot be rendered without.
    pub fn required_sections(self) -> &'static [&'static str] {
        use TemplateId::*;
        match self {
            TitleDefinition | TitleTheorem | TitleProblem | FieldDefinition | FieldTheorem
            | FieldProblem => &["Content"],
            BodylistDefinition | BodylistTheorem | BodylistProof | RefsProblem | RefsSolution => {
                &["Content list"]
            }
            TacticsDefinition | TacticsTheorem | TacticsProof | TacticsProblem | TacticsSolution => {
                &["Content list", "References"]
            }
            FusionStep4 => &["First", "Second"],
            FusionStep5 => &["New", "Candidates"],
            CompletionKnowledgePoints | CompletionClassify => &["Problem"],
            CompletionAnswer => &["Problem", "Category", "Knowledge"],
            CompletionCalibrate => &["Problem", "Answer", "Violations"],
        }
    }

    /// Instruction text. `kind` names the compared entity kind for the
    /// fusion templates and is ignored elsewhere.
    pub fn instruction(self, kind: &str) -> String {
        use TemplateId::*;
        let s = self.subject().map(Subject::phrase).unwrap_or("");
        match self {
            TitleDefinition | TitleTheorem | TitleProblem => format!(
                "Your task is to generate a title that can summarize the content of the given math {s}."
            ),
            FieldDefinition | FieldTheorem | FieldProblem => format!(
                "Your task is to identify the most relevant mathematical field for the given math {s} from the following choices: {FIELD_CHOICES}. Choose one from them."
            ),
            BodylistDefinition | BodylistTheorem | BodylistProof => format!(
                "Your task is to label each element in the given content list of a math {s}, in order to determine the role of each element. The labels of mathematical roles are: {ROLE_LABELS}. Choose only the most relative one from them when you label."
            ),
            RefsProblem | RefsSolution => format!(
                "Your task is to identify the mathematical definitions or theorems referenced in the given math {s}. When there is at least one reference, output each reference in the following format: \"definition:\" or \"theorem:\" along with the original reference. When there is no reference, output an empty list."
            ),
            TacticsDefinition | TacticsTheorem | TacticsProof | TacticsProblem | TacticsSolution => format!(
                "Your task is to label each reference shown in the given content list of a math {s}, in order to determine the roles of each reference. The labels of mathematical roles are: {ROLE_LABELS}. Choose only the most relative one from them when you label."
            ),
            FusionStep4 => format!(
                "Your task is to decide if the first math {kind} mean the same thing as the second {kind}. If they have the same meaning, you should answer \"yes\". Otherwise, you answer \"no\"."
            ),
            FusionStep5 => format!(
                "Your task is to decide which of the candidate {kind}s mean the same thing as the new {kind}. You should choose one candidate and output its id number as your answer."
            ),
            CompletionKnowledgePoints => "List the definitions and theorems needed to solve the given math problem, one per line, each written as \"definition: name\" or \"theorem: name\".".into(),
            CompletionClassify => "Decide which kind of math problem is given. Answer with exactly one of \"application\", \"calculation\", \"proof\".".into(),
            CompletionAnswer => "Solve the given math problem step by step. Use the provided knowledge where it helps and finish with an explicit final statement of the result.".into(),
            CompletionCalibrate => "The answer below violates the listed principles. Rewrite the answer so that it satisfies all of them.".into(),
        }
    }

    /// One-line output format description, also used as the retry reminder.
    pub fn format_hint(self) -> &'static str {
        use TemplateId::*;
        match self {
            TitleDefinition | TitleTheorem | TitleProblem => "Output only the title on one line.",
            FieldDefinition | FieldTheorem | FieldProblem => "Output only one of the listed fields.",
            BodylistDefinition | BodylistTheorem | BodylistProof => {
                "Output a JSON list of objects with keys \"description\" and \"action\"."
            }
            RefsProblem | RefsSolution => {
                "Output one reference per line as \"definition: name\" or \"theorem: name\", or [] if there is none."
            }
            TacticsDefinition | TacticsTheorem | TacticsProof | TacticsProblem | TacticsSolution => {
                "Output a JSON object mapping each reference to its label."
            }
            FusionStep4 => "Answer only \"yes\" or \"no\".",
            FusionStep5 => "Output only the id number of the chosen candidate.",
            CompletionKnowledgePoints => "Output one \"definition: name\" or \"theorem: name\" per line.",
            CompletionClassify => "Answer only \"application\", \"calculation\" or \"proof\".",
            CompletionAnswer | CompletionCalibrate => "Output the full answer text.",
        }
    }
}

impl std::fmt::Display for TemplateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Named context sections plus the kind word used by the fusion templates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemplateContext {
    pub kind: Option<String>,
    sections: Vec<(String, String)>,
}

impl TemplateContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_kind(mut self, kind: impl Into<String>) -> Self {
        self.kind = Some(kind.into());
        self
    }

    pub fn section(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.sections.push((name.into(), value.into()));
        self
    }

    /// A list value serialized as a JSON array of strings.
    pub fn list_section(self, name: impl Into<String>, items: &[String]) -> Self {
        let value = serde_json::to_string(items).expect("string list serializes");
        self.section(name, value)
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub template: TemplateId,
    pub rendered: String,
    /// Hex SHA-256 over the template id and context, for mock keying.
    pub context_digest: String,
}

impl Prompt {
    /// The same prompt with a format reminder line appended.
    pub fn with_reminder(&self) -> Prompt {
        Prompt {
            rendered: format!("{}\n\nReminder: {}", self.rendered, self.template.format_hint()),
            ..self.clone()
        }
    }
}

pub fn render_template(id: TemplateId, ctx: &TemplateContext) -> Result<Prompt, LlmError> {
    for &name in id.required_sections() {
        match ctx.get(name) {
            Some(v) if !v.trim().is_empty() && v.trim() != "[]" => {}
            _ => return Err(LlmError::MissingContext(name.to_string())),
        }
    }
    let kind = ctx.kind.as_deref().unwrap_or("theorem");
    let mut rendered = id.instruction(kind);
    let mut hasher = Sha256::new();
    hasher.update(id.as_str().as_bytes());
    hasher.update([0]);
    hasher.update(kind.as_bytes());
    for (name, value) in &ctx.sections {
        rendered.push_str(&format!("\n\n### {name}\n{value}"));
        hasher.update([0]);
        hasher.update(name.as_bytes());
        hasher.update([0]);
        hasher.update(value.as_bytes());
    }
    rendered.push_str(&format!("\n\n### Output format\n{}", id.format_hint()));
    Ok(Prompt {
        template: id,
        rendered,
        context_digest: hex::encode(hasher.finalize()),
    })
}
