//! Offline backends for tests and reproducible runs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CompletionParams, LlmBackend, LlmError, Prompt, TemplateId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockFixture {
    /// Substring of the rendered prompt, or its exact context digest.
    #[serde(rename = "match")]
    pub matcher: String,
    pub response: String,
}

/// Answers with the response of the first fixture that matches the prompt,
/// or with the default response.
#[derive(Debug, Clone, Default)]
pub struct ScriptedMockBackend {
    pub fixtures: Vec<MockFixture>,
    pub default_response: String,
}

impl ScriptedMockBackend {
    pub fn new(default_response: impl Into<String>) -> Self {
        ScriptedMockBackend {
            fixtures: Vec::new(),
            default_response: default_response.into(),
        }
    }

    pub fn on(mut self, matcher: impl Into<String>, response: impl Into<String>) -> Self {
        self.fixtures.push(MockFixture {
            matcher: matcher.into(),
            response: response.into(),
        });
        self
    }

    /// Reads `{"match", "response"}` lines; blank lines are skipped.
    pub fn from_jsonl(text: &str, default_response: impl Into<String>) -> Result<Self, String> {
        let mut mock = Self::new(default_response);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: MockFixture =
                serde_json::from_str(line).map_err(|e| format!("fixture line {}: {e}", i + 1))?;
            mock.fixtures.push(f);
        }
        Ok(mock)
    }

    pub fn load(path: impl AsRef<Path>, default_response: impl Into<String>) -> Result<Self, String> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| e.to_string())?;
        Self::from_jsonl(&text, default_response)
    }

    pub fn respond(&self, prompt: &Prompt) -> &str {
        self.fixtures
            .iter()
            .find(|f| f.matcher == prompt.context_digest || prompt.rendered.contains(&f.matcher))
            .map(|f| f.response.as_str())
            .unwrap_or(&self.default_response)
    }
}

impl LlmBackend for ScriptedMockBackend {
    fn complete(&self, prompt: &Prompt, _params: &CompletionParams) -> Result<String, LlmError> {
        Ok(self.respond(prompt).to_string())
    }
}

/// A backend answering through a closure.
pub struct FnBackend<F>(pub F);

impl<F> LlmBackend for FnBackend<F>
where
    F: Fn(&Prompt) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, prompt: &Prompt, _params: &CompletionParams) -> Result<String, LlmError> {
        (self.0)(prompt)
    }
}

/// Answers fusion consistency prompts with "yes" exactly when both entity
/// summaries are identical, and defers every other prompt to `inner`.
pub struct EqualityJudge<B>(pub B);

fn section<'a>(rendered: &'a str, name: &str) -> Option<&'a str> {
    let start = rendered.find(&format!("### {name}\n"))? + name.len() + 5;
    let rest = &rendered[start..];
    Some(rest.find("\n\n### ").map_or(rest, |end| &rest[..end]))
}

impl<B: LlmBackend> LlmBackend for EqualityJudge<B> {
    fn complete(&self, prompt: &Prompt, params: &CompletionParams) -> Result<String, LlmError> {
        if prompt.template != TemplateId::FusionStep4 {
            return self.0.complete(prompt, params);
        }
        let same = section(&prompt.rendered, "First") == section(&prompt.rendered, "Second");
        Ok(if same { "yes" } else { "no" }.to_string())
    }
}
