//! Prompt templates, the text-completion backend contract, response parsing,
//! and the augmentation pipeline built on them.

pub mod augment;
pub mod judge;
pub mod mock;
pub mod parse;
pub mod remote;
pub mod template;

use serde::{Deserialize, Serialize};

use crate::model::EntityId;

pub use augment::{augment_entity, augment_kg, AugmentConfig, AugmentFailure, AugmentReport, Augmented};
pub use judge::{entity_summary, judge_best_candidate, judge_consistency};
pub use mock::{EqualityJudge, FnBackend, MockFixture, ScriptedMockBackend};
pub use parse::Verdict;
pub use remote::RemoteLlmBackend;
pub use template::{render_template, Prompt, Subject, TemplateContext, TemplateId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("missing context `{0}`")]
    MissingContext(String),
    #[error("could not parse response: {0}")]
    ParseFailure(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("response names no single field: `{0}`")]
    AmbiguousField(String),
    #[error("undecidable response: `{0}`")]
    UndecidableResponse(String),
    #[error("id {0} is not among the candidates")]
    IdNotInCandidates(EntityId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionParams {
    pub max_tokens: u32,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for CompletionParams {
    fn default() -> Self {
        CompletionParams {
            max_tokens: 512,
            temperature: 0.0,
            seed: 0,
        }
    }
}

/// A text-completion service. Implementations must allow concurrent calls.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, prompt: &Prompt, params: &CompletionParams) -> Result<String, LlmError>;
}

impl<B: LlmBackend + ?Sized> LlmBackend for &B {
    fn complete(&self, prompt: &Prompt, params: &CompletionParams) -> Result<String, LlmError> {
        (**self).complete(prompt, params)
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for Box<B> {
    fn complete(&self, prompt: &Prompt, params: &CompletionParams) -> Result<String, LlmError> {
        (**self).complete(prompt, params)
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for std::sync::Arc<B> {
    fn complete(&self, prompt: &Prompt, params: &CompletionParams) -> Result<String, LlmError> {
        (**self).complete(prompt, params)
    }
}

pub const DEFAULT_RETRIES: u32 = 3;

/// Sends `prompt` and parses the answer, re-asking with a format reminder
/// until `attempts` tries are used. Backend failures are not retried.
pub fn ask<T>(
    backend: &dyn LlmBackend,
    prompt: &Prompt,
    params: &CompletionParams,
    attempts: u32,
    parse: impl Fn(&str) -> Result<T, LlmError>,
) -> Result<T, LlmError> {
    let mut last = LlmError::ParseFailure("no attempt made".into());
    for i in 0..attempts.max(1) {
        let p = if i == 0 { prompt.clone() } else { prompt.with_reminder() };
        let text = backend.complete(&p, params)?;
        match parse(&text) {
            Ok(v) => return Ok(v),
            Err(e) => {
                log::debug!("{} attempt {} rejected: {e}", prompt.template, i + 1);
                last = e;
            }
        }
    }
    Err(last)
}
