//! Command line front end, configuration, graph export and the HTTP
//! retrieval service for `mathkg-core`.

pub mod cli;
pub mod config;
pub mod service;
pub mod vis;

pub use cli::run;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("backend error: {0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Backend(_) => 3,
        }
    }
}

macro_rules! data_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_errors!(
    mathkg_core::store::StoreError,
    mathkg_core::index::IndexError,
    mathkg_core::ingest::IngestError,
    mathkg_core::eval::EvalError,
    mathkg_core::GraphError
);

impl From<mathkg_core::llm::LlmError> for CliError {
    fn from(e: mathkg_core::llm::LlmError) -> Self {
        match e {
            mathkg_core::llm::LlmError::BackendUnavailable(m) => CliError::Backend(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<mathkg_core::embedding::EmbeddingError> for CliError {
    fn from(e: mathkg_core::embedding::EmbeddingError) -> Self {
        match e {
            mathkg_core::embedding::EmbeddingError::BackendUnavailable(m) => CliError::Backend(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<mathkg_core::fusion::FusionError> for CliError {
    fn from(e: mathkg_core::fusion::FusionError) -> Self {
        match e {
            mathkg_core::fusion::FusionError::Embedding(e) => e.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<mathkg_core::completion::CompletionError> for CliError {
    fn from(e: mathkg_core::completion::CompletionError) -> Self {
        use mathkg_core::completion::CompletionError;
        match e {
            CompletionError::BackendUnavailable { .. } => CliError::Backend(e.to_string()),
            CompletionError::Llm(e) => e.into(),
            CompletionError::Embedding(e) => e.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}
