//! HTTP client for a completion service speaking
//! `POST /v1/complete {"prompt", "max_tokens", "temperature", "seed"} -> {"text"}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{CompletionParams, LlmBackend, LlmError, Prompt};

#[derive(Serialize)]
struct Request<'a> {
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
    seed: u64,
}

#[derive(Deserialize)]
struct Response {
    text: String,
}

pub struct RemoteLlmBackend {
    url: String,
    client: reqwest::blocking::Client,
}

impl RemoteLlmBackend {
    pub fn new(base_url: &str, timeout: Duration) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::BackendUnavailable(e.to_string()))?;
        Ok(RemoteLlmBackend {
            url: format!("{}/v1/complete", base_url.trim_end_matches('/')),
            client,
        })
    }
}

impl LlmBackend for RemoteLlmBackend {
    fn complete(&self, prompt: &Prompt, params: &CompletionParams) -> Result<String, LlmError> {
        let body = Request {
            prompt: &prompt.rendered,
            max_tokens: params.max_tokens,
            temperature: params.temperature,
            seed: params.seed,
        };
        let resp = self
            .client
            .post(&self.url)
            .json(&body)
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| LlmError::BackendUnavailable(e.to_string()))?;
        let parsed: Response = resp
            .json()
            .map_err(|e| LlmError::BackendUnavailable(format!("bad response body: {e}")))?;
        Ok(parsed.text)
    }
}
