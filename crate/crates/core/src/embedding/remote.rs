//! HTTP client for an embedding service speaking
//! `POST /v1/embed {"texts": [...]} -> {"vectors": [[...], ...]}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Embedder, EmbeddingError, EmbeddingVector};

#[derive(Serialize)]
struct Request<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct Response {
    vectors: Vec<Vec<f64>>,
}

pub struct RemoteEmbedder {
    url: String,
    batch_size: usize,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(base_url: &str, timeout: Duration, batch_size: usize) -> Result<Self, EmbeddingError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EmbeddingError::BackendUnavailable(e.to_string()))?;
        Ok(RemoteEmbedder {
            url: format!("{}/v1/embed", base_url.trim_end_matches('/')),
            batch_size: batch_size.max(1),
            client,
        })
    }
}

impl Embedder for RemoteEmbedder {
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.batch_size) {
            let resp: Response = self
                .client
                .post(&self.url)
                .json(&Request { texts: batch })
                .send()
                .and_then(|r| r.error_for_status())
                .and_then(|r| r.json())
                .map_err(|e| EmbeddingError::BackendUnavailable(e.to_string()))?;
            if resp.vectors.len() != batch.len() {
                return Err(EmbeddingError::BackendUnavailable(format!(
                    "sent {} texts, got {} vectors",
                    batch.len(),
                    resp.vectors.len()
                )));
            }
            for v in resp.vectors {
                out.push(EmbeddingVector::new(v)?);
            }
        }
        Ok(out)
    }
}
