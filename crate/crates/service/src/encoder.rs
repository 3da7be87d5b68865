//! Remote text encoder adapter.
//!
//! Wire format: `POST <url>` with `{"text": "..."}`, answered by
//! `{"embedding": [d numbers]}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::scorer::{post_json, ScoreError};

#[derive(Serialize)]
struct EncodeRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct EncodeResponse {
    embedding: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct HttpEncoder {
    client: reqwest::Client,
    url: String,
    timeout: Duration,
}

impl HttpEncoder {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Result<Self, ScoreError> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ScoreError::Unavailable(e.to_string()))?;
        Ok(Self {
            client,
            url: url.into(),
            timeout,
        })
    }

    pub async fn encode(&self, text: &str, dim: usize) -> Result<Vec<f32>, ScoreError> {
        let body = post_json(&self.client, &self.url, &EncodeRequest { text }, self.timeout).await?;
        parse_embedding(&body, dim)
    }
}

fn parse_embedding(body: &[u8], dim: usize) -> Result<Vec<f32>, ScoreError> {
    let parsed: EncodeResponse =
        serde_json::from_slice(body).map_err(|e| ScoreError::MalformedPayload(e.to_string()))?;
    if parsed.embedding.len() != dim {
        return Err(ScoreError::MalformedPayload(format!(
            "expected {dim}-d embedding, got {}",
            parsed.embedding.len()
        )));
    }
    if parsed.embedding.iter().any(|v| !v.is_finite()) || parsed.embedding.iter().all(|&v| v == 0.0) {
        return Err(ScoreError::MalformedPayload("embedding is degenerate".into()));
    }
    Ok(parsed.embedding)
}
