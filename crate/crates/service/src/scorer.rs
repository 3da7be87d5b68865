//! Remote emotion classifier adapter.
//!
//! Wire format: `POST <url>` with `{"text": "..."}`, answered by
//! `{"scores": [27 numbers]}` in canonical label order.

use std::time::Duration;

use emoheal_core::emotion::{validate_vector, EmotionError, NUM_EMOTIONS};
use emoheal_core::EmotionVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_millis(2000);

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("scorer did not answer within {0:?}")]
    Timeout(Duration),
    #[error("scorer unavailable: {0}")]
    Unavailable(String),
    #[error("malformed scorer payload: {0}")]
    MalformedPayload(String),
    #[error("scorer returned an invalid vector: {0}")]
    OutOfRange(#[from] EmotionError),
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct HttpScorer {
    client: reqwest::Client,
    url: String,
    timeout: Duration,
}

impl HttpScorer {
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

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub async fn score(&self, text: &str) -> Result<EmotionVector, ScoreError> {
        let body = post_json(&self.client, &self.url, &ScoreRequest { text }, self.timeout).await?;
        parse_scores(&body)
    }
}

/// Scores `text` with the remote classifier behind `scorer`.
pub async fn external_score(text: &str, scorer: &HttpScorer) -> Result<EmotionVector, ScoreError> {
    scorer.score(text).await
}

pub(crate) fn classify(err: reqwest::Error, timeout: Duration) -> ScoreError {
    if err.is_timeout() {
        ScoreError::Timeout(timeout)
    } else if err.is_decode() {
        ScoreError::MalformedPayload(err.to_string())
    } else {
        ScoreError::Unavailable(err.to_string())
    }
}

/// Posts `body` and returns the raw response bytes of a 2xx answer.
pub(crate) async fn post_json<T: Serialize + ?Sized>(
    client: &reqwest::Client,
    url: &str,
    body: &T,
    timeout: Duration,
) -> Result<Vec<u8>, ScoreError> {
    let resp = client
        .post(url)
        .json(body)
        .send()
        .await
        .map_err(|e| classify(e, timeout))?;
    let status = resp.status();
    if !status.is_success() {
        return Err(ScoreError::Unavailable(format!("status {status}")));
    }
    let bytes = resp.bytes().await.map_err(|e| classify(e, timeout))?;
    Ok(bytes.to_vec())
}

fn parse_scores(body: &[u8]) -> Result<EmotionVector, ScoreError> {
    let parsed: ScoreResponse =
        serde_json::from_slice(body).map_err(|e| ScoreError::MalformedPayload(e.to_string()))?;
    if parsed.scores.len() != NUM_EMOTIONS {
        return Err(ScoreError::MalformedPayload(format!(
            "expected {NUM_EMOTIONS} scores, got {}",
            parsed.scores.len()
        )));
    }
    Ok(validate_vector(&parsed.scores)?)
}
