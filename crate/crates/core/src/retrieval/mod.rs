//! Clip embedding storage and cosine-similarity retrieval.
//!
//! Vectors are L2-normalized at insert time so cosine similarity is a plain
//! dot product. [`IvfIndex`] partitions them with k-means and scans only the
//! `nprobe` nearest cells; [`exact_search`] is the linear-scan reference.

mod encoder;
mod format;
mod ivf;

use std::cmp::Ordering;
use std::collections::HashSet;
use std::io;

use serde::Serialize;
use thiserror::Error;

pub use encoder::{stub_encode, HashingEncoder, TextEncoder};
pub use format::{read_embeddings, read_index, write_embeddings, write_index};
pub use ivf::{default_nlist, default_nprobe, IvfIndex, KMEANS_MAX_ITERS, KMEANS_TOLERANCE};

pub const DEFAULT_DIM: usize = 128;

/// Allowed deviation of a stored vector's norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("empty input")]
    EmptyInput,
    #[error("vector has zero (or non-finite) norm")]
    DegenerateEmbedding,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("nlist {nlist} exceeds corpus size {count}")]
    TooManyLists { nlist: usize, count: usize },
    #[error("nlist must be at least 1")]
    ZeroLists,
    #[error("duplicate clip id `{0}`")]
    DuplicateId(String),
    #[error("nprobe {nprobe} outside [1, {nlist}]")]
    InvalidNprobe { nprobe: usize, nlist: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("clip ids must be non-empty and at most 65535 bytes")]
    InvalidId,
    #[error("vector for `{0}` is not unit length")]
    NotNormalized(String),
    #[error("snapshot: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// L2-normalizes `v` in f64 and rounds back to f32.
pub fn normalize(v: &[f32]) -> Result<Vec<f32>, RetrievalError> {
    if v.is_empty() {
        return Err(RetrievalError::EmptyInput);
    }
    let norm = v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(RetrievalError::DegenerateEmbedding);
    }
    Ok(v.iter().map(|&x| ((x as f64) / norm) as f32).collect())
}

pub fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

/// Dot product accumulated in f64.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

pub(crate) fn cosine(a: &[f32], b: &[f32]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipEmbedding {
    clip_id: String,
    vector: Vec<f32>,
}

impl ClipEmbedding {
    /// Normalizes `vector` before storing it.
    pub fn new(clip_id: impl Into<String>, vector: &[f32]) -> Result<Self, RetrievalError> {
        let clip_id = clip_id.into();
        check_id(&clip_id)?;
        Ok(Self {
            clip_id,
            vector: normalize(vector)?,
        })
    }

    /// Accepts an already-normalized vector verbatim.
    pub fn from_normalized(clip_id: impl Into<String>, vector: Vec<f32>) -> Result<Self, RetrievalError> {
        let clip_id = clip_id.into();
        check_id(&clip_id)?;
        if vector.is_empty() {
            return Err(RetrievalError::EmptyInput);
        }
        if (l2_norm(&vector) - 1.0).abs() >= NORM_TOLERANCE {
            return Err(RetrievalError::NotNormalized(clip_id));
        }
        Ok(Self { clip_id, vector })
    }

    pub fn clip_id(&self) -> &str {
        &self.clip_id
    }

    pub fn vector(&self) -> &[f32] {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

fn check_id(id: &str) -> Result<(), RetrievalError> {
    if id.is_empty() || id.len() > u16::MAX as usize {
        return Err(RetrievalError::InvalidId);
    }
    Ok(())
}

pub(crate) fn check_corpus(embeddings: &[ClipEmbedding]) -> Result<usize, RetrievalError> {
    let dim = embeddings.first().ok_or(RetrievalError::EmptyInput)?.dim();
    let mut seen = HashSet::with_capacity(embeddings.len());
    for e in embeddings {
        if e.dim() != dim {
            return Err(RetrievalError::DimensionMismatch {
                expected: dim,
                got: e.dim(),
            });
        }
        if !seen.insert(e.clip_id.as_str()) {
            return Err(RetrievalError::DuplicateId(e.clip_id.clone()));
        }
    }
    Ok(dim)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hit {
    #[serde(rename = "id")]
    pub clip_id: String,
    #[serde(rename = "score")]
    pub similarity: f64,
}

/// Hits ordered by descending similarity, ties by ascending clip id.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(transparent)]
pub struct SearchResult {
    pub hits: Vec<Hit>,
}

impl SearchResult {
    pub fn ids(&self) -> Vec<&str> {
        self.hits.iter().map(|h| h.clip_id.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

pub(crate) fn rank_order(a: &(f64, &str), b: &(f64, &str)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

/// Keeps the best `k` of `candidates` under the (-similarity, id) order.
pub(crate) fn top_k(mut candidates: Vec<(f64, &str)>, k: usize) -> SearchResult {
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, rank_order);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(rank_order);
    SearchResult {
        hits: candidates
            .into_iter()
            .map(|(s, id)| Hit {
                clip_id: id.to_string(),
                similarity: s,
            })
            .collect(),
    }
}

/// Linear scan over every embedding.
pub fn exact_search(embeddings: &[ClipEmbedding], query: &[f32], k: usize) -> Result<SearchResult, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    if embeddings.is_empty() {
        return Ok(SearchResult::default());
    }
    let q = normalize(query)?;
    let mut candidates = Vec::with_capacity(embeddings.len());
    for e in embeddings {
        if e.dim() != q.len() {
            return Err(RetrievalError::DimensionMismatch {
                expected: e.dim(),
                got: q.len(),
            });
        }
        candidates.push((cosine(&e.vector, &q), e.clip_id.as_str()));
    }
    Ok(top_k(candidates, k))
}

/// Mean per-query overlap between IVF and exact top-k.
///
/// The denominator is `min(k, corpus size)` so an exhaustive probe scores 1.0
/// even on corpora smaller than `k`.
pub fn recall_at_k(
    index: &IvfIndex,
    corpus: &[ClipEmbedding],
    queries: &[Vec<f32>],
    k: usize,
    nprobe: usize,
) -> Result<f64, RetrievalError> {
    if corpus.is_empty() || queries.is_empty() {
        return Err(RetrievalError::EmptyInput);
    }
    let mut total = 0.0;
    for q in queries {
        let exact = exact_search(corpus, q, k)?;
        let approx = index.search(q, k, nprobe)?;
        let truth: HashSet<&str> = exact.hits.iter().map(|h| h.clip_id.as_str()).collect();
        let found = approx
            .hits
            .iter()
            .filter(|h| truth.contains(h.clip_id.as_str()))
            .count();
        total += found as f64 / k.min(corpus.len()) as f64;
    }
    Ok(total / queries.len() as f64)
}

/// Mean of per-frame vectors, L2-normalized.
pub fn temporal_average_pool(frames: &[Vec<f32>]) -> Result<Vec<f32>, RetrievalError> {
    let dim = frames.first().ok_or(RetrievalError::EmptyInput)?.len();
    if dim == 0 {
        return Err(RetrievalError::EmptyInput);
    }
    let mut sum = vec![0.0f64; dim];
    for f in frames {
        if f.len() != dim {
            return Err(RetrievalError::DimensionMismatch {
                expected: dim,
                got: f.len(),
            });
        }
        for (s, &x) in sum.iter_mut().zip(f) {
            *s += x as f64;
        }
    }
    let n = frames.len() as f64;
    let norm = sum.iter().map(|s| (s / n) * (s / n)).sum::<f64>().sqrt();
    if !norm.is_finite() || norm < 1e-12 {
        return Err(RetrievalError::DegenerateEmbedding);
    }
    Ok(sum.iter().map(|s| (s / n / norm) as f32).collect())
}
