use super::{normalize, RetrievalError};
use crate::emotion::tokenize;

/// Maps text into the index's embedding space.
pub trait TextEncoder: Send + Sync {
    fn dim(&self) -> usize;
    fn encode(&self, text: &str) -> Result<Vec<f32>, RetrievalError>;
}

/// Deterministic signed feature hashing of word tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEncoder {
    dim: usize,
}

impl HashingEncoder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "encoder dimension must be positive");
        Self { dim }
    }
}

impl Default for HashingEncoder {
    fn default() -> Self {
        Self::new(super::DEFAULT_DIM)
    }
}

// 64-bit FNV-1a; stable across platforms and toolchains.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl TextEncoder for HashingEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Result<Vec<f32>, RetrievalError> {
        stub_encode(text, self.dim)
    }
}

pub fn stub_encode(text: &str, dim: usize) -> Result<Vec<f32>, RetrievalError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(RetrievalError::EmptyInput);
    }
    let mut v = vec![0.0f32; dim];
    for t in &tokens {
        let h = fnv1a(t.as_bytes());
        let bucket = (h % dim as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        v[bucket] += sign;
    }
    normalize(&v)
}
