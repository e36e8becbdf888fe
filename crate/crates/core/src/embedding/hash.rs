//! Deterministic bag-of-words embedder used offline and in tests.
//!
//! Tokens are maximal runs of alphanumeric characters, lowercased. Each token
//! is hashed with 64-bit FNV-1a over its UTF-8 bytes; it adds +1 or -1 (minus
//! when bit 63 is set) at index `hash % 384`. The sum is L2-normalized.

use super::{normalize_in_place, Embedder, EmbeddingError, EmbeddingVector, DIM};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

pub fn hash_embed(text: &str) -> Result<EmbeddingVector, EmbeddingError> {
    let mut v = vec![0.0f64; DIM];
    for token in text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
        let h = fnv1a(token.to_lowercase().as_bytes());
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        v[(h % DIM as u64) as usize] += sign;
    }
    normalize_in_place(&mut v)?;
    EmbeddingVector::new(v)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HashEmbedder;

impl Embedder for HashEmbedder {
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        texts.iter().map(|t| hash_embed(t)).collect()
    }
}
