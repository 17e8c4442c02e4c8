//! Embedding contract and the deterministic hashing embedder.

use crate::text::tokenize;

/// Text to fixed-length vector. Deterministic implementations must map the
/// same text to the identical vector.
pub trait Embedder: Sync {
    fn embed(&self, text: &str) -> Vec<f32>;
    fn dimension(&self) -> usize;
    /// Stable identifier persisted in index headers.
    fn id(&self) -> String;
}

/// Signed feature hashing over bag-of-tokens, L2-normalized.
///
/// FNV-1a picks the bucket from the low bits and the sign from the high
/// bit, so the embedding is a pure function of the token multiset — fully
/// reproducible offline with the same dimensionality as a typical
/// embedding service.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
}

/// Default dimensionality, matching common embedding-service vectors.
pub const DEFAULT_DIMENSION: usize = 1536;

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder { dim: DEFAULT_DIMENSION }
    }
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0);
        HashingEmbedder { dim }
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Embedder for HashingEmbedder {
    fn embed(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0.0f32; self.dim];
        for token in tokenize(text) {
            let h = fnv1a64(token.as_bytes());
            let idx = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[idx] += sign;
        }
        l2_normalize(&mut v);
        v
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn id(&self) -> String {
        format!("hash-bow-{}", self.dim)
    }
}

pub fn l2_normalize(v: &mut [f32]) {
    let norm = v.iter().map(|x| f64::from(*x) * f64::from(*x)).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x = (f64::from(*x) / norm) as f32;
        }
    }
}

/// Nonzero entries of a vector; queries hash to a handful of buckets, so
/// scoring against them is much cheaper than a dense dot product.
pub fn sparsify(v: &[f32]) -> Vec<(usize, f32)> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| **x != 0.0)
        .map(|(i, x)| (i, *x))
        .collect()
}

/// Cosine distance in [0, 2] between a sparse query and a normalized dense
/// vector.
pub fn cosine_distance_sparse(query: &[(usize, f32)], dense: &[f32]) -> f64 {
    let dot: f64 = query
        .iter()
        .map(|(i, q)| f64::from(*q) * f64::from(dense[*i]))
        .sum();
    1.0 - dot
}
