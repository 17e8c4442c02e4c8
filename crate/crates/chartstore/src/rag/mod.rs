//! Dense-retrieval baselines: section-aware chunking, hashed bag-of-tokens
//! embeddings, and flat / metadata-filtered retrieval with document-level
//! aggregation.

mod chunk;
mod embed;
mod index;
mod retrieve;

pub use chunk::{chunk_document, Chunk, CHUNK_OVERLAP, CHUNK_TOKENS};
pub use embed::{cosine_distance_sparse, l2_normalize, sparsify, Embedder, HashingEmbedder, DEFAULT_DIMENSION};
pub use index::{build_index, ChunkIndex, IndexedChunk};
pub use retrieve::{admission_filters, retrieve_filtered, retrieve_flat, CompositeKey, RankedDoc};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RagError {
    #[error("k must be at least 1")]
    InvalidK,
    #[error("index holds no chunks")]
    EmptyIndex,
    #[error("embedder failure: {0}")]
    EmbedderFailure(String),
    #[error("bad index file: {0}")]
    BadIndexFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Store(#[from] Box<crate::store::StoreError>),
}
