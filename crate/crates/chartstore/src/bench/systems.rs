//! The retrieval systems the benchmark compares.

use super::queries::BenchmarkQuery;
use crate::rag::{retrieve_filtered, retrieve_flat, ChunkIndex, Embedder};
use crate::retrieval::{l1_only_mode, progressive_disclosure, OracleSelector, Selector};
use crate::store::{DocStore, NodePath};

/// A system under evaluation: query in, ranked document set out.
pub trait RetrievalSystem: Sync {
    fn name(&self) -> String;
    fn retrieve(&self, query: &BenchmarkQuery) -> Result<Vec<NodePath>, String>;
}

/// Manifest-guided navigation (episode + document selection, L1+L2).
pub struct ManifestSystem<'a> {
    pub store: &'a DocStore,
    pub selector: &'a dyn Selector,
    pub depth_limit: usize,
}

impl RetrievalSystem for ManifestSystem<'_> {
    fn name(&self) -> String {
        "manifest".into()
    }

    fn retrieve(&self, query: &BenchmarkQuery) -> Result<Vec<NodePath>, String> {
        progressive_disclosure(self.store, &query.query, self.selector, self.depth_limit)
            .map(|r| r.leaf_paths())
            .map_err(|e| e.to_string())
    }
}

/// Manifest navigation with episode selection only (L1): every document
/// under each selected admission is loaded.
pub struct ManifestL1System<'a> {
    pub store: &'a DocStore,
    pub selector: &'a dyn Selector,
}

impl RetrievalSystem for ManifestL1System<'_> {
    fn name(&self) -> String {
        "manifest-l1".into()
    }

    fn retrieve(&self, query: &BenchmarkQuery) -> Result<Vec<NodePath>, String> {
        l1_only_mode(self.store, &query.query, self.selector)
            .map(|r| r.leaf_paths())
            .map_err(|e| e.to_string())
    }
}

/// Manifest navigation driven by a per-query oracle selector (selects
/// exactly the children whose subtree intersects the gold set).
pub struct OracleManifestSystem<'a> {
    pub store: &'a DocStore,
    pub depth_limit: usize,
}

impl RetrievalSystem for OracleManifestSystem<'_> {
    fn name(&self) -> String {
        "manifest-oracle".into()
    }

    fn retrieve(&self, query: &BenchmarkQuery) -> Result<Vec<NodePath>, String> {
        let oracle = OracleSelector::new(query.gold.iter().cloned());
        progressive_disclosure(self.store, &query.query, &oracle, self.depth_limit)
            .map(|r| r.leaf_paths())
            .map_err(|e| e.to_string())
    }
}

/// Dense retrieval baselines; `filtered` adds admission-metadata filtering.
pub struct RagSystem<'a> {
    pub index: &'a ChunkIndex,
    pub embedder: &'a dyn Embedder,
    pub k: usize,
    pub filtered: bool,
}

impl RetrievalSystem for RagSystem<'_> {
    fn name(&self) -> String {
        if self.filtered {
            "rag-af".into()
        } else {
            "rag".into()
        }
    }

    fn retrieve(&self, query: &BenchmarkQuery) -> Result<Vec<NodePath>, String> {
        let run = if self.filtered { retrieve_filtered } else { retrieve_flat };
        run(&query.query, self.k, self.index, self.embedder).map_err(|e| e.to_string())
    }
}
