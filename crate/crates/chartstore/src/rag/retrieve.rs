//! Dense retrieval with document-level aggregation.
//!
//! The top `3k` chunks by cosine distance are grouped by source document,
//! documents are ranked by a composite key (best chunk distance, supporting
//! chunk count, mean top-3 distance), and the top `k` documents win. The
//! flat variant scopes candidates to the resolved patient; the filtered
//! variant (RAG-AF) narrows further to admissions named in the query text,
//! falling back to the patient scope when none are named.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use regex::Regex;

use super::embed::{cosine_distance_sparse, sparsify, Embedder};
use super::index::ChunkIndex;
use super::RagError;
use crate::retrieval::{resolve_patient, Query};
use crate::store::NodePath;

/// Document ranking key. Ordering: ascending best distance, then descending
/// support count, then ascending mean top-3 distance.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeKey {
    pub best_distance: f64,
    pub support_count: usize,
    pub mean_top3: f64,
}

impl CompositeKey {
    pub fn compare(&self, other: &Self) -> Ordering {
        self.best_distance
            .total_cmp(&other.best_distance)
            .then_with(|| other.support_count.cmp(&self.support_count))
            .then_with(|| self.mean_top3.total_cmp(&other.mean_top3))
    }

    fn from_distances(distances: &[f64]) -> Self {
        let mut sorted = distances.to_vec();
        sorted.sort_by(f64::total_cmp);
        let top3 = &sorted[..sorted.len().min(3)];
        CompositeKey {
            best_distance: sorted[0],
            support_count: sorted.len(),
            mean_top3: top3.iter().sum::<f64>() / top3.len() as f64,
        }
    }
}

/// A ranked document with its key, mostly for inspection and tests.
#[derive(Debug, Clone)]
pub struct RankedDoc {
    pub doc: NodePath,
    pub key: CompositeKey,
}

fn rank_documents(
    query_text: &str,
    pool: &[usize],
    k: usize,
    index: &ChunkIndex,
    embedder: &dyn Embedder,
) -> Result<Vec<RankedDoc>, RagError> {
    if k == 0 {
        return Err(RagError::InvalidK);
    }
    if index.is_empty() {
        return Err(RagError::EmptyIndex);
    }
    let query_vec = sparsify(&embedder.embed(query_text));

    // Nearest 3k candidate chunks (the whole pool when smaller).
    let mut scored: Vec<(f64, usize)> = pool
        .iter()
        .map(|&i| (cosine_distance_sparse(&query_vec, index.vector(i)), i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    scored.truncate(3 * k);

    // Group by source document.
    let mut per_doc: BTreeMap<NodePath, Vec<f64>> = BTreeMap::new();
    for (dist, i) in &scored {
        per_doc.entry(index.chunk(*i).source.clone()).or_default().push(*dist);
    }
    let mut ranked: Vec<RankedDoc> = per_doc
        .into_iter()
        .map(|(doc, dists)| RankedDoc { key: CompositeKey::from_distances(&dists), doc })
        .collect();
    // Composite key, final tiebreak lexicographic by path (BTreeMap already
    // yields paths in order, and the sort is stable).
    ranked.sort_by(|a, b| a.key.compare(&b.key));
    ranked.truncate(k);
    Ok(ranked)
}

/// Flat dense retrieval over the resolved patient's documents.
pub fn retrieve_flat(
    query: &Query,
    k: usize,
    index: &ChunkIndex,
    embedder: &dyn Embedder,
) -> Result<Vec<NodePath>, RagError> {
    let pool = match resolve_patient(query) {
        Ok(patient) => index.patient_pool(&patient).to_vec(),
        Err(_) => index.full_pool(),
    };
    Ok(rank_documents(&query.text, &pool, k, index, embedder)?
        .into_iter()
        .map(|r| r.doc)
        .collect())
}

/// Admission identifiers named in a query text, in order of appearance.
pub fn admission_filters(text: &str) -> Vec<String> {
    let re = Regex::new(r"\bhadm_\d+\b").expect("static regex");
    let mut out: Vec<String> = Vec::new();
    for m in re.find_iter(text) {
        let id = m.as_str().to_string();
        if !out.contains(&id) {
            out.push(id);
        }
    }
    out
}

/// Metadata-filtered dense retrieval: candidates restricted to admissions
/// named in the query, else the patient scope (identical to flat).
pub fn retrieve_filtered(
    query: &Query,
    k: usize,
    index: &ChunkIndex,
    embedder: &dyn Embedder,
) -> Result<Vec<NodePath>, RagError> {
    let admissions = admission_filters(&query.text);
    if admissions.is_empty() {
        return retrieve_flat(query, k, index, embedder);
    }
    let mut pool: Vec<usize> = Vec::new();
    for adm in &admissions {
        pool.extend_from_slice(index.admission_pool(adm));
    }
    pool.sort_unstable();
    pool.dedup();
    Ok(rank_documents(&query.text, &pool, k, index, embedder)?
        .into_iter()
        .map(|r| r.doc)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composite_key_ordering() {
        let a = CompositeKey { best_distance: 0.1, support_count: 1, mean_top3: 0.1 };
        let b = CompositeKey { best_distance: 0.2, support_count: 5, mean_top3: 0.2 };
        assert_eq!(a.compare(&b), Ordering::Less);

        let c = CompositeKey { best_distance: 0.1, support_count: 3, mean_top3: 0.3 };
        assert_eq!(c.compare(&a), Ordering::Less, "more support wins at equal best");

        let d = CompositeKey { best_distance: 0.1, support_count: 3, mean_top3: 0.2 };
        assert_eq!(d.compare(&c), Ordering::Less, "lower mean top-3 breaks the tie");
    }

    #[test]
    fn key_from_distances() {
        let k = CompositeKey::from_distances(&[0.5, 0.2, 0.9, 0.4]);
        assert_eq!(k.best_distance, 0.2);
        assert_eq!(k.support_count, 4);
        assert!((k.mean_top3 - (0.2 + 0.4 + 0.5) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn admission_filter_extraction() {
        let ids = admission_filters("compare hadm_123 with hadm_456 and hadm_123 again");
        assert_eq!(ids, vec!["hadm_123".to_string(), "hadm_456".to_string()]);
        assert!(admission_filters("no ids").is_empty());
    }
}
