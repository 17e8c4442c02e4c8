//! Retrieval metrics engine.
//!
//! Precision = |R∩G|/|R| (0 for an empty retrieval), recall = |R∩G|/|G|,
//! perfect recall = G ⊆ R. Aggregates are macro-averages over queries.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::queries::BenchmarkQuery;
use super::systems::RetrievalSystem;
use crate::store::NodePath;

/// Aggregated metrics over a query set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub queries: usize,
    pub precision: f64,
    pub recall: f64,
    pub perfect_recall_count: usize,
    pub mean_docs_retrieved: f64,
}

/// One query's retrieval result against its gold set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalOutcome {
    pub query_id: String,
    pub tier: u8,
    pub retrieved: Vec<NodePath>,
    pub gold: BTreeSet<NodePath>,
    /// True when the system errored; scored as an empty retrieval.
    pub failed: bool,
}

impl RetrievalOutcome {
    pub fn precision(&self) -> f64 {
        let retrieved: BTreeSet<&NodePath> = self.retrieved.iter().collect();
        if retrieved.is_empty() {
            return 0.0;
        }
        let hits = self.gold.iter().filter(|g| retrieved.contains(g)).count();
        hits as f64 / retrieved.len() as f64
    }

    pub fn recall(&self) -> f64 {
        if self.gold.is_empty() {
            return 0.0;
        }
        let retrieved: BTreeSet<&NodePath> = self.retrieved.iter().collect();
        let hits = self.gold.iter().filter(|g| retrieved.contains(g)).count();
        hits as f64 / self.gold.len() as f64
    }

    pub fn perfect_recall(&self) -> bool {
        let retrieved: BTreeSet<&NodePath> = self.retrieved.iter().collect();
        self.gold.iter().all(|g| retrieved.contains(g))
    }
}

/// Macro-average a set of outcomes.
pub fn aggregate<'a>(outcomes: impl Iterator<Item = &'a RetrievalOutcome>) -> Metrics {
    let outcomes: Vec<&RetrievalOutcome> = outcomes.collect();
    let n = outcomes.len();
    if n == 0 {
        return Metrics::default();
    }
    let distinct_docs = |o: &RetrievalOutcome| o.retrieved.iter().collect::<BTreeSet<_>>().len();
    Metrics {
        queries: n,
        precision: outcomes.iter().map(|o| o.precision()).sum::<f64>() / n as f64,
        recall: outcomes.iter().map(|o| o.recall()).sum::<f64>() / n as f64,
        perfect_recall_count: outcomes.iter().filter(|o| o.perfect_recall()).count(),
        mean_docs_retrieved: outcomes.iter().map(|o| distinct_docs(o) as f64).sum::<f64>() / n as f64,
    }
}

/// Full evaluation result for one system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemReport {
    pub system: String,
    pub overall: Metrics,
    pub tiers: BTreeMap<u8, Metrics>,
    pub failed_queries: usize,
    pub outcomes: Vec<RetrievalOutcome>,
}

/// Run a system over the benchmark and aggregate per-tier and overall
/// metrics. Queries are independent; `parallel` runs them on worker threads.
pub fn evaluate(system: &dyn RetrievalSystem, queries: &[BenchmarkQuery], parallel: bool) -> SystemReport {
    let run_one = |q: &BenchmarkQuery| -> RetrievalOutcome {
        match system.retrieve(q) {
            Ok(retrieved) => RetrievalOutcome {
                query_id: q.query.id.clone(),
                tier: q.tier,
                retrieved,
                gold: q.gold.clone(),
                failed: false,
            },
            Err(_) => RetrievalOutcome {
                query_id: q.query.id.clone(),
                tier: q.tier,
                retrieved: Vec::new(),
                gold: q.gold.clone(),
                failed: true,
            },
        }
    };
    let outcomes: Vec<RetrievalOutcome> = if parallel {
        queries.par_iter().map(run_one).collect()
    } else {
        queries.iter().map(run_one).collect()
    };

    let mut tiers = BTreeMap::new();
    for tier in 1..=3u8 {
        let m = aggregate(outcomes.iter().filter(|o| o.tier == tier));
        if m.queries > 0 {
            tiers.insert(tier, m);
        }
    }
    SystemReport {
        system: system.name(),
        overall: aggregate(outcomes.iter()),
        tiers,
        failed_queries: outcomes.iter().filter(|o| o.failed).count(),
        outcomes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(p: &str) -> NodePath {
        NodePath::parse(p).unwrap()
    }

    fn outcome(retrieved: &[&str], gold: &[&str]) -> RetrievalOutcome {
        RetrievalOutcome {
            query_id: "q".into(),
            tier: 1,
            retrieved: retrieved.iter().map(|p| path(p)).collect(),
            gold: gold.iter().map(|p| path(p)).collect(),
            failed: false,
        }
    }

    #[test]
    fn exact_match_is_perfect() {
        let o = outcome(
            &["S1/hadm_1/a.md", "S1/hadm_1/b.md"],
            &["S1/hadm_1/a.md", "S1/hadm_1/b.md"],
        );
        assert_eq!(o.precision(), 1.0);
        assert_eq!(o.recall(), 1.0);
        assert!(o.perfect_recall());
    }

    #[test]
    fn empty_retrieval_scores_zero() {
        let o = outcome(&[], &["S1/hadm_1/a.md"]);
        assert_eq!(o.precision(), 0.0);
        assert_eq!(o.recall(), 0.0);
        assert!(!o.perfect_recall());
    }

    #[test]
    fn three_query_fixture_matches_hand_arithmetic() {
        // Hand-computed with independent set arithmetic before the engine
        // was written: P = (1/3 + 0 + 1)/3, R = (1/2 + 0 + 1)/3.
        let outcomes = vec![
            outcome(&["S1/hadm_1/a.md", "S1/hadm_1/b.md", "S1/hadm_1/c.md"], &["S1/hadm_1/a.md", "S1/hadm_1/d.md"]),
            outcome(&[], &["S1/hadm_1/x.md"]),
            outcome(&["S1/hadm_1/a.md", "S1/hadm_1/b.md"], &["S1/hadm_1/a.md", "S1/hadm_1/b.md"]),
        ];
        let m = aggregate(outcomes.iter());
        assert!((m.precision - 4.0 / 9.0).abs() < 1e-12);
        assert!((m.recall - 0.5).abs() < 1e-12);
        assert_eq!(m.perfect_recall_count, 1);
        assert!((m.mean_docs_retrieved - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_retrieved_paths_count_once() {
        let o = outcome(&["S1/hadm_1/a.md", "S1/hadm_1/a.md"], &["S1/hadm_1/a.md"]);
        assert_eq!(o.precision(), 1.0);
        let m = aggregate(std::iter::once(&o));
        assert_eq!(m.mean_docs_retrieved, 1.0);
    }
}
