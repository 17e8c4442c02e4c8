//! Child selectors: the pluggable decision step of manifest navigation.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{Query, RetrievalTrace};
use crate::manifest::ManifestEntry;
use crate::store::NodePath;
use crate::text;

#[derive(Debug, Error)]
pub enum SelectorError {
    #[error("selector failure: {0}")]
    Failure(String),
}

/// Outcome of one selection call.
#[derive(Debug, Clone, Default)]
pub struct Selection {
    /// Child names to open; must be a subset of the entries shown.
    pub chosen: Vec<String>,
    /// Optional early-stop signal: the selector judges the context already
    /// collected sufficient. The built-in selectors never set it.
    pub stop: bool,
}

impl Selection {
    pub fn of(chosen: Vec<String>) -> Self {
        Selection { chosen, stop: false }
    }
}

/// Picks which children of a manifest to descend into.
pub trait Selector: Sync {
    fn select(
        &self,
        query: &Query,
        node: &NodePath,
        entries: &[ManifestEntry],
        level: usize,
    ) -> Result<Selection, SelectorError>;

    fn name(&self) -> &str {
        "selector"
    }
}

/// Deterministic default: weighted token overlap between the query and each
/// entry's Child/Type/Date/Scope cells (weights 3/2/2/1). Entries scoring at
/// least `max(1, 0.5 * top)` are kept, ties included.
#[derive(Debug, Clone, Default)]
pub struct LexicalSelector;

impl LexicalSelector {
    fn score(query_tokens: &BTreeSet<String>, entry: &ManifestEntry) -> f64 {
        let overlap = |field: &str| -> f64 {
            text::signal_tokens(field)
                .intersection(query_tokens)
                .count() as f64
        };
        3.0 * overlap(&entry.child)
            + 2.0 * overlap(&entry.doc_type_or_kind)
            + 2.0 * overlap(&entry.date)
            + overlap(&entry.scope)
    }
}

impl Selector for LexicalSelector {
    fn select(
        &self,
        query: &Query,
        _node: &NodePath,
        entries: &[ManifestEntry],
        _level: usize,
    ) -> Result<Selection, SelectorError> {
        let query_tokens = text::signal_tokens(&query.text);
        let scores: Vec<f64> = entries.iter().map(|e| Self::score(&query_tokens, e)).collect();
        let top = scores.iter().cloned().fold(0.0_f64, f64::max);
        let threshold = (0.5 * top).max(1.0);
        let chosen = entries
            .iter()
            .zip(&scores)
            .filter(|(_, s)| **s >= threshold)
            .map(|(e, _)| e.child.clone())
            .collect();
        Ok(Selection::of(chosen))
    }

    fn name(&self) -> &str {
        "lexical"
    }
}

/// Test selector with perfect knowledge: selects exactly the children whose
/// subtree intersects the gold set.
#[derive(Debug, Clone)]
pub struct OracleSelector {
    gold: BTreeSet<NodePath>,
}

impl OracleSelector {
    pub fn new(gold: impl IntoIterator<Item = NodePath>) -> Self {
        OracleSelector { gold: gold.into_iter().collect() }
    }
}

impl Selector for OracleSelector {
    fn select(
        &self,
        _query: &Query,
        node: &NodePath,
        entries: &[ManifestEntry],
        _level: usize,
    ) -> Result<Selection, SelectorError> {
        let chosen = entries
            .iter()
            .filter(|e| {
                node.child(&e.child)
                    .map(|child| self.gold.iter().any(|g| child.contains(g)))
                    .unwrap_or(false)
            })
            .map(|e| e.child.clone())
            .collect();
        Ok(Selection::of(chosen))
    }

    fn name(&self) -> &str {
        "oracle"
    }
}

/// Scripted selector: fixed choices per node, for deterministic tests.
#[derive(Debug, Clone, Default)]
pub struct ScriptedSelector {
    choices: BTreeMap<NodePath, Vec<String>>,
}

impl ScriptedSelector {
    pub fn with_choice(mut self, node: NodePath, chosen: &[&str]) -> Self {
        self.choices.insert(node, chosen.iter().map(|s| s.to_string()).collect());
        self
    }
}

impl Selector for ScriptedSelector {
    fn select(
        &self,
        _query: &Query,
        node: &NodePath,
        entries: &[ManifestEntry],
        _level: usize,
    ) -> Result<Selection, SelectorError> {
        let wanted = self.choices.get(node).cloned().unwrap_or_default();
        let chosen = entries
            .iter()
            .filter(|e| wanted.contains(&e.child))
            .map(|e| e.child.clone())
            .collect();
        Ok(Selection::of(chosen))
    }

    fn name(&self) -> &str {
        "scripted"
    }
}

/// Replays the per-node decisions of a recorded trace.
#[derive(Debug, Clone)]
pub struct ReplaySelector {
    decisions: BTreeMap<NodePath, Vec<String>>,
}

impl ReplaySelector {
    pub fn from_trace(trace: &RetrievalTrace) -> Self {
        let decisions = trace
            .decisions
            .iter()
            .map(|d| (d.node.clone(), d.selected.clone()))
            .collect();
        ReplaySelector { decisions }
    }
}

impl Selector for ReplaySelector {
    fn select(
        &self,
        _query: &Query,
        node: &NodePath,
        entries: &[ManifestEntry],
        _level: usize,
    ) -> Result<Selection, SelectorError> {
        let wanted = self
            .decisions
            .get(node)
            .ok_or_else(|| SelectorError::Failure(format!("trace has no decision for {node}")))?;
        let chosen = entries
            .iter()
            .filter(|e| wanted.contains(&e.child))
            .map(|e| e.child.clone())
            .collect();
        Ok(Selection::of(chosen))
    }

    fn name(&self) -> &str {
        "replay"
    }
}

/// Selector that fails a fixed number of times before succeeding; exercises
/// the retry-once-then-fail contract.
#[derive(Debug)]
pub struct FlakySelector<S> {
    inner: S,
    failures_left: std::sync::Mutex<u32>,
}

impl<S> FlakySelector<S> {
    pub fn failing_times(inner: S, failures: u32) -> Self {
        FlakySelector { inner, failures_left: std::sync::Mutex::new(failures) }
    }
}

impl<S: Selector> Selector for FlakySelector<S> {
    fn select(
        &self,
        query: &Query,
        node: &NodePath,
        entries: &[ManifestEntry],
        level: usize,
    ) -> Result<Selection, SelectorError> {
        let mut left = self.failures_left.lock().unwrap();
        if *left > 0 {
            *left -= 1;
            return Err(SelectorError::Failure("injected".into()));
        }
        self.inner.select(query, node, entries, level)
    }

    fn name(&self) -> &str {
        "flaky"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(child: &str, kind: &str, date: &str, scope: &str) -> ManifestEntry {
        ManifestEntry::new(child, kind, date, scope).unwrap()
    }

    fn query(text: &str) -> Query {
        Query::new("q", text)
    }

    #[test]
    fn lexical_prefers_admission_named_in_query() {
        let entries = vec![
            entry("hadm_20298053", "admission", "2110-03-01", "6 documents: craniotomy"),
            entry("hadm_20946200", "admission", "2110-04-02", "5 documents: wound infection"),
        ];
        let q = query("what labs were drawn during hadm_20298053?");
        let sel = LexicalSelector
            .select(&q, &NodePath::patient("S10000001").unwrap(), &entries, 1)
            .unwrap();
        assert_eq!(sel.chosen, vec!["hadm_20298053".to_string()]);
    }

    #[test]
    fn lexical_empty_when_nothing_matches() {
        let entries = vec![entry("hadm_20000001", "admission", "2110-01-01", "routine visit")];
        let q = query("completely unrelated wording");
        let sel = LexicalSelector
            .select(&q, &NodePath::patient("S10000001").unwrap(), &entries, 1)
            .unwrap();
        assert!(sel.chosen.is_empty());
    }

    #[test]
    fn lexical_keeps_ties() {
        let entries = vec![
            entry("lab_chemistry.md", "lab chemistry", "2110-01-01", "creatinine trend"),
            entry("lab_hematology.md", "lab hematology", "2110-01-01", "creatinine mention"),
        ];
        let q = query("creatinine");
        let sel = LexicalSelector
            .select(&q, &NodePath::admission("S10000001", "hadm_20000001").unwrap(), &entries, 2)
            .unwrap();
        assert_eq!(sel.chosen.len(), 2);
    }

    #[test]
    fn oracle_selects_gold_ancestors_only() {
        let gold = [NodePath::leaf("S1", "hadm_2", "triage.md").unwrap()];
        let sel = OracleSelector::new(gold);
        let entries = vec![
            entry("hadm_2", "admission", "-", "x"),
            entry("hadm_3", "admission", "-", "y"),
        ];
        let out = sel
            .select(&query("q"), &NodePath::patient("S1").unwrap(), &entries, 1)
            .unwrap();
        assert_eq!(out.chosen, vec!["hadm_2".to_string()]);

        let docs = vec![entry("triage.md", "triage", "-", "x"), entry("diagnoses.md", "diagnoses", "-", "y")];
        let out = sel
            .select(&query("q"), &NodePath::admission("S1", "hadm_2").unwrap(), &docs, 2)
            .unwrap();
        assert_eq!(out.chosen, vec!["triage.md".to_string()]);
    }
}
