//! Progressive-disclosure retrieval over the manifest tree.
//!
//! Navigation starts at the resolved patient's manifest and walks the tree
//! breadth-first: at each dequeued node the selector picks children; leaf
//! selections are loaded, internal selections below the depth bound are
//! enqueued, and internal selections at the bound are loaded as partial
//! context (their manifest text). Unselected subtrees are pruned without
//! being read, and every decision is recorded in an interpretable trace.

mod external;
mod selector;

pub use external::ExternalSelector;
pub use selector::{
    FlakySelector, LexicalSelector, OracleSelector, ReplaySelector, ScriptedSelector, Selection,
    Selector, SelectorError,
};

use std::collections::{BTreeSet, VecDeque};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::{read_manifest, ManifestError};
use crate::store::{logical_doc_name, DocStore, NodePath, Page, PathKind, StoreError};

/// Default depth bound; reaches leaf pages in the standard three-level tree.
pub const DEFAULT_DEPTH_LIMIT: usize = 3;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("query references no patient id")]
    NoPatient,
    #[error("query references multiple patients: {0:?}")]
    AmbiguousPatient(Vec<String>),
    #[error("patient {0} not found in store")]
    PatientNotFound(String),
    #[error("selector failed after retry: {0}")]
    SelectorFailure(String),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// A retrieval request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    /// Natural-language question.
    pub text: String,
    /// Structured patient field; wins over ids found in the text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_patient: Option<String>,
    /// Benchmark difficulty tier (1–3), when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier: Option<u8>,
    /// Depth bound L (≥ 1).
    pub depth_limit: usize,
}

impl Query {
    pub fn new(id: &str, text: &str) -> Self {
        Query {
            id: id.to_string(),
            text: text.to_string(),
            target_patient: None,
            tier: None,
            depth_limit: DEFAULT_DEPTH_LIMIT,
        }
    }

    pub fn with_target_patient(mut self, patient: &str) -> Self {
        self.target_patient = Some(patient.to_string());
        self
    }

    pub fn with_depth_limit(mut self, l: usize) -> Self {
        assert!(l >= 1, "depth limit must be at least 1");
        self.depth_limit = l;
        self
    }

    pub fn with_tier(mut self, tier: u8) -> Self {
        assert!((1..=3).contains(&tier), "tier must be 1, 2 or 3");
        self.tier = Some(tier);
        self
    }
}

/// Resolve the target patient deterministically — from the structured field
/// when present, otherwise from a unique `S<digits>` id in the query text.
/// No language-model call is involved.
pub fn resolve_patient(query: &Query) -> Result<String, RetrievalError> {
    if let Some(p) = &query.target_patient {
        return Ok(p.clone());
    }
    let re = Regex::new(r"\bS\d+\b").expect("static regex");
    let ids: Vec<String> = re.find_iter(&query.text).map(|m| m.as_str().to_string()).collect();
    let distinct: BTreeSet<String> = ids.iter().cloned().collect();
    match distinct.len() {
        0 => Err(RetrievalError::NoPatient),
        1 => Ok(ids.into_iter().next().expect("non-empty")),
        _ => Err(RetrievalError::AmbiguousPatient(distinct.into_iter().collect())),
    }
}

/// One navigation decision: the entries shown at a node and those selected.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelDecision {
    pub node: NodePath,
    pub shown: Vec<String>,
    pub selected: Vec<String>,
}

/// Interpretable record of one retrieval run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalTrace {
    pub selected_patient: String,
    pub decisions: Vec<LevelDecision>,
    /// Leaf paths loaded (partial-context loads excluded).
    pub retrieved: Vec<NodePath>,
    /// Subtree roots never read.
    pub pruned: Vec<NodePath>,
    /// Set when the patient-level selection came back empty.
    pub no_episode_selected: bool,
}

/// A page pulled into context.
#[derive(Debug, Clone)]
pub struct RetrievedPage {
    pub path: NodePath,
    /// True for depth-limit partial-context loads of internal nodes.
    pub partial: bool,
    pub content: String,
    /// The parsed page, for full leaf loads.
    pub page: Option<Page>,
}

/// Retrieval result: loaded pages plus the trace that produced them.
#[derive(Debug, Clone)]
pub struct RetrievedSet {
    pub pages: Vec<RetrievedPage>,
    pub trace: RetrievalTrace,
}

impl RetrievedSet {
    /// Paths of fully loaded leaf documents.
    pub fn leaf_paths(&self) -> Vec<NodePath> {
        self.pages.iter().filter(|p| !p.partial).map(|p| p.path.clone()).collect()
    }
}

fn select_with_retry(
    selector: &dyn Selector,
    query: &Query,
    node: &NodePath,
    entries: &[crate::manifest::ManifestEntry],
    level: usize,
) -> Result<Selection, RetrievalError> {
    match selector.select(query, node, entries, level) {
        Ok(s) => Ok(sanitize_selection(s, entries)),
        // One retry; a second failure marks the query failed rather than
        // silently returning an empty result.
        Err(_) => match selector.select(query, node, entries, level) {
            Ok(s) => Ok(sanitize_selection(s, entries)),
            Err(e) => Err(RetrievalError::SelectorFailure(e.to_string())),
        },
    }
}

/// Drop selector outputs that do not name a shown entry.
fn sanitize_selection(selection: Selection, entries: &[crate::manifest::ManifestEntry]) -> Selection {
    let valid: BTreeSet<&str> = entries.iter().map(|e| e.child.as_str()).collect();
    Selection {
        chosen: selection.chosen.into_iter().filter(|c| valid.contains(c.as_str())).collect(),
        stop: selection.stop,
    }
}

/// Progressive-disclosure retrieval with a depth bound.
pub fn progressive_disclosure(
    store: &DocStore,
    query: &Query,
    selector: &dyn Selector,
    depth_limit: usize,
) -> Result<RetrievedSet, RetrievalError> {
    let patient_id = resolve_patient(query)?;
    let patient = NodePath::patient(&patient_id)
        .map_err(|_| RetrievalError::PatientNotFound(patient_id.clone()))?;
    if store.list_children(&patient).is_err() {
        return Err(RetrievalError::PatientNotFound(patient_id));
    }

    let mut pages: Vec<RetrievedPage> = Vec::new();
    let mut decisions: Vec<LevelDecision> = Vec::new();
    let mut pruned: Vec<NodePath> = Vec::new();
    let mut no_episode_selected = false;

    let mut frontier: VecDeque<(NodePath, usize)> = VecDeque::new();
    frontier.push_back((patient.clone(), patient.depth()));

    while let Some((node, level)) = frontier.pop_front() {
        let manifest = read_manifest(store, &node)?;
        let selection = select_with_retry(selector, query, &node, &manifest.entries, level)?;
        let chosen: BTreeSet<&str> = selection.chosen.iter().map(|s| s.as_str()).collect();
        decisions.push(LevelDecision {
            node: node.clone(),
            shown: manifest.entries.iter().map(|e| e.child.clone()).collect(),
            selected: selection.chosen.clone(),
        });
        if node.kind() == PathKind::Patient && chosen.is_empty() {
            no_episode_selected = true;
        }
        for entry in &manifest.entries {
            let child = node.child(&entry.child).map_err(StoreError::from)?;
            if !chosen.contains(entry.child.as_str()) {
                pruned.push(child);
                continue;
            }
            if child.is_leaf() {
                let page = store.read_page(&child)?;
                pages.push(RetrievedPage {
                    path: child,
                    partial: false,
                    content: page.body.clone(),
                    page: Some(page),
                });
            } else if level < depth_limit {
                frontier.push_back((child, level + 1));
            } else {
                // Depth limit reached: load the node's own summary (its
                // manifest text) as partial context.
                let content = store.read_manifest_text(&child)?.unwrap_or_default();
                pages.push(RetrievedPage { path: child, partial: true, content, page: None });
            }
        }
        if selection.stop {
            // Early stop: whatever is still queued was never read.
            pruned.extend(frontier.drain(..).map(|(n, _)| n));
            break;
        }
    }

    let trace = RetrievalTrace {
        selected_patient: patient_id,
        decisions,
        retrieved: pages.iter().filter(|p| !p.partial).map(|p| p.path.clone()).collect(),
        pruned,
        no_episode_selected,
    };
    Ok(RetrievedSet { pages, trace })
}

/// Episode-selection-only mode: the selector picks admissions from the
/// patient manifest, then every leaf under each selected admission is
/// loaded with no document-level selection.
pub fn l1_only_mode(
    store: &DocStore,
    query: &Query,
    selector: &dyn Selector,
) -> Result<RetrievedSet, RetrievalError> {
    let patient_id = resolve_patient(query)?;
    let patient = NodePath::patient(&patient_id)
        .map_err(|_| RetrievalError::PatientNotFound(patient_id.clone()))?;
    if store.list_children(&patient).is_err() {
        return Err(RetrievalError::PatientNotFound(patient_id));
    }

    let manifest = read_manifest(store, &patient)?;
    let selection = select_with_retry(selector, query, &patient, &manifest.entries, patient.depth())?;
    let chosen: BTreeSet<&str> = selection.chosen.iter().map(|s| s.as_str()).collect();
    let decision = LevelDecision {
        node: patient.clone(),
        shown: manifest.entries.iter().map(|e| e.child.clone()).collect(),
        selected: selection.chosen.clone(),
    };

    let mut pages = Vec::new();
    let mut pruned = Vec::new();
    for entry in &manifest.entries {
        let child = patient.child(&entry.child).map_err(StoreError::from)?;
        if !chosen.contains(entry.child.as_str()) {
            pruned.push(child);
            continue;
        }
        for leaf in store.list_children(&child)? {
            let page = store.read_page(&leaf)?;
            pages.push(RetrievedPage {
                path: leaf,
                partial: false,
                content: page.body.clone(),
                page: Some(page),
            });
        }
    }

    let trace = RetrievalTrace {
        selected_patient: patient_id,
        no_episode_selected: chosen.is_empty(),
        decisions: vec![decision],
        retrieved: pages.iter().map(|p| p.path.clone()).collect(),
        pruned,
    };
    Ok(RetrievedSet { pages, trace })
}

/// Trace serialization in the shape of a navigation-trace table: selected
/// patient, selected admissions, selected documents, retrieved files, and
/// quality numbers when a gold set is known.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceReport {
    pub query: String,
    pub selected_patient: String,
    pub selected_admissions: Vec<String>,
    pub selected_documents: Vec<String>,
    pub retrieved_files: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub partial_context: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
}

impl TraceReport {
    pub fn new(query: &Query, result: &RetrievedSet, gold: Option<&BTreeSet<NodePath>>) -> Self {
        let trace = &result.trace;
        let selected_admissions = trace
            .decisions
            .iter()
            .filter(|d| d.node.kind() == PathKind::Patient)
            .flat_map(|d| d.selected.clone())
            .collect();
        let mut selected_documents: Vec<String> = Vec::new();
        for d in trace.decisions.iter().filter(|d| d.node.kind() == PathKind::Admission) {
            for name in &d.selected {
                let stem = name.strip_suffix(".md").unwrap_or(name).to_string();
                if !selected_documents.contains(&stem) {
                    selected_documents.push(stem);
                }
            }
        }
        let (precision, recall) = match gold {
            Some(gold) => {
                let retrieved: BTreeSet<&NodePath> = trace.retrieved.iter().collect();
                let hits = gold.iter().filter(|g| retrieved.contains(g)).count() as f64;
                let p = if retrieved.is_empty() { 0.0 } else { hits / retrieved.len() as f64 };
                let r = if gold.is_empty() { 0.0 } else { hits / gold.len() as f64 };
                (Some(p), Some(r))
            }
            None => (None, None),
        };
        TraceReport {
            query: query.text.clone(),
            selected_patient: trace.selected_patient.clone(),
            selected_admissions,
            selected_documents,
            retrieved_files: trace.retrieved.iter().map(|p| p.to_string()).collect(),
            partial_context: result
                .pages
                .iter()
                .filter(|p| p.partial)
                .map(|p| p.path.to_string())
                .collect(),
            precision,
            recall,
        }
    }
}

/// Check pruning soundness for one traced run: every probed read must be a
/// manifest on an explored path or a retrieved leaf, and nothing may fall
/// under a pruned subtree. Returns violations (empty = sound).
pub fn verify_pruning(trace: &RetrievalTrace, reads: &BTreeSet<String>) -> Vec<String> {
    let mut allowed: BTreeSet<String> = BTreeSet::new();
    for d in &trace.decisions {
        allowed.insert(manifest_rel_path(&d.node));
        // Depth-limit partial loads read the selected child's manifest.
        for sel in &d.selected {
            if let Ok(child) = d.node.child(sel) {
                if !child.is_leaf() {
                    allowed.insert(manifest_rel_path(&child));
                }
            }
        }
    }
    let retrieved_logical: BTreeSet<String> = trace.retrieved.iter().map(|p| p.to_string()).collect();

    let mut violations = Vec::new();
    for read in reads {
        let logical = logical_read_path(read);
        let ok = allowed.contains(read) || retrieved_logical.contains(&logical);
        if !ok {
            violations.push(format!("read outside explored region: {read}"));
        }
    }
    for p in &trace.pruned {
        let prefix = p.to_string();
        for read in reads {
            let under = read == &prefix
                || read.starts_with(&format!("{prefix}/"))
                || logical_read_path(read) == prefix;
            if under {
                violations.push(format!("read under pruned subtree {p}: {read}"));
            }
        }
    }
    violations
}

fn manifest_rel_path(node: &NodePath) -> String {
    if node.depth() == 0 {
        "manifest.md".to_string()
    } else {
        format!("{node}/manifest.md")
    }
}

/// Collapse a probed file path onto its logical document path.
fn logical_read_path(read: &str) -> String {
    match read.rsplit_once('/') {
        Some((dir, file)) => format!("{dir}/{}", logical_doc_name(file)),
        None => read.to_string(),
    }
}
