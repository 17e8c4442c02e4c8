//! Manifest generation and incremental maintenance.
//!
//! `rebuild_manifest` writes a node's manifest from the live page set.
//! `apply_mutation` is the incremental path: it rewrites the mutated
//! document's row in its admission manifest and propagates upward only
//! while the describer judges the change material, so the number of
//! manifests touched per mutation is bounded by the tree depth.

use std::collections::BTreeSet;

use super::describe::{AdmissionSummary, Describer, LeafExcerpt, PatientSummary, EXCERPT_CHARS};
use super::{read_manifest, Manifest, ManifestEntry, ManifestError};
use crate::store::{DocStore, DocType, MutationEvent, NodePath, PathKind};
use crate::text;

fn leaf_excerpt(store: &DocStore, leaf: &NodePath) -> Result<LeafExcerpt, ManifestError> {
    let page = store.read_page(leaf)?;
    Ok(LeafExcerpt {
        doc_type: page.provenance.doc_type.clone(),
        chart_time: page.provenance.chart_time.clone(),
        excerpt: text::truncate_chars(&page.body, EXCERPT_CHARS).to_string(),
    })
}

/// Parse up to three diagnosis bullets (`- <text>`) from a diagnoses page.
fn top_diagnoses(body: &str) -> Vec<String> {
    body.lines()
        .filter_map(|l| l.trim().strip_prefix("- "))
        .take(3)
        .map(|s| s.trim().to_string())
        .collect()
}

/// Summary record for one admission, built from its leaf pages.
pub fn admission_summary(store: &DocStore, admission: &NodePath) -> Result<AdmissionSummary, ManifestError> {
    admission
        .expect_kind(PathKind::Admission)
        .map_err(|_| ManifestError::NotInternal(admission.clone()))?;
    let leaves = store.list_children(admission)?;
    let mut dates: Vec<String> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut diagnoses = Vec::new();
    for leaf in &leaves {
        let page = store.read_page(leaf)?;
        if let Some(d) = &page.provenance.chart_time {
            dates.push(d.clone());
        }
        let label = page.provenance.doc_type.label();
        if !labels.contains(&label) {
            labels.push(label);
        }
        if page.provenance.doc_type == DocType::Diagnoses {
            diagnoses = top_diagnoses(&page.body);
        }
    }
    dates.sort();
    let date_range = match (dates.first(), dates.last()) {
        (Some(a), Some(b)) => Some((a.clone(), b.clone())),
        _ => None,
    };
    Ok(AdmissionSummary {
        admission: admission.name().to_string(),
        date_range,
        doc_count: leaves.len(),
        doc_type_labels: labels,
        top_diagnoses: diagnoses,
    })
}

/// Summary record for one patient, built from its admission summaries.
pub fn patient_summary(store: &DocStore, patient: &NodePath) -> Result<PatientSummary, ManifestError> {
    patient
        .expect_kind(PathKind::Patient)
        .map_err(|_| ManifestError::NotInternal(patient.clone()))?;
    let admissions = store.list_children(patient)?;
    let mut terms: Vec<String> = Vec::new();
    let mut dates: Vec<String> = Vec::new();
    for admission in &admissions {
        let summary = admission_summary(store, admission)?;
        if let Some((a, b)) = summary.date_range {
            dates.push(a);
            dates.push(b);
        }
        if let Some(dx) = summary.top_diagnoses.first() {
            if !terms.contains(dx) {
                terms.push(dx.clone());
            }
        }
    }
    terms.truncate(4);
    dates.sort();
    let date_range = match (dates.first(), dates.last()) {
        (Some(a), Some(b)) => Some((a.clone(), b.clone())),
        _ => None,
    };
    Ok(PatientSummary {
        patient: patient.name().to_string(),
        admission_count: admissions.len(),
        date_range,
        top_terms: terms,
    })
}

fn range_text(range: &Option<(String, String)>) -> String {
    match range {
        Some((a, b)) if a == b => a.clone(),
        Some((a, b)) => format!("{a} to {b}"),
        None => "-".into(),
    }
}

fn leaf_entry(store: &DocStore, leaf: &NodePath, describer: &dyn Describer) -> Result<ManifestEntry, ManifestError> {
    let excerpt = leaf_excerpt(store, leaf)?;
    let date = excerpt.chart_time.clone().unwrap_or_else(|| "-".into());
    ManifestEntry::new(
        leaf.name(),
        &excerpt.doc_type.label(),
        &date,
        &describer.describe_leaf(&excerpt),
    )
}

fn admission_entry(
    store: &DocStore,
    admission: &NodePath,
    describer: &dyn Describer,
) -> Result<ManifestEntry, ManifestError> {
    let summary = admission_summary(store, admission)?;
    ManifestEntry::new(
        admission.name(),
        "admission",
        &range_text(&summary.date_range),
        &describer.describe_admission(&summary),
    )
}

fn patient_entry(
    store: &DocStore,
    patient: &NodePath,
    describer: &dyn Describer,
) -> Result<ManifestEntry, ManifestError> {
    let summary = patient_summary(store, patient)?;
    ManifestEntry::new(
        patient.name(),
        "patient",
        &range_text(&summary.date_range),
        &describer.describe_patient(&summary),
    )
}

fn child_entry(store: &DocStore, child: &NodePath, describer: &dyn Describer) -> Result<ManifestEntry, ManifestError> {
    match child.kind() {
        PathKind::Leaf => leaf_entry(store, child, describer),
        PathKind::Admission => admission_entry(store, child, describer),
        PathKind::Patient => patient_entry(store, child, describer),
        PathKind::Root => unreachable!("root is never a child"),
    }
}

/// Regenerate the manifest at `node` from the live tree and write it.
pub fn rebuild_manifest(
    store: &DocStore,
    node: &NodePath,
    describer: &dyn Describer,
) -> Result<Manifest, ManifestError> {
    if node.is_leaf() {
        return Err(ManifestError::NotInternal(node.clone()));
    }
    let children = store.list_children(node)?;
    let mut entries = Vec::with_capacity(children.len());
    for child in &children {
        entries.push(child_entry(store, child, describer)?);
    }
    let manifest = Manifest {
        node: node.clone(),
        entries,
        generated_at_version: store.max_version(),
    };
    store.write_manifest_text(node, &manifest.render())?;
    Ok(manifest)
}

/// All internal nodes currently on disk, deepest first.
pub fn internal_nodes(store: &DocStore) -> Result<Vec<NodePath>, ManifestError> {
    let mut nodes = vec![];
    let root = NodePath::root();
    for patient in store.list_children(&root)? {
        for admission in store.list_children(&patient)? {
            nodes.push(admission);
        }
        nodes.push(patient);
    }
    nodes.push(root);
    Ok(nodes)
}

/// Bottom-up rebuild of every internal node's manifest. Returns the number
/// of manifests written.
pub fn rebuild_all(store: &DocStore, describer: &dyn Describer) -> Result<usize, ManifestError> {
    let nodes = internal_nodes(store)?;
    for node in &nodes {
        rebuild_manifest(store, node, describer)?;
    }
    Ok(nodes.len())
}

/// Incrementally update manifests after a persisted mutation event.
///
/// Returns the manifests touched, ordered leaf-ward first; the list is
/// never longer than the depth of the mutated page. An event older than a
/// manifest's `generated_at_version` is stale and resolved by regenerating
/// that manifest.
pub fn apply_mutation(
    store: &DocStore,
    event: &MutationEvent,
    describer: &dyn Describer,
) -> Result<Vec<NodePath>, ManifestError> {
    let leaf = &event.doc_id;
    let admission = leaf.parent().expect("leaf has admission");
    let patient = admission.parent().expect("admission has patient");
    let root = NodePath::root();
    let mut touched = Vec::new();

    // Admission manifest: rewrite the mutated document's row.
    let new_row = leaf_entry(store, leaf, describer)?;
    upsert_row(store, &admission, new_row, event.version, describer, &mut touched)?;

    // Patient manifest: touched when the admission row is structurally new,
    // or when the admission's scope changed materially.
    let new_row = admission_entry(store, &admission, describer)?;
    let patient_changed = propagate_if_material(store, &patient, new_row, event.version, describer, &mut touched)?;

    // Root manifest: same rule one level up.
    if patient_changed {
        let new_row = patient_entry(store, &patient, describer)?;
        propagate_if_material(store, &root, new_row, event.version, describer, &mut touched)?;
    }
    Ok(touched)
}

/// Insert or replace `row` in the manifest at `node`, leaving sibling rows
/// byte-identical. Missing or stale manifests are regenerated instead.
fn upsert_row(
    store: &DocStore,
    node: &NodePath,
    row: ManifestEntry,
    event_version: u64,
    describer: &dyn Describer,
    touched: &mut Vec<NodePath>,
) -> Result<(), ManifestError> {
    let existing = match store.read_manifest_text(node)? {
        Some(text) => super::parse_manifest(&text).ok(),
        None => None,
    };
    let mut manifest = match existing {
        Some(m) if m.generated_at_version <= event_version => m,
        // Missing, unparseable, or written by a later maintenance pass than
        // this event: regenerate from the live tree.
        _ => {
            rebuild_manifest(store, node, describer)?;
            touched.push(node.clone());
            return Ok(());
        }
    };
    match manifest.entries.iter_mut().find(|e| e.child == row.child) {
        Some(slot) => {
            if *slot == row {
                return Ok(());
            }
            *slot = row;
        }
        None => {
            let at = manifest
                .entries
                .iter()
                .position(|e| e.child.as_str() > row.child.as_str())
                .unwrap_or(manifest.entries.len());
            manifest.entries.insert(at, row);
        }
    }
    manifest.generated_at_version = event_version;
    store.write_manifest_text(node, &manifest.render())?;
    touched.push(node.clone());
    Ok(())
}

/// Rewrite the child row at `node` only when the scope change is material.
/// Returns true when the ancestor chain must keep propagating.
fn propagate_if_material(
    store: &DocStore,
    node: &NodePath,
    row: ManifestEntry,
    event_version: u64,
    describer: &dyn Describer,
    touched: &mut Vec<NodePath>,
) -> Result<bool, ManifestError> {
    let existing = match store.read_manifest_text(node)? {
        Some(text) => super::parse_manifest(&text).ok(),
        None => None,
    };
    let manifest = match existing {
        Some(m) if m.generated_at_version <= event_version => m,
        _ => {
            rebuild_manifest(store, node, describer)?;
            touched.push(node.clone());
            return Ok(true);
        }
    };
    match manifest.entry(&row.child) {
        Some(old) => {
            if describer.material_change(&old.scope, &row.scope) {
                upsert_row(store, node, row, event_version, describer, touched)?;
                Ok(true)
            } else {
                Ok(false)
            }
        }
        None => {
            upsert_row(store, node, row, event_version, describer, touched)?;
            Ok(true)
        }
    }
}

/// Audit that every internal node's manifest entries equal its directory
/// children. Returns the list of violations (empty = consistent).
pub fn audit_coverage(store: &DocStore) -> Result<Vec<String>, ManifestError> {
    let mut violations = Vec::new();
    for node in internal_nodes(store)? {
        let children: BTreeSet<String> = store
            .list_children(&node)?
            .iter()
            .map(|c| c.name().to_string())
            .collect();
        match read_manifest(store, &node) {
            Ok(m) => {
                let listed: BTreeSet<String> = m.entries.iter().map(|e| e.child.clone()).collect();
                if listed != children {
                    violations.push(format!(
                        "{node}: manifest lists {listed:?} but directory has {children:?}"
                    ));
                }
                if m.entries.len() != children.len() {
                    violations.push(format!("{node}: duplicate manifest rows"));
                }
            }
            Err(e) => violations.push(format!("{node}: {e}")),
        }
    }
    Ok(violations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::DeterministicDescriber;
    use crate::store::{DocStore, ProvenanceHeader, WriteAccess, WriterRole};

    fn append(store: &DocStore, patient: &str, admission: &str, doc: &str, dt: DocType, date: &str, body: &str) -> MutationEvent {
        let path = NodePath::leaf(patient, admission, doc).unwrap();
        let header = ProvenanceHeader::new("test", dt, WriterRole::System).with_chart_time(date);
        store.append_page(&path, header, body, false, WriteAccess::Build).unwrap()
    }

    #[test]
    fn rebuild_single_admission() {
        let dir = tempfile::tempdir().unwrap();
        let store = DocStore::open(dir.path()).unwrap();
        append(&store, "S10000001", "hadm_20000001", "triage.md", DocType::Triage, "2110-01-01", "Chief complaint: fever.");
        let node = NodePath::admission("S10000001", "hadm_20000001").unwrap();
        let m = rebuild_manifest(&store, &node, &DeterministicDescriber).unwrap();
        assert_eq!(m.entries.len(), 1);
        assert_eq!(m.entries[0].child, "triage.md");
        assert!(!m.entries[0].scope.is_empty());
    }

    #[test]
    fn rebuild_patient_row_per_admission() {
        let dir = tempfile::tempdir().unwrap();
        let store = DocStore::open(dir.path()).unwrap();
        for adm in ["hadm_20000001", "hadm_20000002", "hadm_20000003"] {
            append(&store, "S10000001", adm, "diagnoses.md", DocType::Diagnoses, "2110-01-01", "- pneumonia\n- sepsis\n");
        }
        let m = rebuild_manifest(&store, &NodePath::patient("S10000001").unwrap(), &DeterministicDescriber).unwrap();
        assert_eq!(m.entries.len(), 3);
        assert!(m.entries.iter().all(|e| !e.scope.is_empty()));
        assert!(m.entries.iter().all(|e| e.doc_type_or_kind == "admission"));
    }

    #[test]
    fn new_leaf_touches_only_admission_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let store = DocStore::open(dir.path()).unwrap();
        append(&store, "S10000001", "hadm_20000001", "diagnoses.md", DocType::Diagnoses, "2110-01-01", "- pneumonia\n");
        append(&store, "S10000001", "hadm_20000001", "triage.md", DocType::Triage, "2110-01-01", "Chief complaint: fever.");
        rebuild_all(&store, &DeterministicDescriber).unwrap();

        // New lab in an existing admission: document count changes from 2 to
        // 3 but the top diagnoses stay put, so the admission scope change is
        // immaterial and only the admission manifest is rewritten.
        let event = append(&store, "S10000001", "hadm_20000001", "lab_chemistry.md", DocType::Lab("chemistry".into()), "2110-01-02", "Creatinine 1.1 mg/dL.");
        let touched = apply_mutation(&store, &event, &DeterministicDescriber).unwrap();
        assert_eq!(touched, vec![NodePath::admission("S10000001", "hadm_20000001").unwrap()]);
    }

    #[test]
    fn new_admission_touches_admission_and_patient() {
        let dir = tempfile::tempdir().unwrap();
        let store = DocStore::open(dir.path()).unwrap();
        for adm in ["hadm_20000001", "hadm_20000002"] {
            append(&store, "S10000001", adm, "diagnoses.md", DocType::Diagnoses, "2110-01-01", "- pneumonia\n");
        }
        rebuild_all(&store, &DeterministicDescriber).unwrap();

        let event = append(&store, "S10000001", "hadm_20000009", "triage.md", DocType::Triage, "2110-03-01", "Chief complaint: dyspnea.");
        let touched = apply_mutation(&store, &event, &DeterministicDescriber).unwrap();
        assert_eq!(
            touched,
            vec![
                NodePath::admission("S10000001", "hadm_20000009").unwrap(),
                NodePath::patient("S10000001").unwrap(),
            ]
        );
        // Coverage stays intact after the structural insert.
        assert!(audit_coverage(&store).unwrap().is_empty());
    }

    #[test]
    fn stale_event_regenerates() {
        let dir = tempfile::tempdir().unwrap();
        let store = DocStore::open(dir.path()).unwrap();
        let e1 = append(&store, "S10000001", "hadm_20000001", "triage.md", DocType::Triage, "2110-01-01", "Chief complaint: fever.");
        append(&store, "S10000001", "hadm_20000001", "diagnoses.md", DocType::Diagnoses, "2110-01-01", "- pneumonia\n");
        rebuild_all(&store, &DeterministicDescriber).unwrap();
        // The manifest now postdates e1; applying e1 regenerates rather than
        // editing rows backwards.
        let touched = apply_mutation(&store, &e1, &DeterministicDescriber).unwrap();
        assert!(!touched.is_empty());
        assert!(audit_coverage(&store).unwrap().is_empty());
    }

    #[test]
    fn manifest_count_equals_internal_node_count() {
        let dir = tempfile::tempdir().unwrap();
        let store = DocStore::open(dir.path()).unwrap();
        for p in ["S10000001", "S10000002"] {
            for a in ["hadm_20000001", "hadm_20000002"] {
                append(&store, p, a, "triage.md", DocType::Triage, "2110-01-01", "Chief complaint: fever.");
            }
        }
        let written = rebuild_all(&store, &DeterministicDescriber).unwrap();
        // 4 admissions + 2 patients + root.
        assert_eq!(written, 7);
        let on_disk = walkdir::WalkDir::new(dir.path())
            .into_iter()
            .filter_map(Result::ok)
            .filter(|e| e.file_name() == "manifest.md")
            .count();
        assert_eq!(on_disk, 7);
    }
}
