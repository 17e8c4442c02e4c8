//! Per-directory manifest index files.
//!
//! Every internal node of the tree carries a `manifest.md` listing its
//! immediate children as a four-column Markdown table (Child, Type, Date,
//! Scope). Manifests are the navigational substrate of retrieval: the
//! Scope column holds a one-sentence natural-language description of each
//! child, produced by a [`Describer`].

mod describe;
mod maintain;

pub use describe::{
    AdmissionSummary, Describer, DeterministicDescriber, LeafExcerpt, PatientSummary,
    EXCERPT_CHARS,
};
pub use maintain::{
    admission_summary, apply_mutation, audit_coverage, internal_nodes, patient_summary,
    rebuild_all, rebuild_manifest,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::{NodePath, StoreError};

pub const HEADER_ROW: &str = "| Child | Type | Date | Scope |";
const SEPARATOR_ROW: &str = "| --- | --- | --- | --- |";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest entry scope must be a non-empty single line")]
    BadScope,
    #[error("malformed manifest table: {0}")]
    MalformedTable(String),
    #[error("node {0} has no manifest")]
    MissingManifest(NodePath),
    #[error("{0} is not an internal node")]
    NotInternal(NodePath),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// One row of a manifest: a child plus its description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Child path segment (`S{id}`, `hadm_{id}`, or a document file name).
    pub child: String,
    /// Type column: `patient`, `admission`, or a document-type label.
    pub doc_type_or_kind: String,
    /// Date or date-range text.
    pub date: String,
    /// One-sentence natural-language description of the child's contents.
    pub scope: String,
}

impl ManifestEntry {
    pub fn new(child: &str, kind: &str, date: &str, scope: &str) -> Result<Self, ManifestError> {
        if scope.trim().is_empty() || scope.contains('\n') {
            return Err(ManifestError::BadScope);
        }
        Ok(ManifestEntry {
            child: child.to_string(),
            doc_type_or_kind: kind.to_string(),
            date: date.to_string(),
            scope: scope.to_string(),
        })
    }
}

/// A parsed or generated manifest for one internal node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub node: NodePath,
    pub entries: Vec<ManifestEntry>,
    /// Store version current when this manifest was written.
    pub generated_at_version: u64,
}

impl Manifest {
    pub fn entry(&self, child: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.child == child)
    }

    /// Render to the on-disk Markdown form.
    pub fn render(&self) -> String {
        let mut out = format!(
            "<!-- manifest node={} version={} -->\n{HEADER_ROW}\n{SEPARATOR_ROW}\n",
            self.node, self.generated_at_version
        );
        for e in &self.entries {
            out.push_str(&format!(
                "| {} | {} | {} | {} |\n",
                escape_cell(&e.child),
                escape_cell(&e.doc_type_or_kind),
                escape_cell(&e.date),
                escape_cell(&e.scope),
            ));
        }
        out
    }
}

fn escape_cell(s: &str) -> String {
    s.replace('\\', "\\\\").replace('|', "\\|")
}

fn split_row(line: &str) -> Option<Vec<String>> {
    let line = line.trim();
    if !line.starts_with('|') || !line.ends_with('|') {
        return None;
    }
    let inner = &line[1..line.len() - 1];
    let mut cells = Vec::new();
    let mut cur = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some(esc) => cur.push(esc),
                None => cur.push('\\'),
            },
            '|' => {
                cells.push(cur.trim().to_string());
                cur = String::new();
            }
            _ => cur.push(c),
        }
    }
    cells.push(cur.trim().to_string());
    Some(cells)
}

/// Parse a rendered manifest; `parse(render(m)) == m`.
pub fn parse_manifest(text: &str) -> Result<Manifest, ManifestError> {
    let mut lines = text.lines();
    let preamble = lines
        .next()
        .ok_or_else(|| ManifestError::MalformedTable("empty file".into()))?;
    let (node, version) = parse_preamble(preamble)?;
    let header = lines
        .next()
        .ok_or_else(|| ManifestError::MalformedTable("missing header row".into()))?;
    if header.trim() != HEADER_ROW {
        return Err(ManifestError::MalformedTable(format!(
            "header row must be `{HEADER_ROW}`, got `{}`",
            header.trim()
        )));
    }
    let sep = lines
        .next()
        .ok_or_else(|| ManifestError::MalformedTable("missing separator row".into()))?;
    if split_row(sep).map(|c| c.len()) != Some(4) {
        return Err(ManifestError::MalformedTable("bad separator row".into()));
    }
    let mut entries = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells = split_row(line)
            .ok_or_else(|| ManifestError::MalformedTable(format!("row {} is not a table row", i + 4)))?;
        if cells.len() != 4 {
            return Err(ManifestError::MalformedTable(format!(
                "row {} has {} columns, expected 4",
                i + 4,
                cells.len()
            )));
        }
        if cells[3].is_empty() {
            return Err(ManifestError::MalformedTable(format!("row {} has an empty Scope cell", i + 4)));
        }
        entries.push(ManifestEntry {
            child: cells[0].clone(),
            doc_type_or_kind: cells[1].clone(),
            date: cells[2].clone(),
            scope: cells[3].clone(),
        });
    }
    Ok(Manifest { node, entries, generated_at_version: version })
}

fn parse_preamble(line: &str) -> Result<(NodePath, u64), ManifestError> {
    let inner = line
        .trim()
        .strip_prefix("<!-- manifest ")
        .and_then(|s| s.strip_suffix(" -->"))
        .ok_or_else(|| ManifestError::MalformedTable("missing manifest preamble".into()))?;
    let mut node = None;
    let mut version = None;
    for part in inner.split_whitespace() {
        if let Some(v) = part.strip_prefix("node=") {
            node = Some(NodePath::parse(v).map_err(|e| ManifestError::MalformedTable(e.to_string()))?);
        } else if let Some(v) = part.strip_prefix("version=") {
            version = Some(v.parse::<u64>().map_err(|e| ManifestError::MalformedTable(e.to_string()))?);
        }
    }
    match (node, version) {
        (Some(n), Some(v)) => Ok((n, v)),
        _ => Err(ManifestError::MalformedTable("preamble must carry node= and version=".into())),
    }
}

/// Read and parse the manifest at `node`.
pub fn read_manifest(store: &crate::store::DocStore, node: &NodePath) -> Result<Manifest, ManifestError> {
    let text = store
        .read_manifest_text(node)?
        .ok_or_else(|| ManifestError::MissingManifest(node.clone()))?;
    parse_manifest(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Manifest {
        Manifest {
            node: NodePath::patient("S19768128").unwrap(),
            entries: vec![
                ManifestEntry::new(
                    "hadm_20298053",
                    "admission",
                    "2110-03-01 to 2110-03-12",
                    "6 documents: intracranial mass status post craniotomy",
                )
                .unwrap(),
                ManifestEntry::new(
                    "hadm_20946200",
                    "admission",
                    "2110-04-02 to 2110-04-09",
                    "5 documents: wound infection following intracranial procedure",
                )
                .unwrap(),
            ],
            generated_at_version: 42,
        }
    }

    #[test]
    fn render_parse_round_trip() {
        let m = sample();
        let rendered = m.render();
        assert!(rendered.contains(HEADER_ROW));
        let parsed = parse_manifest(&rendered).unwrap();
        assert_eq!(parsed, m);
        assert_eq!(parsed.render(), rendered);
    }

    #[test]
    fn pipes_in_cells_survive() {
        let mut m = sample();
        m.entries[0].scope = "values 2.2 | 2.6 | 3.0 and a back\\slash".into();
        let parsed = parse_manifest(&m.render()).unwrap();
        assert_eq!(parsed.entries[0].scope, m.entries[0].scope);
    }

    #[test]
    fn missing_scope_cell_is_malformed() {
        let text = "<!-- manifest node=S1 version=1 -->\n| Child | Type | Date | Scope |\n| --- | --- | --- | --- |\n| a | b | c |  |\n";
        match parse_manifest(text) {
            Err(ManifestError::MalformedTable(msg)) => assert!(msg.contains("Scope")),
            other => panic!("expected malformed table, got {other:?}"),
        }
    }

    #[test]
    fn wrong_header_is_malformed() {
        let text = "<!-- manifest node=S1 version=1 -->\n| Kid | Type | Date | Scope |\n| --- | --- | --- | --- |\n";
        assert!(parse_manifest(text).is_err());
    }

    #[test]
    fn large_tables_preserve_order() {
        let entries: Vec<ManifestEntry> = (0..100)
            .map(|i| ManifestEntry::new(&format!("hadm_{i:08}"), "admission", "2110-01-01", &format!("row {i}")).unwrap())
            .collect();
        let m = Manifest { node: NodePath::patient("S10000001").unwrap(), entries, generated_at_version: 1 };
        let parsed = parse_manifest(&m.render()).unwrap();
        assert_eq!(parsed.entries.len(), 100);
        assert_eq!(parsed, m);
    }

    #[test]
    fn scope_must_be_single_line() {
        assert!(ManifestEntry::new("a", "b", "c", "").is_err());
        assert!(ManifestEntry::new("a", "b", "c", "two\nlines").is_err());
    }
}
