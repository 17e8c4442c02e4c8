//! Leaf pages: clinical content plus a YAML provenance header.
//!
//! On disk a page is a `---` delimited YAML header followed by the body,
//! byte-stable across read/write round trips. Bodies are immutable after
//! append; revisions are separate files.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::path::NodePath;

/// Document category. The six clinical categories mirror the corpus layout;
/// `Note` covers agent-authored workflow pages (alerts, plans, summaries).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DocType {
    DischargeSummary,
    Radiology,
    Diagnoses,
    Triage,
    Prescriptions,
    /// Laboratory results grouped by test category (`lab_blood_gas`, ...).
    Lab(String),
    /// Agent-authored note of the given kind (`vitals_summary`, ...).
    Note(String),
}

impl DocType {
    /// Snake-case identifier, also the default document file stem.
    pub fn id(&self) -> String {
        match self {
            DocType::DischargeSummary => "discharge_summary".into(),
            DocType::Radiology => "radiology".into(),
            DocType::Diagnoses => "diagnoses".into(),
            DocType::Triage => "triage".into(),
            DocType::Prescriptions => "prescriptions".into(),
            DocType::Lab(cat) => format!("lab_{cat}"),
            DocType::Note(kind) => kind.clone(),
        }
    }

    /// Human-readable label used in manifest Type columns.
    pub fn label(&self) -> String {
        self.id().replace('_', " ")
    }

    pub fn parse(s: &str) -> DocType {
        match s {
            "discharge_summary" => DocType::DischargeSummary,
            "radiology" => DocType::Radiology,
            "diagnoses" => DocType::Diagnoses,
            "triage" => DocType::Triage,
            "prescriptions" => DocType::Prescriptions,
            _ => match s.strip_prefix("lab_") {
                Some(cat) => DocType::Lab(cat.to_string()),
                None => DocType::Note(s.to_string()),
            },
        }
    }
}

impl fmt::Display for DocType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

impl Serialize for DocType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.id())
    }
}

impl<'de> Deserialize<'de> for DocType {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(DocType::parse(&String::deserialize(d)?))
    }
}

/// Role of the writing agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WriterRole {
    Patient,
    Clinician,
    Triage,
    Specialist,
    System,
}

impl fmt::Display for WriterRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            WriterRole::Patient => "patient",
            WriterRole::Clinician => "clinician",
            WriterRole::Triage => "triage",
            WriterRole::Specialist => "specialist",
            WriterRole::System => "system",
        };
        write!(f, "{s}")
    }
}

/// Provenance header carried by every page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceHeader {
    /// Source table or producing skill.
    pub source_table: String,
    /// Named identifiers (subject_id, hadm_id, ...). Ordered for stable output.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub identifiers: BTreeMap<String, String>,
    pub doc_type: DocType,
    /// Clinical chart time, `YYYY-MM-DD` (informational).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_time: Option<String>,
    pub writer_role: WriterRole,
}

impl ProvenanceHeader {
    pub fn new(source_table: &str, doc_type: DocType, writer_role: WriterRole) -> Self {
        ProvenanceHeader {
            source_table: source_table.to_string(),
            identifiers: BTreeMap::new(),
            doc_type,
            chart_time: None,
            writer_role,
        }
    }

    pub fn with_chart_time(mut self, t: &str) -> Self {
        self.chart_time = Some(t.to_string());
        self
    }

    pub fn with_identifier(mut self, k: &str, v: &str) -> Self {
        self.identifiers.insert(k.to_string(), v.to_string());
        self
    }
}

#[derive(Serialize, Deserialize)]
struct PageHeader {
    #[serde(flatten)]
    provenance: ProvenanceHeader,
    version_at_write: u64,
}

/// A stored leaf page.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Page {
    /// Logical leaf path.
    pub path: NodePath,
    pub provenance: ProvenanceHeader,
    pub body: String,
    /// Global store version assigned when the page was appended.
    pub version_at_write: u64,
}

#[derive(Debug, Error)]
pub enum PageFormatError {
    #[error("page file does not start with a `---` header block")]
    MissingHeader,
    #[error("page header is not valid YAML: {0}")]
    BadYaml(#[from] serde_yaml::Error),
}

impl Page {
    /// Serialize to the on-disk form: `---` YAML header `---` body.
    pub fn render(&self) -> String {
        let header = PageHeader {
            provenance: self.provenance.clone(),
            version_at_write: self.version_at_write,
        };
        let yaml = serde_yaml::to_string(&header).expect("header serializes");
        format!("---\n{yaml}---\n{}", self.body)
    }

    /// Parse the on-disk form back into a page at `path`.
    pub fn parse(path: NodePath, raw: &str) -> Result<Page, PageFormatError> {
        let rest = raw.strip_prefix("---\n").ok_or(PageFormatError::MissingHeader)?;
        let (yaml, body) = match rest.strip_prefix("---\n") {
            // Empty header block is not produced by render, but be tolerant.
            Some(b) => ("", b),
            None => {
                let idx = rest.find("\n---\n").ok_or(PageFormatError::MissingHeader)?;
                (&rest[..idx + 1], &rest[idx + 5..])
            }
        };
        let header: PageHeader = serde_yaml::from_str(yaml)?;
        Ok(Page {
            path,
            provenance: header.provenance,
            body: body.to_string(),
            version_at_write: header.version_at_write,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_page() -> Page {
        Page {
            path: NodePath::leaf("S1", "hadm_2", "lab_blood_gas.md").unwrap(),
            provenance: ProvenanceHeader::new("labevents", DocType::Lab("blood_gas".into()), WriterRole::System)
                .with_chart_time("2110-03-04")
                .with_identifier("subject_id", "1")
                .with_identifier("hadm_id", "2"),
            body: "Lactate 2.2 mmol/L.\n\nSerial values: 2.2, 2.6, 3.0.\n".into(),
            version_at_write: 7,
        }
    }

    #[test]
    fn render_parse_round_trip() {
        let page = sample_page();
        let raw = page.render();
        let parsed = Page::parse(page.path.clone(), &raw).unwrap();
        assert_eq!(parsed, page);
        // Byte stability: re-render equals the first render.
        assert_eq!(parsed.render(), raw);
    }

    #[test]
    fn doc_type_ids() {
        assert_eq!(DocType::Lab("blood_gas".into()).id(), "lab_blood_gas");
        assert_eq!(DocType::parse("lab_blood_gas"), DocType::Lab("blood_gas".into()));
        assert_eq!(DocType::parse("discharge_summary"), DocType::DischargeSummary);
        assert_eq!(DocType::parse("escalation_alert"), DocType::Note("escalation_alert".into()));
        assert_eq!(DocType::Lab("blood_gas".into()).label(), "lab blood gas");
    }

    #[test]
    fn body_with_inner_dashes_survives() {
        let mut page = sample_page();
        page.body = "Intro\n---\nRuled section\n".into();
        let raw = page.render();
        let parsed = Page::parse(page.path.clone(), &raw).unwrap();
        assert_eq!(parsed.body, page.body);
    }

    #[test]
    fn malformed_header_rejected() {
        let path = NodePath::leaf("S1", "hadm_2", "triage.md").unwrap();
        assert!(Page::parse(path.clone(), "no header").is_err());
        assert!(Page::parse(path, "---\nnot: [valid\n---\nbody").is_err());
    }
}
