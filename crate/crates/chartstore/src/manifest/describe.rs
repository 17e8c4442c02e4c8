//! Scope-description contract and its deterministic implementation.
//!
//! Production deployments would back this contract with a language model;
//! the deterministic describer makes manifest maintenance a pure function
//! of the page set, which is what the test suite needs.

use crate::store::DocType;
use crate::text;

/// Characters of each leaf body fed to the describer.
pub const EXCERPT_CHARS: usize = 1500;

/// Input for describing a leaf document row.
#[derive(Debug, Clone)]
pub struct LeafExcerpt {
    pub doc_type: DocType,
    pub chart_time: Option<String>,
    /// First [`EXCERPT_CHARS`] characters of the page body.
    pub excerpt: String,
}

/// Input for describing an admission row in a patient manifest.
#[derive(Debug, Clone)]
pub struct AdmissionSummary {
    pub admission: String,
    pub date_range: Option<(String, String)>,
    pub doc_count: usize,
    pub doc_type_labels: Vec<String>,
    /// Top diagnoses parsed from the admission's diagnoses document.
    pub top_diagnoses: Vec<String>,
}

/// Input for describing a patient row in the root manifest.
#[derive(Debug, Clone)]
pub struct PatientSummary {
    pub patient: String,
    pub admission_count: usize,
    pub date_range: Option<(String, String)>,
    /// Leading diagnosis of each admission, deduplicated.
    pub top_terms: Vec<String>,
}

/// Produces Scope cells and materiality judgments.
///
/// Deterministic implementations must be pure functions of their inputs.
pub trait Describer: Sync {
    fn describe_leaf(&self, excerpt: &LeafExcerpt) -> String;
    fn describe_admission(&self, summary: &AdmissionSummary) -> String;
    fn describe_patient(&self, summary: &PatientSummary) -> String;
    /// True when replacing `old_scope` by `new_scope` changes the child's
    /// description enough that ancestor manifests must be rewritten.
    fn material_change(&self, old_scope: &str, new_scope: &str) -> bool;
}

/// Deterministic describer: scope = type label + date + first sentence,
/// truncated to 160 characters; a change is material when the token
/// Jaccard similarity of old and new scope drops below 0.6.
#[derive(Debug, Clone, Default)]
pub struct DeterministicDescriber;

const SCOPE_CHARS: usize = 160;

fn sanitize(s: &str) -> String {
    let collapsed: String = s
        .chars()
        .map(|c| if c == '\n' || c == '\r' || c == '\t' { ' ' } else { c })
        .collect();
    let trimmed = collapsed.split_whitespace().collect::<Vec<_>>().join(" ");
    let out = text::truncate_chars(&trimmed, SCOPE_CHARS).trim_end().to_string();
    if out.is_empty() {
        "(empty)".into()
    } else {
        out
    }
}

impl Describer for DeterministicDescriber {
    fn describe_leaf(&self, excerpt: &LeafExcerpt) -> String {
        let sentence = text::first_sentence(&excerpt.excerpt);
        let label = excerpt.doc_type.label();
        match &excerpt.chart_time {
            Some(date) => sanitize(&format!("{label}, {date}: {sentence}")),
            None => sanitize(&format!("{label}: {sentence}")),
        }
    }

    fn describe_admission(&self, summary: &AdmissionSummary) -> String {
        let detail = if summary.top_diagnoses.is_empty() {
            summary.doc_type_labels.join("; ")
        } else {
            summary.top_diagnoses.join("; ")
        };
        sanitize(&format!("{} documents: {detail}", summary.doc_count))
    }

    fn describe_patient(&self, summary: &PatientSummary) -> String {
        let detail = if summary.top_terms.is_empty() {
            "no recorded diagnoses".to_string()
        } else {
            summary.top_terms.join("; ")
        };
        sanitize(&format!("{} admissions: {detail}", summary.admission_count))
    }

    fn material_change(&self, old_scope: &str, new_scope: &str) -> bool {
        text::token_jaccard(old_scope, new_scope) < 0.6
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_scope_combines_label_date_and_sentence() {
        let d = DeterministicDescriber;
        let scope = d.describe_leaf(&LeafExcerpt {
            doc_type: DocType::Lab("blood_gas".into()),
            chart_time: Some("2110-03-04".into()),
            excerpt: "Lactate 2.2 mmol/L. Later values rose.".into(),
        });
        assert_eq!(scope, "lab blood gas, 2110-03-04: Lactate 2.2 mmol/L.");
    }

    #[test]
    fn scope_is_single_line_and_bounded() {
        let d = DeterministicDescriber;
        let long = "word ".repeat(100);
        let scope = d.describe_leaf(&LeafExcerpt {
            doc_type: DocType::Triage,
            chart_time: None,
            excerpt: format!("line one\nline two {long}"),
        });
        assert!(!scope.contains('\n'));
        assert!(scope.len() <= 160);
        assert!(!scope.is_empty());
    }

    #[test]
    fn materiality_threshold() {
        let d = DeterministicDescriber;
        assert!(!d.material_change("6 documents: pneumonia; sepsis", "7 documents: pneumonia; sepsis"));
        assert!(d.material_change("6 documents: pneumonia", "6 documents: cardiac arrest protocol initiated"));
        assert!(!d.material_change("same text", "same text"));
    }
}
