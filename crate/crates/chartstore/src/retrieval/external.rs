//! Selector backed by an external chat-completion service.
//!
//! The prompt embeds the manifest table and the query; the response is
//! parsed as a list of child names, with invalid names dropped. Transport
//! or parse failures surface as [`SelectorError`] and are retried once by
//! the retrieval engine. Not exercised by the offline test suite.

use std::time::Duration;

use serde_json::{json, Value};

use super::{Query, Selection, Selector, SelectorError};
use crate::manifest::{Manifest, ManifestEntry};
use crate::store::NodePath;

/// Per-call completion budget.
pub const MAX_COMPLETION_TOKENS: u32 = 768;

#[derive(Debug, Clone)]
pub struct ExternalSelector {
    /// Full chat-completions endpoint, e.g. `http://host:8000/v1/chat/completions`.
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl ExternalSelector {
    pub fn new(endpoint: &str, model: &str) -> Self {
        ExternalSelector {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key: None,
            timeout: Duration::from_secs(30),
        }
    }

    fn prompt(query: &Query, node: &NodePath, entries: &[ManifestEntry]) -> String {
        let table = Manifest {
            node: node.clone(),
            entries: entries.to_vec(),
            generated_at_version: 0,
        }
        .render();
        format!(
            "You are navigating a hierarchical patient record. Given the query and the \
             index table of the current node, reply with a JSON array containing the \
             Child values worth opening, and nothing else.\n\nQuery: {}\n\n{}",
            query.text, table
        )
    }
}

impl Selector for ExternalSelector {
    fn select(
        &self,
        query: &Query,
        node: &NodePath,
        entries: &[ManifestEntry],
        _level: usize,
    ) -> Result<Selection, SelectorError> {
        let body = json!({
            "model": self.model,
            "max_tokens": MAX_COMPLETION_TOKENS,
            "messages": [{"role": "user", "content": Self::prompt(query, node, entries)}],
        });
        let mut req = ureq::post(&self.endpoint)
            .timeout(self.timeout)
            .set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let resp = req
            .send_json(body)
            .map_err(|e| SelectorError::Failure(format!("completion request failed: {e}")))?;
        let value: Value = resp
            .into_json()
            .map_err(|e| SelectorError::Failure(format!("bad completion payload: {e}")))?;
        let content = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| SelectorError::Failure("completion carried no content".into()))?;
        Ok(Selection::of(parse_child_names(content, entries)))
    }

    fn name(&self) -> &str {
        "external"
    }
}

/// Parse a model reply into child names, dropping anything that does not
/// name a shown entry. Accepts a JSON array of strings or one name per line
/// (with optional bullet/quote decoration).
pub fn parse_child_names(content: &str, entries: &[ManifestEntry]) -> Vec<String> {
    let valid: Vec<&str> = entries.iter().map(|e| e.child.as_str()).collect();
    let candidates: Vec<String> = match extract_json_array(content) {
        Some(names) => names,
        None => content
            .lines()
            .map(|l| l.trim().trim_start_matches(['-', '*', ' ']).trim_matches(['"', '`', ',']).to_string())
            .collect(),
    };
    let mut out = Vec::new();
    for c in candidates {
        let c = c.trim().trim_matches('"').to_string();
        if valid.contains(&c.as_str()) && !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

fn extract_json_array(content: &str) -> Option<Vec<String>> {
    let start = content.find('[')?;
    let end = content.rfind(']')?;
    if end <= start {
        return None;
    }
    let parsed: Value = serde_json::from_str(&content[start..=end]).ok()?;
    let arr = parsed.as_array()?;
    Some(arr.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries() -> Vec<ManifestEntry> {
        vec![
            ManifestEntry::new("hadm_20298053", "admission", "-", "a").unwrap(),
            ManifestEntry::new("hadm_20946200", "admission", "-", "b").unwrap(),
        ]
    }

    #[test]
    fn json_array_replies_parse() {
        let picked = parse_child_names(r#"Sure: ["hadm_20298053", "hadm_20946200"]"#, &entries());
        assert_eq!(picked.len(), 2);
    }

    #[test]
    fn line_replies_parse_and_invalid_names_drop() {
        let picked = parse_child_names("- hadm_20298053\n- hadm_99999999\n", &entries());
        assert_eq!(picked, vec!["hadm_20298053".to_string()]);
    }

    #[test]
    fn duplicates_collapse() {
        let picked = parse_child_names("hadm_20298053\nhadm_20298053\n", &entries());
        assert_eq!(picked.len(), 1);
    }
}
