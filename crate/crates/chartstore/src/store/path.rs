//! Addressable nodes of the document tree.
//!
//! The tree is exactly four levels deep: root / patient (`S{id}`) /
//! admission (`hadm_{id}`) / leaf document (`<name>.md`). A node's kind is
//! a pure function of its depth.

use std::fmt;
use std::path::PathBuf;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Node kind, determined by depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Root,
    Patient,
    Admission,
    Leaf,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PathError {
    #[error("path has {0} segments; at most 3 allowed")]
    TooDeep(usize),
    #[error("patient segment `{0}` must match S<digits>")]
    BadPatient(String),
    #[error("admission segment `{0}` must match hadm_<digits>")]
    BadAdmission(String),
    #[error("leaf segment `{0}` must be a plain `.md` file name")]
    BadLeaf(String),
    #[error("expected a {expected:?} path, got {got:?}")]
    WrongKind { expected: PathKind, got: PathKind },
}

/// Path of a node in the document tree, relative to the store root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodePath {
    segments: Vec<String>,
}

impl NodePath {
    /// The tree root (empty path).
    pub fn root() -> Self {
        NodePath { segments: Vec::new() }
    }

    /// Build and validate a path from segments.
    pub fn new<S: AsRef<str>>(segments: &[S]) -> Result<Self, PathError> {
        let segments: Vec<String> = segments.iter().map(|s| s.as_ref().to_string()).collect();
        if segments.len() > 3 {
            return Err(PathError::TooDeep(segments.len()));
        }
        if let Some(p) = segments.first() {
            if !is_patient_segment(p) {
                return Err(PathError::BadPatient(p.clone()));
            }
        }
        if let Some(a) = segments.get(1) {
            if !is_admission_segment(a) {
                return Err(PathError::BadAdmission(a.clone()));
            }
        }
        if let Some(l) = segments.get(2) {
            if !is_leaf_segment(l) {
                return Err(PathError::BadLeaf(l.clone()));
            }
        }
        Ok(NodePath { segments })
    }

    pub fn patient(patient: &str) -> Result<Self, PathError> {
        Self::new(&[patient])
    }

    pub fn admission(patient: &str, admission: &str) -> Result<Self, PathError> {
        Self::new(&[patient, admission])
    }

    pub fn leaf(patient: &str, admission: &str, doc: &str) -> Result<Self, PathError> {
        Self::new(&[patient, admission, doc])
    }

    /// Parse from a `/`-separated relative path, e.g. `S1/hadm_2/triage.md`.
    pub fn parse(path: &str) -> Result<Self, PathError> {
        if path.is_empty() || path == "." {
            return Ok(Self::root());
        }
        let segs: Vec<&str> = path.split('/').filter(|s| !s.is_empty()).collect();
        Self::new(&segs)
    }

    pub fn kind(&self) -> PathKind {
        match self.segments.len() {
            0 => PathKind::Root,
            1 => PathKind::Patient,
            2 => PathKind::Admission,
            _ => PathKind::Leaf,
        }
    }

    pub fn depth(&self) -> usize {
        self.segments.len()
    }

    pub fn is_leaf(&self) -> bool {
        self.kind() == PathKind::Leaf
    }

    pub fn is_internal(&self) -> bool {
        !self.is_leaf()
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    /// Patient id segment, if the path is at or below patient level.
    pub fn patient_id(&self) -> Option<&str> {
        self.segments.first().map(|s| s.as_str())
    }

    /// Admission id segment, if present.
    pub fn admission_id(&self) -> Option<&str> {
        self.segments.get(1).map(|s| s.as_str())
    }

    /// Leaf document name, if this is a leaf path.
    pub fn doc_name(&self) -> Option<&str> {
        self.segments.get(2).map(|s| s.as_str())
    }

    /// Last segment, or `.` for the root.
    pub fn name(&self) -> &str {
        self.segments.last().map(|s| s.as_str()).unwrap_or(".")
    }

    pub fn parent(&self) -> Option<NodePath> {
        if self.segments.is_empty() {
            return None;
        }
        Some(NodePath {
            segments: self.segments[..self.segments.len() - 1].to_vec(),
        })
    }

    /// Child path; panics if already a leaf (programming error).
    pub fn child(&self, segment: &str) -> Result<NodePath, PathError> {
        let mut segs: Vec<&str> = self.segments.iter().map(|s| s.as_str()).collect();
        segs.push(segment);
        NodePath::new(&segs)
    }

    /// True if `self` is `other` or an ancestor of it.
    pub fn contains(&self, other: &NodePath) -> bool {
        other.segments.len() >= self.segments.len()
            && self.segments == other.segments[..self.segments.len()]
    }

    /// Relative filesystem path under a store root.
    pub fn to_fs_path(&self) -> PathBuf {
        self.segments.iter().collect()
    }

    pub fn expect_kind(&self, expected: PathKind) -> Result<(), PathError> {
        if self.kind() != expected {
            return Err(PathError::WrongKind { expected, got: self.kind() });
        }
        Ok(())
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.segments.is_empty() {
            return write!(f, ".");
        }
        write!(f, "{}", self.segments.join("/"))
    }
}

impl Serialize for NodePath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for NodePath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        NodePath::parse(&s).map_err(D::Error::custom)
    }
}

pub(crate) fn is_patient_segment(s: &str) -> bool {
    s.len() > 1 && s.starts_with('S') && s[1..].bytes().all(|b| b.is_ascii_digit())
}

pub(crate) fn is_admission_segment(s: &str) -> bool {
    s.len() > 5 && s.starts_with("hadm_") && s[5..].bytes().all(|b| b.is_ascii_digit())
}

pub(crate) fn is_leaf_segment(s: &str) -> bool {
    s.ends_with(".md") && s.len() > 3 && !s.contains('/') && s != "manifest.md"
}

/// Reference to a concrete page revision on disk.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PageRef {
    /// Logical leaf path of the document.
    pub path: NodePath,
    /// 1-based revision number.
    pub revision: u32,
}

impl PageRef {
    /// On-disk file name of this revision (`x.md`, then `x.rev2.md`, ...).
    pub fn file_name(&self) -> String {
        let doc = self.path.doc_name().expect("page ref must be a leaf");
        if self.revision <= 1 {
            return doc.to_string();
        }
        let stem = doc.strip_suffix(".md").unwrap_or(doc);
        format!("{stem}.rev{}.md", self.revision)
    }

    /// Relative filesystem path of this revision.
    pub fn to_fs_path(&self) -> PathBuf {
        let mut p = self
            .path
            .parent()
            .map(|p| p.to_fs_path())
            .unwrap_or_default();
        p.push(self.file_name());
        p
    }
}

impl fmt::Display for PageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@r{}", self.path, self.revision)
    }
}
