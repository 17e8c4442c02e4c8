//! Versioned, append-only hierarchical document store on a real filesystem.
//!
//! Layout under the store root:
//!
//! ```text
//! <root>/S{patient}/hadm_{admission}/<doc>.md    leaf pages
//! <root>/**/manifest.md                          per-directory index files
//! <root>/mutations.jsonl                         global mutation log
//! <root>/.leases/<patient>/record.json           write leases
//! ```
//!
//! Page files are never modified or deleted; a revision is a new file
//! (`x.md`, `x.rev2.md`, ...). Every append emits exactly one mutation
//! event with a gapless global version. Reads are safe from any number of
//! concurrent callers; the global log append runs inside a process-internal
//! mutual-exclusion region, and cross-process writers are serialized per
//! patient by the coordination module's lease.

mod clock;
mod log;
mod page;
mod path;

pub use clock::{logical_clock, system_clock, Clock, LogicalClock, SharedClock, SystemClock};
pub use log::{read_log, LogError, MutationEvent, LOG_FILE};
pub use page::{DocType, Page, PageFormatError, ProvenanceHeader, WriterRole};
pub use path::{NodePath, PageRef, PathError, PathKind};

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.md";
pub const LEASE_DIR: &str = ".leases";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("page not found: {0}")]
    NotFound(NodePath),
    #[error("write requires the patient lease: {0}")]
    LeaseRequired(String),
    #[error("io failure at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("bad page file {path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: PageFormatError,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io { path: path.to_path_buf(), source }
}

/// Grants or denies a write to a patient subtree.
///
/// Implemented by the coordination module's lease handle; the store calls
/// it before every leased append so that an expired or superseded holder's
/// late write is rejected.
pub trait WriteAuthority: Sync {
    fn authorize(&self, patient: &str) -> Result<(), String>;
}

/// Write-path access mode.
pub enum WriteAccess<'a> {
    /// Corpus construction: bypasses lease enforcement. Callers must not use
    /// this from agent runtimes.
    Build,
    /// Agent-mode write under a held lease.
    Leased(&'a dyn WriteAuthority),
}

/// Handle to the recorded set of files physically read through a store.
///
/// Used by retrieval tests to assert pruning soundness: nothing under an
/// unselected subtree is ever opened.
#[derive(Debug, Clone, Default)]
pub struct ReadProbe {
    reads: Arc<Mutex<BTreeSet<String>>>,
}

impl ReadProbe {
    /// Relative paths (store-root-relative, `/`-separated) read so far.
    pub fn paths(&self) -> BTreeSet<String> {
        self.reads.lock().unwrap().clone()
    }

    pub fn clear(&self) {
        self.reads.lock().unwrap().clear();
    }

    fn record(&self, rel: &str) {
        self.reads.lock().unwrap().insert(rel.to_string());
    }
}

/// The document store. Handles may be shared across threads.
pub struct DocStore {
    root: PathBuf,
    writer: Mutex<log::LogWriter>,
    clock: SharedClock,
    probe: RwLock<Option<ReadProbe>>,
}

impl DocStore {
    /// Open (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        Self::open_with_clock(root, system_clock())
    }

    /// Open with an injected clock; scripted clocks make event timestamps
    /// (and therefore whole trees) reproducible.
    pub fn open_with_clock(root: impl Into<PathBuf>, clock: SharedClock) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| io_err(&root, e))?;
        let writer = log::LogWriter::open(&root)?;
        Ok(DocStore {
            root,
            writer: Mutex::new(writer),
            clock,
            probe: RwLock::new(None),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Highest version in the log (0 for an empty store).
    pub fn max_version(&self) -> u64 {
        self.writer.lock().unwrap().next_version() - 1
    }

    /// Attach a fresh read probe, returning a handle to it.
    pub fn attach_read_probe(&self) -> ReadProbe {
        let probe = ReadProbe::default();
        *self.probe.write().unwrap() = Some(probe.clone());
        probe
    }

    pub fn detach_read_probe(&self) {
        *self.probe.write().unwrap() = None;
    }

    fn record_read(&self, abs: &Path) {
        let guard = self.probe.read().unwrap();
        if let Some(probe) = guard.as_ref() {
            if let Ok(rel) = abs.strip_prefix(&self.root) {
                probe.record(&rel.to_string_lossy().replace('\\', "/"));
            }
        }
    }

    fn read_file(&self, abs: &Path) -> Result<String, StoreError> {
        let text = fs::read_to_string(abs).map_err(|e| io_err(abs, e))?;
        self.record_read(abs);
        Ok(text)
    }

    /// Append a page. Exactly one mutation event is written, with
    /// version = previous max + 1.
    pub fn append_page(
        &self,
        path: &NodePath,
        header: ProvenanceHeader,
        body: &str,
        priority: bool,
        access: WriteAccess<'_>,
    ) -> Result<MutationEvent, StoreError> {
        path.expect_kind(PathKind::Leaf)?;
        if let WriteAccess::Leased(authority) = access {
            let patient = path.patient_id().expect("leaf has a patient");
            authority
                .authorize(patient)
                .map_err(StoreError::LeaseRequired)?;
        }

        // The whole append is one write region: revision resolution, page
        // write, and log append must not interleave with another writer.
        let mut writer = self.writer.lock().unwrap();
        let version = writer.next_version();

        let parent = self.root.join(path.parent().expect("leaf has parent").to_fs_path());
        fs::create_dir_all(&parent).map_err(|e| io_err(&parent, e))?;

        let revision = self.highest_revision(path)?.map(|r| r + 1).unwrap_or(1);
        let page_ref = PageRef { path: path.clone(), revision };
        let file = self.root.join(page_ref.to_fs_path());

        let page = Page {
            path: path.clone(),
            provenance: header,
            body: body.to_string(),
            version_at_write: version,
        };
        let mut f = fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&file)
            .map_err(|e| io_err(&file, e))?;
        f.write_all(page.render().as_bytes()).map_err(|e| io_err(&file, e))?;
        f.flush().map_err(|e| io_err(&file, e))?;

        let event = MutationEvent {
            version,
            doc_id: path.clone(),
            page_ref,
            writer_role: page.provenance.writer_role,
            priority,
            timestamp: self.clock.now_millis(),
        };
        writer.append(&event)?;
        Ok(event)
    }

    /// Read the highest-revision page at a leaf path.
    pub fn read_page(&self, path: &NodePath) -> Result<Page, StoreError> {
        path.expect_kind(PathKind::Leaf)?;
        let revision = self
            .highest_revision(path)?
            .ok_or_else(|| StoreError::NotFound(path.clone()))?;
        self.read_page_ref(&PageRef { path: path.clone(), revision })
    }

    /// Read one concrete page revision.
    pub fn read_page_ref(&self, page_ref: &PageRef) -> Result<Page, StoreError> {
        let file = self.root.join(page_ref.to_fs_path());
        if !file.exists() {
            return Err(StoreError::NotFound(page_ref.path.clone()));
        }
        let raw = self.read_file(&file)?;
        Page::parse(page_ref.path.clone(), &raw).map_err(|source| StoreError::Format { path: file, source })
    }

    /// All events with version > `since_version`, in version order.
    pub fn mutation_log(&self, since_version: u64) -> Result<Vec<MutationEvent>, StoreError> {
        let log_path = self.root.join(LOG_FILE);
        if !log_path.exists() {
            return Ok(Vec::new());
        }
        let events = read_log(&log_path)?;
        Ok(events.into_iter().filter(|e| e.version > since_version).collect())
    }

    /// Children of an internal node, lexicographic by segment. Revision
    /// files collapse onto their logical document.
    pub fn list_children(&self, path: &NodePath) -> Result<Vec<NodePath>, StoreError> {
        if path.is_leaf() {
            return Err(PathError::WrongKind { expected: PathKind::Admission, got: PathKind::Leaf }.into());
        }
        let dir = self.root.join(path.to_fs_path());
        if !dir.exists() {
            return Err(StoreError::NotFound(path.clone()));
        }
        let mut names = BTreeSet::new();
        let entries = fs::read_dir(&dir).map_err(|e| io_err(&dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| io_err(&dir, e))?;
            let name = entry.file_name().to_string_lossy().to_string();
            match path.kind() {
                PathKind::Root => {
                    if entry.path().is_dir() && path::is_patient_segment(&name) {
                        names.insert(name);
                    }
                }
                PathKind::Patient => {
                    if entry.path().is_dir() && path::is_admission_segment(&name) {
                        names.insert(name);
                    }
                }
                PathKind::Admission => {
                    if entry.path().is_file() && path::is_leaf_segment(&name) {
                        names.insert(logical_doc_name(&name));
                    }
                }
                PathKind::Leaf => unreachable!(),
            }
        }
        names.into_iter().map(|n| path.child(&n).map_err(Into::into)).collect()
    }

    /// True if at least one revision of the leaf exists.
    pub fn leaf_exists(&self, path: &NodePath) -> bool {
        matches!(self.highest_revision(path), Ok(Some(_)))
    }

    fn highest_revision(&self, path: &NodePath) -> Result<Option<u32>, StoreError> {
        let doc = path.doc_name().expect("leaf path");
        let parent = self.root.join(path.parent().expect("leaf has parent").to_fs_path());
        if !parent.exists() {
            return Ok(None);
        }
        let stem = doc.strip_suffix(".md").unwrap_or(doc);
        let mut best: Option<u32> = None;
        let entries = fs::read_dir(&parent).map_err(|e| io_err(&parent, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| io_err(&parent, e))?;
            let name = entry.file_name().to_string_lossy().to_string();
            if name == *doc {
                best = Some(best.unwrap_or(0).max(1));
            } else if let Some(rev) = parse_revision_name(&name, stem) {
                best = Some(best.unwrap_or(0).max(rev));
            }
        }
        Ok(best)
    }

    /// All revisions of a leaf, ascending.
    pub fn revisions(&self, path: &NodePath) -> Result<Vec<PageRef>, StoreError> {
        let highest = self.highest_revision(path)?.unwrap_or(0);
        Ok((1..=highest)
            .map(|revision| PageRef { path: path.clone(), revision })
            .filter(|r| self.root.join(r.to_fs_path()).exists())
            .collect())
    }

    // Manifest files are index artifacts maintained by the manifest module;
    // they are the only store files that get rewritten in place (atomically).

    pub fn manifest_fs_path(&self, node: &NodePath) -> PathBuf {
        self.root.join(node.to_fs_path()).join(MANIFEST_FILE)
    }

    /// Raw manifest text at an internal node, if present. Recorded by the
    /// read probe.
    pub fn read_manifest_text(&self, node: &NodePath) -> Result<Option<String>, StoreError> {
        let file = self.manifest_fs_path(node);
        if !file.exists() {
            return Ok(None);
        }
        Ok(Some(self.read_file(&file)?))
    }

    /// Atomically (re)write a manifest file.
    pub fn write_manifest_text(&self, node: &NodePath, text: &str) -> Result<(), StoreError> {
        let file = self.manifest_fs_path(node);
        let dir = file.parent().expect("manifest has parent");
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let tmp = dir.join(".manifest.tmp");
        fs::write(&tmp, text).map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, &file).map_err(|e| io_err(&file, e))?;
        Ok(())
    }
}

/// `x.rev3.md` collapses to `x.md`; plain names pass through.
pub fn logical_doc_name(file_name: &str) -> String {
    if let Some(stem) = file_name.strip_suffix(".md") {
        if let Some(i) = stem.rfind(".rev") {
            if stem[i + 4..].bytes().all(|b| b.is_ascii_digit()) && !stem[i + 4..].is_empty() {
                return format!("{}.md", &stem[..i]);
            }
        }
    }
    file_name.to_string()
}

fn parse_revision_name(file_name: &str, stem: &str) -> Option<u32> {
    let rest = file_name.strip_prefix(stem)?;
    let rev = rest.strip_prefix(".rev")?.strip_suffix(".md")?;
    rev.parse().ok()
}

/// What a tree hash covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeScope {
    /// Page files only — the document tree proper.
    Documents,
    /// Page files plus manifest index files.
    WithManifests,
}

/// SHA-256 over sorted (relative path, bytes) pairs of the tree.
///
/// The mutation log and lease records are metadata, never part of the hash.
pub fn tree_hash(root: &Path, scope: TreeScope) -> Result<String, StoreError> {
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| StoreError::Io {
            path: root.to_path_buf(),
            source: e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk error")),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(root).expect("under root");
        let first = rel.components().next().map(|c| c.as_os_str().to_string_lossy().to_string());
        if first.as_deref() == Some(LEASE_DIR) {
            continue;
        }
        let name = entry.file_name().to_string_lossy();
        if name == LOG_FILE || name.starts_with('.') {
            continue;
        }
        if name == MANIFEST_FILE && scope == TreeScope::Documents {
            continue;
        }
        if rel.components().count() > 1 || name.ends_with(".md") {
            files.push(rel.to_path_buf());
        }
    }
    files.sort();
    let mut hasher = Sha256::new();
    for rel in files {
        hasher.update(rel.to_string_lossy().replace('\\', "/").as_bytes());
        hasher.update([0]);
        let bytes = fs::read(root.join(&rel)).map_err(|e| io_err(&rel, e))?;
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hex_digest(hasher))
}

fn hex_digest(hasher: Sha256) -> String {
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Replay a mutation log into a fresh root, copying each referenced page
/// revision in version order. The resulting document tree is byte-identical
/// to the source's.
pub fn replay_log(source: &DocStore, target_root: &Path) -> Result<(), StoreError> {
    fs::create_dir_all(target_root).map_err(|e| io_err(target_root, e))?;
    let events = source.mutation_log(0)?;
    let mut log_lines = String::new();
    for event in &events {
        let src = source.root().join(event.page_ref.to_fs_path());
        let bytes = fs::read(&src).map_err(|e| io_err(&src, e))?;
        let dst = target_root.join(event.page_ref.to_fs_path());
        let parent = dst.parent().expect("leaf has parent");
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        fs::write(&dst, bytes).map_err(|e| io_err(&dst, e))?;
        log_lines.push_str(&serde_json::to_string(event).expect("event serializes"));
        log_lines.push('\n');
    }
    let log_path = target_root.join(LOG_FILE);
    fs::write(&log_path, log_lines).map_err(|e| io_err(&log_path, e))?;
    Ok(())
}
