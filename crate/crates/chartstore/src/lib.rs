//! Manifest-indexed hierarchical document store for longitudinal patient records.
//!
//! The crate is organized around a filesystem substrate and the layers built
//! on top of it:
//!
//! - [`store`] — versioned, append-only document tree
//!   (`S{patient}/hadm_{admission}/<doc>.md`) with a global JSON-Lines
//!   mutation log and provenance headers on every page.
//! - [`manifest`] — per-directory `manifest.md` index files (Child / Type /
//!   Date / Scope tables) with incremental, locality-bounded maintenance.
//! - [`retrieval`] — progressive-disclosure navigation over the manifest
//!   tree with pluggable child selectors and interpretable traces.
//! - [`rag`] — flat and metadata-filtered dense-retrieval baselines
//!   (section-aware chunking, hashed bag-of-tokens embeddings, composite
//!   document ranking).
//! - [`coordination`] — patient-scoped filesystem leases and a
//!   priority-aware event broker over the mutation log.
//! - [`scenario`] — scripted multi-agent clinical workflows that exercise
//!   the coordination layer end-to-end.
//! - [`bench`] — synthetic corpus generator, tiered query generation, and
//!   the retrieval metrics engine.

pub mod bench;
pub mod coordination;
pub mod manifest;
pub mod rag;
pub mod retrieval;
pub mod scenario;
pub mod store;
pub mod text;

pub use store::{DocStore, DocType, MutationEvent, NodePath, Page, ProvenanceHeader, WriterRole};
