//! Chunk index: embedded chunks with source metadata, persisted as a JSON
//! header and metadata lines followed by a flat little-endian f32 table.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chunk::{chunk_document, Chunk};
use super::embed::Embedder;
use super::RagError;
use crate::store::{tree_hash, DocStore, NodePath, TreeScope};

/// Metadata for one embedded chunk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexedChunk {
    pub source: NodePath,
    pub patient: String,
    pub admission: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<String>,
    pub span: (usize, usize),
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexHeader {
    dimension: usize,
    embedder: String,
    corpus_hash: String,
    chunks: usize,
}

/// Embedded corpus: one vector per chunk, vectors L2-normalized.
pub struct ChunkIndex {
    pub dimension: usize,
    pub embedder_id: String,
    pub corpus_hash: String,
    chunks: Vec<IndexedChunk>,
    vectors: Vec<f32>,
    by_patient: HashMap<String, Vec<usize>>,
    by_admission: HashMap<String, Vec<usize>>,
}

impl ChunkIndex {
    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunk(&self, i: usize) -> &IndexedChunk {
        &self.chunks[i]
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dimension..(i + 1) * self.dimension]
    }

    /// Chunk ids under one patient.
    pub fn patient_pool(&self, patient: &str) -> &[usize] {
        self.by_patient.get(patient).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Chunk ids under one admission.
    pub fn admission_pool(&self, admission: &str) -> &[usize] {
        self.by_admission.get(admission).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All chunk ids.
    pub fn full_pool(&self) -> Vec<usize> {
        (0..self.chunks.len()).collect()
    }

    fn from_parts(
        dimension: usize,
        embedder_id: String,
        corpus_hash: String,
        chunks: Vec<IndexedChunk>,
        vectors: Vec<f32>,
    ) -> Self {
        let mut by_patient: HashMap<String, Vec<usize>> = HashMap::new();
        let mut by_admission: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, c) in chunks.iter().enumerate() {
            by_patient.entry(c.patient.clone()).or_default().push(i);
            by_admission.entry(c.admission.clone()).or_default().push(i);
        }
        ChunkIndex { dimension, embedder_id, corpus_hash, chunks, vectors, by_patient, by_admission }
    }

    /// Persist to a single file.
    pub fn save(&self, path: &Path) -> Result<(), RagError> {
        let mut f = File::create(path)?;
        let header = IndexHeader {
            dimension: self.dimension,
            embedder: self.embedder_id.clone(),
            corpus_hash: self.corpus_hash.clone(),
            chunks: self.chunks.len(),
        };
        writeln!(f, "{}", serde_json::to_string(&header)?)?;
        for c in &self.chunks {
            writeln!(f, "{}", serde_json::to_string(c)?)?;
        }
        let mut bytes = Vec::with_capacity(self.vectors.len() * 4);
        for v in &self.vectors {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RagError> {
        let mut reader = BufReader::new(File::open(path)?);
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let header: IndexHeader = serde_json::from_str(&line)?;
        let mut chunks = Vec::with_capacity(header.chunks);
        for _ in 0..header.chunks {
            line.clear();
            reader.read_line(&mut line)?;
            chunks.push(serde_json::from_str(&line)?);
        }
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        let expected = header.chunks * header.dimension * 4;
        if bytes.len() != expected {
            return Err(RagError::BadIndexFile(format!(
                "vector table holds {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let vectors = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Ok(Self::from_parts(header.dimension, header.embedder, header.corpus_hash, chunks, vectors))
    }
}

/// Chunk and embed every leaf document of a frozen corpus.
pub fn build_index(store: &DocStore, embedder: &dyn Embedder) -> Result<ChunkIndex, RagError> {
    let corpus_hash =
        tree_hash(store.root(), TreeScope::Documents).map_err(|e| RagError::Store(Box::new(e)))?;
    let mut chunks: Vec<IndexedChunk> = Vec::new();
    let mut vectors: Vec<f32> = Vec::new();
    let dim = embedder.dimension();
    let root = NodePath::root();
    for patient in store.list_children(&root).map_err(|e| RagError::Store(Box::new(e)))? {
        for admission in store.list_children(&patient).map_err(|e| RagError::Store(Box::new(e)))? {
            for leaf in store.list_children(&admission).map_err(|e| RagError::Store(Box::new(e)))? {
                let page = store.read_page(&leaf).map_err(|e| RagError::Store(Box::new(e)))?;
                for chunk in chunk_document(&page) {
                    let v = embedder.embed(&chunk.text);
                    if v.len() != dim {
                        return Err(RagError::EmbedderFailure(format!(
                            "embedder returned {} dims, declared {dim}",
                            v.len()
                        )));
                    }
                    vectors.extend_from_slice(&v);
                    chunks.push(to_indexed(&chunk));
                }
            }
        }
    }
    Ok(ChunkIndex::from_parts(dim, embedder.id(), corpus_hash, chunks, vectors))
}

fn to_indexed(chunk: &Chunk) -> IndexedChunk {
    IndexedChunk {
        source: chunk.source.clone(),
        patient: chunk.source.patient_id().unwrap_or_default().to_string(),
        admission: chunk.source.admission_id().unwrap_or_default().to_string(),
        section: chunk.section.clone(),
        span: chunk.span,
    }
}
