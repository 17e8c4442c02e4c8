//! Section-aware chunking.
//!
//! Documents split on Markdown headings; a document with no headings falls
//! back to paragraph boundaries (greedily packed). Any section longer than
//! the window is re-split by a 512-token sliding window with 64-token
//! overlap. Spans are token offsets into the document's token sequence, so
//! dropping overlap regions and concatenating spans reproduces it exactly.

use serde::{Deserialize, Serialize};

use crate::store::{NodePath, Page};
use crate::text::{tokenize_spans, Token};

/// Maximum tokens per chunk.
pub const CHUNK_TOKENS: usize = 512;
/// Tokens shared by consecutive sliding-window chunks.
pub const CHUNK_OVERLAP: usize = 64;
const STRIDE: usize = CHUNK_TOKENS - CHUNK_OVERLAP;

/// A chunk of one source document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub source: NodePath,
    /// Heading text of the enclosing section, when the document had one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<String>,
    /// Token-offset span `[start, end)` into the document token sequence.
    pub span: (usize, usize),
    pub text: String,
}

struct Section {
    heading: Option<String>,
    /// Token-index range into the document token sequence.
    tokens: (usize, usize),
}

/// Split a page into chunks. An empty body yields no chunks.
pub fn chunk_document(page: &Page) -> Vec<Chunk> {
    let body = &page.body;
    let tokens = tokenize_spans(body);
    if tokens.is_empty() {
        return Vec::new();
    }
    let sections = split_sections(body, &tokens);
    let mut chunks = Vec::new();
    for section in sections {
        let (start, end) = section.tokens;
        if end - start <= CHUNK_TOKENS {
            chunks.push(make_chunk(page, body, &tokens, section.heading.clone(), start, end));
            continue;
        }
        let mut w = start;
        loop {
            let w_end = (w + CHUNK_TOKENS).min(end);
            chunks.push(make_chunk(page, body, &tokens, section.heading.clone(), w, w_end));
            if w_end == end {
                break;
            }
            w += STRIDE;
        }
    }
    chunks
}

fn make_chunk(
    page: &Page,
    body: &str,
    tokens: &[Token],
    section: Option<String>,
    start: usize,
    end: usize,
) -> Chunk {
    let byte_start = tokens[start].start;
    let byte_end = tokens[end - 1].end;
    Chunk {
        source: page.path.clone(),
        section,
        span: (start, end),
        text: body[byte_start..byte_end].to_string(),
    }
}

fn is_heading(line: &str) -> bool {
    line.trim_start().starts_with('#')
}

fn heading_text(line: &str) -> String {
    line.trim_start().trim_start_matches('#').trim().to_string()
}

/// Byte-range sections covering the whole document: heading-delimited when
/// headings exist, else paragraph groups of at most [`CHUNK_TOKENS`] tokens.
fn split_sections(body: &str, tokens: &[Token]) -> Vec<Section> {
    let has_headings = body.lines().any(is_heading);
    let ranges: Vec<(Option<String>, usize, usize)> = if has_headings {
        heading_ranges(body)
    } else {
        paragraph_ranges(body, tokens)
    };
    ranges
        .into_iter()
        .filter_map(|(heading, b_start, b_end)| {
            let t_start = tokens.partition_point(|t| t.start < b_start);
            let t_end = tokens.partition_point(|t| t.start < b_end);
            (t_end > t_start).then_some(Section { heading, tokens: (t_start, t_end) })
        })
        .collect()
}

fn heading_ranges(body: &str) -> Vec<(Option<String>, usize, usize)> {
    let mut bounds: Vec<(Option<String>, usize)> = vec![(None, 0)];
    let mut offset = 0;
    for line in body.split_inclusive('\n') {
        if is_heading(line.trim_end_matches('\n')) {
            bounds.push((Some(heading_text(line)), offset));
        }
        offset += line.len();
    }
    let mut out = Vec::new();
    for i in 0..bounds.len() {
        let end = bounds.get(i + 1).map(|b| b.1).unwrap_or(body.len());
        out.push((bounds[i].0.clone(), bounds[i].1, end));
    }
    out
}

/// Greedily pack consecutive paragraphs into groups of at most
/// [`CHUNK_TOKENS`] tokens; a single oversized paragraph stays whole (the
/// window pass re-splits it).
fn paragraph_ranges(body: &str, tokens: &[Token]) -> Vec<(Option<String>, usize, usize)> {
    let mut paras: Vec<(usize, usize)> = Vec::new();
    let mut offset = 0;
    let mut para_start: Option<usize> = None;
    for line in body.split_inclusive('\n') {
        if line.trim().is_empty() {
            if let Some(s) = para_start.take() {
                paras.push((s, offset));
            }
        } else if para_start.is_none() {
            para_start = Some(offset);
        }
        offset += line.len();
    }
    if let Some(s) = para_start {
        paras.push((s, body.len()));
    }

    let count = |b_start: usize, b_end: usize| {
        tokens.partition_point(|t| t.start < b_end) - tokens.partition_point(|t| t.start < b_start)
    };
    let mut out: Vec<(Option<String>, usize, usize)> = Vec::new();
    let mut group: Option<(usize, usize)> = None;
    for (s, e) in paras {
        match group {
            Some((gs, ge)) if count(gs, e) <= CHUNK_TOKENS => group = Some((gs, e.max(ge))),
            Some((gs, ge)) => {
                out.push((None, gs, ge));
                group = Some((s, e));
            }
            None => group = Some((s, e)),
        }
    }
    if let Some((gs, ge)) = group {
        out.push((None, gs, ge));
    }
    out
}
