//! Shared tokenizer and small text helpers.
//!
//! One tokenizer feeds the chunker, the hashing embedder, and the lexical
//! selector so that token counts and overlap scores agree everywhere. A
//! token is a maximal run of alphanumerics or underscores, lowercased;
//! `hadm_20298053` and `lab_blood_gas` survive as single tokens.

/// A token with its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Lowercased token text.
    pub text: String,
    /// Byte offset of the token start in the source.
    pub start: usize,
    /// Byte offset one past the token end.
    pub end: usize,
}

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Tokenize with byte spans preserved.
pub fn tokenize_spans(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if is_token_char(c) {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            out.push(Token {
                text: text[s..i].to_lowercase(),
                start: s,
                end: i,
            });
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: text[s..].to_lowercase(),
            start: s,
            end: text.len(),
        });
    }
    out
}

/// Tokenize to lowercased strings.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_spans(text).into_iter().map(|t| t.text).collect()
}

/// Number of tokens in `text`.
pub fn token_count(text: &str) -> usize {
    tokenize_spans(text).len()
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "did", "do", "does", "for", "from", "had",
    "has", "have", "how", "in", "into", "is", "it", "its", "of", "on", "or", "s", "the", "this",
    "to", "was", "were", "what", "when", "which", "with",
];

/// True if `token` carries no retrieval signal.
pub fn is_stopword(token: &str) -> bool {
    token.len() <= 1 || STOPWORDS.contains(&token)
}

/// Distinct non-stopword tokens of `text`.
pub fn signal_tokens(text: &str) -> std::collections::BTreeSet<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !is_stopword(t))
        .collect()
}

/// Jaccard similarity of the signal-token sets of two strings.
///
/// Two empty sets count as identical (similarity 1.0).
pub fn token_jaccard(a: &str, b: &str) -> f64 {
    let sa = signal_tokens(a);
    let sb = signal_tokens(b);
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    let inter = sa.intersection(&sb).count();
    let union = sa.union(&sb).count();
    inter as f64 / union as f64
}

/// First sentence of `text`: up to and including the first `.` that ends a
/// word, else the first non-empty line.
pub fn first_sentence(text: &str) -> &str {
    let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let line = line.trim();
    match line.find(". ") {
        Some(i) => &line[..=i],
        None => line,
    }
}

/// Truncate to at most `max` bytes on a char boundary.
pub fn truncate_chars(text: &str, max: usize) -> &str {
    if text.len() <= max {
        return text;
    }
    let mut end = max;
    while end > 0 && !text.is_char_boundary(end) {
        end -= 1;
    }
    &text[..end]
}
