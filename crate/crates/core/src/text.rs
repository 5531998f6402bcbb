//! Lexical primitives shared by ranking, naming and grounding: tokenization,
//! whole-word matching, TF-IDF vectors and content digests.

use std::collections::{BTreeMap, HashMap, HashSet};

use sha2::{Digest, Sha256};

/// Splits on every non-alphanumeric character and lowercases the pieces.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Case-insensitive whole-word containment: `needle` must occur in
/// `haystack` with no alphanumeric character directly before or after it.
pub fn contains_whole_word(haystack: &str, needle: &str) -> bool {
    let needle = needle.trim().to_lowercase();
    if needle.is_empty() {
        return false;
    }
    let haystack = haystack.to_lowercase();
    let mut from = 0;
    while let Some(offset) = haystack[from..].find(&needle) {
        let start = from + offset;
        let end = start + needle.len();
        let before_ok = haystack[..start]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric());
        let after_ok = haystack[end..]
            .chars()
            .next()
            .is_none_or(|c| !c.is_alphanumeric());
        if before_ok && after_ok {
            return true;
        }
        // advance by one character so overlapping occurrences are considered
        from = start + haystack[start..].chars().next().map_or(1, char::len_utf8);
    }
    false
}

/// Lowercase hex SHA-256 of `text`.
pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Substring by Unicode scalar offsets, `None` when the range is invalid.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
    let byte_start = indices.by_ref().nth(start)?;
    let byte_end = if end == start {
        byte_start
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[byte_start..byte_end])
}

/// Sparse term-weight vector. Ordered so float accumulation is reproducible.
pub type TermVector = BTreeMap<String, f64>;

/// Document-frequency table over a fixed document set.
///
/// `idf(t) = ln((N + 1) / (df(t) + 1)) + 1`, term frequency is the raw count,
/// and vectors are L2-normalized.
#[derive(Debug, Clone)]
pub struct TfIdf {
    n_docs: usize,
    df: HashMap<String, usize>,
}

impl TfIdf {
    pub fn fit<'a, I>(docs: I) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut n_docs = 0;
        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in docs {
            n_docs += 1;
            let unique: HashSet<&String> = doc.iter().collect();
            for term in unique {
                *df.entry(term.clone()).or_default() += 1;
            }
        }
        Self { n_docs, df }
    }

    pub fn idf(&self, term: &str) -> f64 {
        let df = self.df.get(term).copied().unwrap_or(0) as f64;
        ((self.n_docs as f64 + 1.0) / (df + 1.0)).ln() + 1.0
    }

    /// Raw `tf * idf` weights, not normalized.
    pub fn weights(&self, tokens: &[String]) -> TermVector {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for t in tokens {
            *tf.entry(t.clone()).or_default() += 1.0;
        }
        tf.into_iter()
            .map(|(term, count)| {
                let w = count * self.idf(&term);
                (term, w)
            })
            .collect()
    }

    pub fn vector(&self, tokens: &[String]) -> TermVector {
        let mut v = self.weights(tokens);
        let norm = v.values().map(|w| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.values_mut().for_each(|w| *w /= norm);
        }
        v
    }
}

/// Dot product of two normalized vectors, clamped to `[0, 1]`.
pub fn cosine(a: &TermVector, b: &TermVector) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small
        .iter()
        .filter_map(|(t, w)| large.get(t).map(|v| w * v))
        .sum();
    // an empty f64 sum is -0.0
    if dot > 0.0 {
        dot.min(1.0)
    } else {
        0.0
    }
}
