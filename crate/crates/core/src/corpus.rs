//! Source documents and the anchors that tie canvas evidence to them.
//!
//! Text is NFC-normalized once at ingestion and every offset afterwards counts
//! Unicode scalar values of the normalized page text. Anchors are page-scoped.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::ids::DocId;
use crate::text::{char_len, char_slice, sha256_hex};

pub const CORPUS_SCHEMA: &str = "corpus/1";

/// A highlightable region of a page: a character range plus a bounding box
/// given as fractions of the page size (`[x, y, w, h]`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawBlock", into = "RawBlock")]
pub struct GeometryBlock {
    pub char_start: usize,
    pub char_end: usize,
    pub bbox: [f64; 4],
}

type RawBlock = (usize, usize, [f64; 4]);

impl From<RawBlock> for GeometryBlock {
    fn from((char_start, char_end, bbox): RawBlock) -> Self {
        Self {
            char_start,
            char_end,
            bbox,
        }
    }
}

impl From<GeometryBlock> for RawBlock {
    fn from(b: GeometryBlock) -> Self {
        (b.char_start, b.char_end, b.bbox)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageBlock {
    pub page_no: u32,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<GeometryBlock>>,
}

/// Wire format for ingestion and for test fixtures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestPayload {
    pub schema: String,
    pub title: String,
    pub pages: Vec<PageBlock>,
}

impl IngestPayload {
    pub fn from_texts(title: &str, pages: &[&str]) -> Self {
        Self {
            schema: CORPUS_SCHEMA.to_string(),
            title: title.to_string(),
            pages: pages
                .iter()
                .enumerate()
                .map(|(i, text)| PageBlock {
                    page_no: i as u32 + 1,
                    text: text.to_string(),
                    blocks: None,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub doc_id: DocId,
    pub title: String,
    pub pages: Vec<PageBlock>,
    pub checksum: String,
}

impl SourceDocument {
    pub fn page(&self, page_no: u32) -> Option<&PageBlock> {
        let index = page_no.checked_sub(1)? as usize;
        self.pages.get(index)
    }

    /// The payload that reproduces this document when ingested.
    pub fn to_payload(&self) -> IngestPayload {
        IngestPayload {
            schema: CORPUS_SCHEMA.to_string(),
            title: self.title.clone(),
            pages: self.pages.clone(),
        }
    }
}

/// Checksum over the page texts. Each page is length-prefixed so that page
/// boundaries are part of the digest.
pub fn document_checksum<'a>(pages: impl IntoIterator<Item = &'a str>) -> String {
    let mut buf = Vec::new();
    for text in pages {
        buf.extend_from_slice(&(text.len() as u64).to_le_bytes());
        buf.extend_from_slice(text.as_bytes());
    }
    sha256_hex(buf)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Anchor {
    pub doc_id: DocId,
    pub page_no: u32,
    pub char_start: usize,
    pub char_end: usize,
    pub quote: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorVerdict {
    Valid,
    Mismatch,
    UnknownDocument,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("unsupported payload schema `{0}`")]
    UnsupportedSchema(String),
    #[error("document has no non-whitespace text")]
    EmptyDocument,
    #[error("pages must be numbered 1..=P in order; position {position} has page_no {found}")]
    PageNumbering { position: usize, found: u32 },
    #[error("geometry block {index} on page {page_no}: {reason}")]
    MalformedGeometry {
        page_no: u32,
        index: usize,
        reason: String,
    },
    #[error("unknown document `{0}`")]
    UnknownDocument(DocId),
    #[error("range [{start}, {end}) is out of bounds for page {page_no}")]
    RangeOutOfBounds { page_no: u32, start: usize, end: usize },
}

impl CorpusError {
    pub fn code(&self) -> &'static str {
        match self {
            CorpusError::UnsupportedSchema(_) => "unknown_schema_version",
            CorpusError::EmptyDocument => "empty_document",
            CorpusError::PageNumbering { .. } => "malformed_payload",
            CorpusError::MalformedGeometry { .. } => "malformed_geometry",
            CorpusError::UnknownDocument(_) => "unknown_document",
            CorpusError::RangeOutOfBounds { .. } => "range_out_of_bounds",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IngestOutcome {
    pub doc_id: DocId,
    /// False when an identical document was already stored.
    pub created: bool,
}

/// Immutable document store. Documents are shared behind `Arc` so readers can
/// hold them past the store's lock.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    docs: BTreeMap<DocId, Arc<SourceDocument>>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ingest_document(&mut self, payload: IngestPayload) -> Result<IngestOutcome, CorpusError> {
        let doc = prepare_document(payload)?;
        if self.docs.contains_key(&doc.doc_id) {
            return Ok(IngestOutcome {
                doc_id: doc.doc_id,
                created: false,
            });
        }
        let doc_id = doc.doc_id.clone();
        self.docs.insert(doc_id.clone(), Arc::new(doc));
        Ok(IngestOutcome {
            doc_id,
            created: true,
        })
    }

    pub fn get(&self, doc_id: &DocId) -> Option<&Arc<SourceDocument>> {
        self.docs.get(doc_id)
    }

    pub fn contains(&self, doc_id: &DocId) -> bool {
        self.docs.contains_key(doc_id)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> impl Iterator<Item = &Arc<SourceDocument>> {
        self.docs.values()
    }

    pub fn extract_snippet(
        &self,
        doc_id: &DocId,
        page_no: u32,
        char_start: usize,
        char_end: usize,
    ) -> Result<Anchor, CorpusError> {
        let doc = self
            .docs
            .get(doc_id)
            .ok_or_else(|| CorpusError::UnknownDocument(doc_id.clone()))?;
        let out_of_bounds = || CorpusError::RangeOutOfBounds {
            page_no,
            start: char_start,
            end: char_end,
        };
        let page = doc.page(page_no).ok_or_else(out_of_bounds)?;
        if char_start >= char_end {
            return Err(out_of_bounds());
        }
        let quote = char_slice(&page.text, char_start, char_end).ok_or_else(out_of_bounds)?;
        Ok(Anchor {
            doc_id: doc_id.clone(),
            page_no,
            char_start,
            char_end,
            quote: quote.to_string(),
        })
    }

    pub fn verify_anchor(&self, anchor: &Anchor) -> AnchorVerdict {
        let Some(doc) = self.docs.get(&anchor.doc_id) else {
            return AnchorVerdict::UnknownDocument;
        };
        let matches = anchor.char_start < anchor.char_end
            && doc
                .page(anchor.page_no)
                .and_then(|p| char_slice(&p.text, anchor.char_start, anchor.char_end))
                .is_some_and(|q| q == anchor.quote);
        if matches {
            AnchorVerdict::Valid
        } else {
            AnchorVerdict::Mismatch
        }
    }
}

fn prepare_document(payload: IngestPayload) -> Result<SourceDocument, CorpusError> {
    if payload.schema != CORPUS_SCHEMA {
        return Err(CorpusError::UnsupportedSchema(payload.schema));
    }
    if payload.pages.is_empty() {
        return Err(CorpusError::EmptyDocument);
    }
    let mut pages = Vec::with_capacity(payload.pages.len());
    for (position, page) in payload.pages.into_iter().enumerate() {
        if page.page_no as usize != position + 1 {
            return Err(CorpusError::PageNumbering {
                position,
                found: page.page_no,
            });
        }
        let text: String = page.text.nfc().collect();
        if let Some(blocks) = &page.blocks {
            validate_geometry(page.page_no, &text, blocks)?;
        }
        pages.push(PageBlock {
            page_no: page.page_no,
            text,
            blocks: page.blocks,
        });
    }
    if pages.iter().all(|p| p.text.trim().is_empty()) {
        return Err(CorpusError::EmptyDocument);
    }
    let checksum = document_checksum(pages.iter().map(|p| p.text.as_str()));
    Ok(SourceDocument {
        doc_id: DocId(format!("doc-{}", &checksum[..16])),
        title: payload.title.nfc().collect(),
        pages,
        checksum,
    })
}

fn validate_geometry(page_no: u32, text: &str, blocks: &[GeometryBlock]) -> Result<(), CorpusError> {
    let len = char_len(text);
    for (index, block) in blocks.iter().enumerate() {
        let malformed = |reason: String| CorpusError::MalformedGeometry {
            page_no,
            index,
            reason,
        };
        if block.char_start >= block.char_end || block.char_end > len {
            return Err(malformed(format!(
                "offsets [{}, {}) not within page length {len}",
                block.char_start, block.char_end
            )));
        }
        if let Some(v) = block.bbox.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(malformed(format!("bbox component {v} outside [0, 1]")));
        }
    }
    Ok(())
}
