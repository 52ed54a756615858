//! Frozen chunk embeddings behind one lookup interface.
//!
//! Three providers implement [`EmbeddingProvider`]:
//! - [`FileStore`], the on-disk binary store written by an external encoder
//!   (or by [`write_store`]);
//! - [`HashEmbedder`], a deterministic stand-in encoder for tests;
//! - [`InMemoryStore`].
//!
//! # Binary format
//!
//! All integers little-endian.
//!
//! ```text
//! header  : magic "HDEMB\0\0\x01" (8) | dim u32 | doc_count u64 | encoder_tag [u8; 32] (ASCII, NUL padded)
//! index   : doc_count × ( id_len u16 | id bytes | n_chunks u32 | payload_offset u64 )
//! payload : per document, n_chunks × dim f32, row-major
//! ```
//!
//! `payload_offset` is an absolute byte offset from the start of the file.

mod file;
mod hash;

use std::collections::HashMap;
use std::path::PathBuf;

use crate::chunker::ChunkedDocument;

pub use file::{write_store, FileStore, StoreWriter, HEADER_LEN, MAGIC, TAG_LEN};
pub use hash::{hash_embed, ClassSignal, HashEmbedder};

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic bytes; not an embedding store")]
    BadMagic,
    #[error("store is truncated: {0}")]
    Truncated(String),
    #[error("corrupt store: {0}")]
    Corrupt(String),
    #[error("doc_id {0:?} not found")]
    NotFound(String),
    #[error("duplicate doc_id {0:?}")]
    DuplicateId(String),
    #[error("doc {doc_id:?} has width {got}, store dim is {dim}")]
    DimMismatch { doc_id: String, dim: usize, got: usize },
    #[error("doc {0:?} has no rows")]
    NoRows(String),
    #[error("doc {0:?} contains a non-finite value")]
    NonFinite(String),
    #[error("encoder tag {0:?} must be ASCII and at most 32 bytes")]
    BadTag(String),
    #[error("doc_id {0:?} is too long for the index")]
    IdTooLong(String),
    #[error("writer expected doc {expected:?}, got {got:?}")]
    OutOfOrder { expected: String, got: String },
    #[error("cannot embed an empty chunk")]
    EmptyChunk,
    #[error("dim must be at least {min}, got {got}")]
    DimTooSmall { min: usize, got: usize },
    #[error("class signal needs dim > label id ({label} >= {dim})")]
    LabelOutOfRange { label: usize, dim: usize },
}

/// One document's chunk embeddings, `n_chunks × dim`, row `i` = chunk `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DocEmbedding {
    pub doc_id: String,
    n_chunks: usize,
    dim: usize,
    data: Vec<f32>,
}

impl DocEmbedding {
    /// Validates shape and finiteness.
    pub fn new(doc_id: impl Into<String>, dim: usize, data: Vec<f32>) -> Result<Self, EmbedError> {
        let doc_id = doc_id.into();
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(EmbedError::DimMismatch { doc_id, dim, got: data.len() });
        }
        if data.is_empty() {
            return Err(EmbedError::NoRows(doc_id));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite(doc_id));
        }
        Ok(Self { doc_id, n_chunks: data.len() / dim, dim, data })
    }

    pub fn from_rows(doc_id: impl Into<String>, rows: &[Vec<f32>]) -> Result<Self, EmbedError> {
        let doc_id = doc_id.into();
        let dim = rows.first().map(Vec::len).ok_or_else(|| EmbedError::NoRows(doc_id.clone()))?;
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(EmbedError::DimMismatch { doc_id, dim, got: r.len() });
        }
        Self::new(doc_id, dim, rows.concat())
    }

    pub fn n_chunks(&self) -> usize {
        self.n_chunks
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Read-only access to frozen chunk embeddings. Lookups of the same id
/// always return identical values.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    fn encoder_tag(&self) -> &str;

    fn lookup(&self, doc_id: &str) -> Result<DocEmbedding, EmbedError>;

    /// Row count for `doc_id`; providers with an index can answer without
    /// reading the payload.
    fn n_chunks(&self, doc_id: &str) -> Result<usize, EmbedError> {
        self.lookup(doc_id).map(|e| e.n_chunks())
    }
}

#[derive(Debug, Clone, Default)]
pub struct InMemoryStore {
    dim: usize,
    tag: String,
    docs: HashMap<String, DocEmbedding>,
}

impl InMemoryStore {
    pub fn new(dim: usize, tag: impl Into<String>) -> Self {
        Self { dim, tag: tag.into(), docs: HashMap::new() }
    }

    pub fn insert(&mut self, emb: DocEmbedding) -> Result<(), EmbedError> {
        let got = emb.dim();
        if got != self.dim {
            return Err(EmbedError::DimMismatch { doc_id: emb.doc_id, dim: self.dim, got });
        }
        if self.docs.contains_key(&emb.doc_id) {
            return Err(EmbedError::DuplicateId(emb.doc_id));
        }
        self.docs.insert(emb.doc_id.clone(), emb);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

impl EmbeddingProvider for InMemoryStore {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encoder_tag(&self) -> &str {
        &self.tag
    }

    fn lookup(&self, doc_id: &str) -> Result<DocEmbedding, EmbedError> {
        self.docs.get(doc_id).cloned().ok_or_else(|| EmbedError::NotFound(doc_id.to_owned()))
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn encoder_tag(&self) -> &str {
        (**self).encoder_tag()
    }

    fn lookup(&self, doc_id: &str) -> Result<DocEmbedding, EmbedError> {
        (**self).lookup(doc_id)
    }

    fn n_chunks(&self, doc_id: &str) -> Result<usize, EmbedError> {
        (**self).n_chunks(doc_id)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub checked: usize,
    pub missing: Vec<String>,
    /// `(doc_id, chunk count, stored row count)`.
    pub mismatched: Vec<(String, usize, usize)>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.missing.is_empty() && self.mismatched.is_empty()
    }
}

/// Checks that every chunked document has an embedding with one row per chunk.
pub fn verify(docs: &[ChunkedDocument], provider: &dyn EmbeddingProvider) -> Result<VerifyReport, EmbedError> {
    let mut report = VerifyReport::default();
    for d in docs {
        report.checked += 1;
        match provider.n_chunks(&d.doc_id) {
            Ok(rows) if rows == d.n_chunks() => {}
            Ok(rows) => report.mismatched.push((d.doc_id.clone(), d.n_chunks(), rows)),
            Err(EmbedError::NotFound(_)) => report.missing.push(d.doc_id.clone()),
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}
