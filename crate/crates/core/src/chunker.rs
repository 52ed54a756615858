//! Fixed-size, non-overlapping chunking of token sequences.
//!
//! `chunks.jsonl` holds one [`ChunkedDocument`] per line and is the
//! alignment contract between this crate and any external encoder that
//! fills an embedding store.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Split;
use crate::textprep::TokenSequence;

pub const DEFAULT_MAX_CHUNKS: usize = 64;
pub const MIN_CHUNK_SIZE: usize = 20;
pub const MAX_CHUNK_SIZE: usize = 50;

#[derive(Debug, thiserror::Error)]
pub enum ChunkError {
    #[error("cannot chunk an empty token sequence")]
    EmptyTokens,
    #[error("chunk_size and max_chunks must be at least 1")]
    BadParams,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("document {doc_id:?} violates chunk invariants: {msg}")]
    Invalid { doc_id: String, msg: String },
}

/// A document as an ordered list of chunks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkedDocument {
    pub doc_id: String,
    /// Integer label id.
    #[serde(rename = "label")]
    pub label_id: usize,
    pub split: Split,
    pub chunks: Vec<TokenSequence>,
    /// True when tokens past `chunk_size * max_chunks` were dropped.
    pub truncated: bool,
}

impl ChunkedDocument {
    pub fn from_tokens(
        doc_id: impl Into<String>,
        label_id: usize,
        split: Split,
        tokens: &TokenSequence,
        chunk_size: usize,
        max_chunks: usize,
    ) -> Result<Self, ChunkError> {
        let (chunks, truncated) = chunk(tokens, chunk_size, max_chunks)?;
        Ok(Self { doc_id: doc_id.into(), label_id, split, chunks, truncated })
    }

    pub fn n_chunks(&self) -> usize {
        self.chunks.len()
    }

    pub fn n_tokens(&self) -> usize {
        self.chunks.iter().map(TokenSequence::len).sum()
    }

    /// Chunks joined with single spaces.
    pub fn text(&self) -> String {
        self.chunks.iter().map(TokenSequence::join).collect::<Vec<_>>().join(" ")
    }

    /// Checks the structural invariants against a given chunk size.
    pub fn validate(&self, chunk_size: usize, max_chunks: usize) -> Result<(), ChunkError> {
        let fail = |msg: String| Err(ChunkError::Invalid { doc_id: self.doc_id.clone(), msg });
        let n = self.chunks.len();
        if n == 0 || n > max_chunks {
            return fail(format!("{n} chunks, expected 1..={max_chunks}"));
        }
        for (i, c) in self.chunks.iter().enumerate() {
            let ok = if i + 1 < n { c.len() == chunk_size } else { (1..=chunk_size).contains(&c.len()) };
            if !ok {
                return fail(format!("chunk {i} has {} tokens (chunk_size {chunk_size})", c.len()));
            }
        }
        Ok(())
    }
}

/// Splits `tokens` into runs of `chunk_size`, keeping a short trailing run
/// and at most `max_chunks` chunks. Returns the chunks and a truncation flag.
pub fn chunk(
    tokens: &TokenSequence,
    chunk_size: usize,
    max_chunks: usize,
) -> Result<(Vec<TokenSequence>, bool), ChunkError> {
    if chunk_size == 0 || max_chunks == 0 {
        return Err(ChunkError::BadParams);
    }
    if tokens.is_empty() {
        return Err(ChunkError::EmptyTokens);
    }
    let limit = chunk_size.saturating_mul(max_chunks);
    let kept = &tokens.tokens()[..tokens.len().min(limit)];
    let chunks = kept.chunks(chunk_size).map(TokenSequence::from_slice).collect();
    Ok((chunks, tokens.len() > limit))
}

/// Chunk size from a dataset's average length: 20 words for short-document
/// datasets (average under 100 words), 50 otherwise.
pub fn choose_chunk_size(avg_words: f64) -> usize {
    if avg_words < 100.0 {
        MIN_CHUNK_SIZE
    } else {
        MAX_CHUNK_SIZE
    }
}

pub fn write_jsonl<W: Write>(mut writer: W, docs: &[ChunkedDocument]) -> Result<(), ChunkError> {
    for d in docs {
        serde_json::to_writer(&mut writer, d).map_err(|source| ChunkError::Json { line: 0, source })?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_jsonl_file(path: &Path, docs: &[ChunkedDocument]) -> Result<(), ChunkError> {
    write_jsonl(BufWriter::new(File::create(path)?), docs)
}

/// Reads `chunks.jsonl`, skipping blank lines.
pub fn read_jsonl<R: Read>(reader: R) -> Result<Vec<ChunkedDocument>, ChunkError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: ChunkedDocument =
            serde_json::from_str(&line).map_err(|source| ChunkError::Json { line: i + 1, source })?;
        if doc.chunks.is_empty() || doc.chunks.iter().any(TokenSequence::is_empty) {
            return Err(ChunkError::Invalid { doc_id: doc.doc_id, msg: "empty chunk".into() });
        }
        out.push(doc);
    }
    Ok(out)
}

pub fn read_jsonl_file(path: &Path) -> Result<Vec<ChunkedDocument>, ChunkError> {
    read_jsonl(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(n: usize) -> TokenSequence {
        TokenSequence::new((0..n).map(|i| format!("t{i}")))
    }

    fn sizes(chunks: &[TokenSequence]) -> Vec<usize> {
        chunks.iter().map(TokenSequence::len).collect()
    }

    #[test]
    fn examples() {
        let (c, t) = chunk(&toks(100), 40, 64).unwrap();
        assert_eq!((sizes(&c), t), (vec![40, 40, 20], false));
        let (c, t) = chunk(&toks(20), 50, 64).unwrap();
        assert_eq!((sizes(&c), t), (vec![20], false));
        let (c, t) = chunk(&toks(5000), 50, 64).unwrap();
        assert_eq!(c.len(), 64);
        assert!(t);
        assert!(sizes(&c).iter().all(|&s| s == 50));
    }

    #[test]
    fn exact_multiple_is_not_truncated() {
        let (c, t) = chunk(&toks(100), 50, 2).unwrap();
        assert_eq!((c.len(), t), (2, false));
        let (_, t) = chunk(&toks(101), 50, 2).unwrap();
        assert!(t);
    }

    #[test]
    fn errors() {
        assert!(matches!(chunk(&toks(0), 20, 4), Err(ChunkError::EmptyTokens)));
        assert!(matches!(chunk(&toks(3), 0, 4), Err(ChunkError::BadParams)));
        assert!(matches!(chunk(&toks(3), 2, 0), Err(ChunkError::BadParams)));
    }

    #[test]
    fn chunk_size_rule() {
        assert_eq!(choose_chunk_size(39.0), 20);
        assert_eq!(choose_chunk_size(64.0), 20);
        assert_eq!(choose_chunk_size(315.0), 50);
        assert_eq!(choose_chunk_size(100.0), 50);
        for x in [1e-9, 0.5, 99.999, 1e12] {
            assert!((MIN_CHUNK_SIZE..=MAX_CHUNK_SIZE).contains(&choose_chunk_size(x)));
        }
    }

    #[test]
    fn jsonl_format() {
        let doc = ChunkedDocument::from_tokens("d1", 2, Split::Test, &toks(3), 2, 8).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, std::slice::from_ref(&doc)).unwrap();
        let line = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            line,
            "{\"doc_id\":\"d1\",\"label\":2,\"split\":\"test\",\"chunks\":[[\"t0\",\"t1\"],[\"t2\"]],\"truncated\":false}\n"
        );
        assert_eq!(read_jsonl(&buf[..]).unwrap(), vec![doc]);
    }

    #[test]
    fn jsonl_rejects_empty_chunks() {
        let bad = b"{\"doc_id\":\"x\",\"label\":0,\"split\":\"train\",\"chunks\":[],\"truncated\":false}\n";
        assert!(read_jsonl(&bad[..]).is_err());
    }
}
