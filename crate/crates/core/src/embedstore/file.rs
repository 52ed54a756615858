use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{DocEmbedding, EmbedError, EmbeddingProvider};

pub const MAGIC: [u8; 8] = *b"HDEMB\0\0\x01";
pub const TAG_LEN: usize = 32;
pub const HEADER_LEN: usize = 8 + 4 + 8 + TAG_LEN;

fn encode_tag(tag: &str) -> Result<[u8; TAG_LEN], EmbedError> {
    if !tag.is_ascii() || tag.len() > TAG_LEN || tag.contains('\0') {
        return Err(EmbedError::BadTag(tag.to_owned()));
    }
    let mut out = [0u8; TAG_LEN];
    out[..tag.len()].copy_from_slice(tag.as_bytes());
    Ok(out)
}

fn index_entry_len(id: &str) -> u64 {
    2 + id.len() as u64 + 4 + 8
}

/// Streaming writer. The document layout (ids and row counts) is fixed up
/// front so the index can be written before the payload.
pub struct StoreWriter {
    out: BufWriter<File>,
    path: PathBuf,
    dim: usize,
    layout: Vec<(String, usize)>,
    next: usize,
}

impl StoreWriter {
    pub fn create(path: &Path, dim: usize, encoder_tag: &str, layout: Vec<(String, usize)>) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::DimTooSmall { min: 1, got: 0 });
        }
        let tag = encode_tag(encoder_tag)?;
        let mut seen = HashSet::with_capacity(layout.len());
        for (id, n) in &layout {
            if id.len() > u16::MAX as usize {
                return Err(EmbedError::IdTooLong(id.clone()));
            }
            if *n == 0 || *n > u32::MAX as usize {
                return Err(EmbedError::NoRows(id.clone()));
            }
            if !seen.insert(id.as_str()) {
                return Err(EmbedError::DuplicateId(id.clone()));
            }
        }
        let io = |source| EmbedError::Io { path: path.to_owned(), source };
        let file = File::create(path).map_err(io)?;
        let mut out = BufWriter::new(file);

        let mut buf = Vec::with_capacity(HEADER_LEN);
        buf.extend_from_slice(&MAGIC);
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
        buf.extend_from_slice(&(layout.len() as u64).to_le_bytes());
        buf.extend_from_slice(&tag);

        let index_len: u64 = layout.iter().map(|(id, _)| index_entry_len(id)).sum();
        let mut offset = HEADER_LEN as u64 + index_len;
        for (id, n) in &layout {
            buf.extend_from_slice(&(id.len() as u16).to_le_bytes());
            buf.extend_from_slice(id.as_bytes());
            buf.extend_from_slice(&(*n as u32).to_le_bytes());
            buf.extend_from_slice(&offset.to_le_bytes());
            offset += (*n * dim * 4) as u64;
        }
        out.write_all(&buf).map_err(io)?;
        Ok(Self { out, path: path.to_owned(), dim, layout, next: 0 })
    }

    /// Appends the next document in layout order.
    pub fn write_doc(&mut self, emb: &DocEmbedding) -> Result<(), EmbedError> {
        let Some((id, n)) = self.layout.get(self.next) else {
            return Err(EmbedError::Corrupt(format!("unexpected extra doc {:?}", emb.doc_id)));
        };
        if *id != emb.doc_id {
            return Err(EmbedError::OutOfOrder { expected: id.clone(), got: emb.doc_id.clone() });
        }
        if emb.dim() != self.dim {
            return Err(EmbedError::DimMismatch { doc_id: emb.doc_id.clone(), dim: self.dim, got: emb.dim() });
        }
        if emb.n_chunks() != *n {
            return Err(EmbedError::Corrupt(format!(
                "doc {:?} has {} rows, layout declared {n}",
                emb.doc_id,
                emb.n_chunks()
            )));
        }
        let mut bytes = Vec::with_capacity(emb.data().len() * 4);
        for v in emb.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        self.out
            .write_all(&bytes)
            .map_err(|source| EmbedError::Io { path: self.path.clone(), source })?;
        self.next += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), EmbedError> {
        if self.next != self.layout.len() {
            return Err(EmbedError::Corrupt(format!(
                "only {} of {} documents written",
                self.next,
                self.layout.len()
            )));
        }
        self.out.flush().map_err(|source| EmbedError::Io { path: self.path.clone(), source })
    }
}

/// Writes `entries` (in the given order) as a store file.
pub fn write_store(entries: &[DocEmbedding], dim: usize, encoder_tag: &str, path: &Path) -> Result<(), EmbedError> {
    if let Some(e) = entries.iter().find(|e| e.dim() != dim) {
        return Err(EmbedError::DimMismatch { doc_id: e.doc_id.clone(), dim, got: e.dim() });
    }
    let layout = entries.iter().map(|e| (e.doc_id.clone(), e.n_chunks())).collect();
    let mut w = StoreWriter::create(path, dim, encoder_tag, layout)?;
    for e in entries {
        w.write_doc(e)?;
    }
    w.finish()
}

#[derive(Debug, Clone, Copy)]
struct IndexEntry {
    n_chunks: usize,
    offset: u64,
}

/// Random-access reader over a store file. Only the index is held in memory.
#[derive(Debug)]
pub struct FileStore {
    path: PathBuf,
    dim: usize,
    tag: String,
    ids: Vec<String>,
    index: HashMap<String, IndexEntry>,
    file: Mutex<File>,
}

impl FileStore {
    pub fn open(path: &Path) -> Result<Self, EmbedError> {
        let io = |source| EmbedError::Io { path: path.to_owned(), source };
        let mut file = File::open(path).map_err(io)?;
        let file_len = file.metadata().map_err(io)?.len();

        let mut header = [0u8; HEADER_LEN];
        if file_len < HEADER_LEN as u64 {
            let mut magic = vec![0u8; file_len.min(8) as usize];
            file.read_exact(&mut magic).map_err(io)?;
            if magic.len() < 8 || magic != MAGIC {
                return Err(EmbedError::BadMagic);
            }
            return Err(EmbedError::Truncated("header".into()));
        }
        file.read_exact(&mut header).map_err(io)?;
        if header[..8] != MAGIC {
            return Err(EmbedError::BadMagic);
        }
        let dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let doc_count = u64::from_le_bytes(header[12..20].try_into().unwrap());
        let tag_bytes = &header[20..HEADER_LEN];
        let tag_end = tag_bytes.iter().position(|&b| b == 0).unwrap_or(TAG_LEN);
        let tag = std::str::from_utf8(&tag_bytes[..tag_end])
            .ok()
            .filter(|t| t.is_ascii())
            .ok_or_else(|| EmbedError::Corrupt("encoder tag is not ASCII".into()))?
            .to_owned();
        if dim == 0 {
            return Err(EmbedError::Corrupt("dim is 0".into()));
        }

        let min_index = doc_count.saturating_mul(14);
        if min_index > file_len - HEADER_LEN as u64 {
            return Err(EmbedError::Truncated("index".into()));
        }
        let mut reader = BufReader::new(&mut file);
        let mut ids = Vec::with_capacity(doc_count as usize);
        let mut index = HashMap::with_capacity(doc_count as usize);
        let mut index_end = HEADER_LEN as u64;
        for _ in 0..doc_count {
            let (id, entry, len) = read_index_entry(&mut reader)?;
            index_end += len;
            if index.insert(id.clone(), entry).is_some() {
                return Err(EmbedError::DuplicateId(id));
            }
            ids.push(id);
        }
        drop(reader);

        let mut payload_end = index_end;
        for id in &ids {
            let e = index[id];
            if e.n_chunks == 0 {
                return Err(EmbedError::NoRows(id.clone()));
            }
            if e.offset < index_end {
                return Err(EmbedError::Corrupt(format!("payload of {id:?} overlaps the index")));
            }
            let end = e.offset + (e.n_chunks * dim * 4) as u64;
            if end > file_len {
                return Err(EmbedError::Truncated(format!("payload of {id:?} ends past end of file")));
            }
            payload_end = payload_end.max(end);
        }
        if payload_end != file_len {
            return Err(EmbedError::Corrupt(format!(
                "{} trailing bytes after payload",
                file_len - payload_end
            )));
        }
        Ok(Self { path: path.to_owned(), dim, tag, ids, index, file: Mutex::new(file) })
    }

    /// Document ids in file order.
    pub fn doc_ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.index.contains_key(doc_id)
    }

    /// Reads every document in file order.
    pub fn read_all(&self) -> Result<Vec<DocEmbedding>, EmbedError> {
        self.ids.iter().map(|id| self.lookup(id)).collect()
    }
}

fn read_index_entry<R: Read>(r: &mut R) -> Result<(String, IndexEntry, u64), EmbedError> {
    fn take<R: Read, const N: usize>(r: &mut R, what: &str) -> Result<[u8; N], EmbedError> {
        let mut buf = [0u8; N];
        r.read_exact(&mut buf)
            .map_err(|_| EmbedError::Truncated(format!("index ends inside {what}")))?;
        Ok(buf)
    }
    let id_len = u16::from_le_bytes(take::<_, 2>(r, "id length")?) as usize;
    let mut id = vec![0u8; id_len];
    r.read_exact(&mut id)
        .map_err(|_| EmbedError::Truncated("index ends inside doc id".into()))?;
    let id = String::from_utf8(id).map_err(|_| EmbedError::Corrupt("doc id is not UTF-8".into()))?;
    let n_chunks = u32::from_le_bytes(take::<_, 4>(r, "row count")?) as usize;
    let offset = u64::from_le_bytes(take::<_, 8>(r, "payload offset")?);
    Ok((id, IndexEntry { n_chunks, offset }, 14 + id_len as u64))
}

impl EmbeddingProvider for FileStore {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encoder_tag(&self) -> &str {
        &self.tag
    }

    fn lookup(&self, doc_id: &str) -> Result<DocEmbedding, EmbedError> {
        let entry = *self.index.get(doc_id).ok_or_else(|| EmbedError::NotFound(doc_id.to_owned()))?;
        let mut bytes = vec![0u8; entry.n_chunks * self.dim * 4];
        {
            let mut file = self.file.lock().unwrap_or_else(|p| p.into_inner());
            let io = |source| EmbedError::Io { path: self.path.clone(), source };
            file.seek(SeekFrom::Start(entry.offset)).map_err(io)?;
            file.read_exact(&mut bytes).map_err(io)?;
        }
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        DocEmbedding::new(doc_id, self.dim, data)
    }

    fn n_chunks(&self, doc_id: &str) -> Result<usize, EmbedError> {
        self.index
            .get(doc_id)
            .map(|e| e.n_chunks)
            .ok_or_else(|| EmbedError::NotFound(doc_id.to_owned()))
    }
}
