//! Labeled document corpora in one canonical CSV format.
//!
//! Every dataset is converted once into `doc_id,split,label,text` rows
//! (see `scripts/ingest.py`). Labels are class names; a [`DatasetManifest`]
//! maps them to integer ids in alphabetical order.

mod split;
pub mod synthetic;

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use split::{stratified_partition, stratified_split};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("no records")]
    NoRecords,
    #[error("row {row}: {msg}")]
    MalformedRow { row: usize, msg: String },
    #[error("row {row}: unknown class name {label:?}")]
    UnknownClass { row: usize, label: String },
    #[error("duplicate doc_id {0:?}")]
    DuplicateId(String),
    #[error("{what} count mismatch: manifest says {expected}, file has {actual}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("class {class} has {count} document(s); at least 2 are needed to split")]
    ClassTooSmall { class: usize, count: usize },
    #[error("document {0:?} is already assigned to the test split")]
    AlreadySplit(String),
    #[error("train fraction {0} is outside (0, 1)")]
    BadFraction(f64),
    #[error("corpus is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Unsplit,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Unsplit => "unsplit",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "unsplit" => Ok(Split::Unsplit),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDocument {
    pub doc_id: String,
    pub raw_text: String,
    pub label_id: usize,
    pub split: Split,
}

impl LabeledDocument {
    pub fn word_count(&self) -> usize {
        self.raw_text.split_whitespace().count()
    }
}

/// Static description of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub num_classes: usize,
    /// Alphabetical; the position of a name is its label id.
    pub class_names: Vec<String>,
    /// Average words per record.
    pub avg_words: u32,
    pub default_chunk_size: usize,
    pub canonical_split: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

const BUILTIN_MANIFESTS: [(&str, &str); 6] = [
    ("20ng", include_str!("../../data/manifests/20ng.json")),
    ("bbc_news", include_str!("../../data/manifests/bbc_news.json")),
    ("ag_news", include_str!("../../data/manifests/ag_news.json")),
    ("bbc_sports", include_str!("../../data/manifests/bbc_sports.json")),
    ("imdb", include_str!("../../data/manifests/imdb.json")),
    ("r8", include_str!("../../data/manifests/r8.json")),
];

impl DatasetManifest {
    /// Builds a manifest for ad-hoc data. Class names are sorted.
    pub fn new(name: impl Into<String>, class_names: &[&str], avg_words: u32) -> Self {
        let mut class_names: Vec<String> = class_names.iter().map(|s| s.to_string()).collect();
        class_names.sort();
        Self {
            name: name.into(),
            num_classes: class_names.len(),
            class_names,
            avg_words,
            default_chunk_size: crate::chunker::choose_chunk_size(f64::from(avg_words)),
            canonical_split: true,
            train_count: None,
            test_count: None,
            notes: None,
        }
    }

    /// Names of the shipped benchmark manifests.
    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTIN_MANIFESTS.iter().map(|(n, _)| *n)
    }

    pub fn builtin(name: &str) -> Option<Self> {
        BUILTIN_MANIFESTS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, json)| serde_json::from_str(json).expect("shipped manifest is valid"))
    }

    pub fn from_json(json: &str) -> Result<Self, CorpusError> {
        let manifest: Self = serde_json::from_str(json)?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let mut text = String::new();
        open(path)?
            .read_to_string(&mut text)
            .map_err(|source| CorpusError::Io { path: path.to_owned(), source })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n").map_err(|source| CorpusError::Io { path: path.to_owned(), source })
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |msg: String| Err(CorpusError::Manifest(msg));
        if self.num_classes == 0 {
            return bad("num_classes must be positive".into());
        }
        if self.class_names.len() != self.num_classes {
            return bad(format!(
                "{} class names for {} classes",
                self.class_names.len(),
                self.num_classes
            ));
        }
        if self.class_names.windows(2).any(|w| w[0] >= w[1]) {
            return bad("class_names must be unique and in alphabetical order".into());
        }
        if self.avg_words == 0 {
            return bad("avg_words must be positive".into());
        }
        if !(20..=50).contains(&self.default_chunk_size) {
            return bad(format!("default_chunk_size {} outside [20, 50]", self.default_chunk_size));
        }
        Ok(())
    }

    pub fn class_id(&self, name: &str) -> Option<usize> {
        self.class_names.binary_search_by(|c| c.as_str().cmp(name)).ok()
    }
}

/// One CSV row before label resolution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvRecord {
    pub doc_id: String,
    pub split: Split,
    pub label: String,
    pub text: String,
}

fn open(path: &Path) -> Result<File, CorpusError> {
    File::open(path).map_err(|source| CorpusError::Io { path: path.to_owned(), source })
}

/// Reads canonical CSV rows without interpreting labels.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<CsvRecord>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["doc_id", "split", "label", "text"] {
        return Err(CorpusError::MalformedRow {
            row: 0,
            msg: format!("expected header doc_id,split,label,text, found {:?}", headers),
        });
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| CorpusError::MalformedRow { row: row_no, msg: e.to_string() })?;
        if row.len() != 4 {
            return Err(CorpusError::MalformedRow {
                row: row_no,
                msg: format!("expected 4 columns, found {}", row.len()),
            });
        }
        let split = row[1]
            .parse()
            .map_err(|msg| CorpusError::MalformedRow { row: row_no, msg })?;
        out.push(CsvRecord {
            doc_id: row[0].to_owned(),
            split,
            label: row[2].to_owned(),
            text: row[3].to_owned(),
        });
    }
    Ok(out)
}

pub fn read_records_file(path: &Path) -> Result<Vec<CsvRecord>, CorpusError> {
    read_records(open(path)?)
}

pub fn write_records<W: Write>(writer: W, records: &[CsvRecord]) -> Result<(), CorpusError> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    wtr.write_record(["doc_id", "split", "label", "text"])?;
    for r in records {
        wtr.write_record([r.doc_id.as_str(), r.split.as_str(), r.label.as_str(), r.text.as_str()])?;
    }
    wtr.flush().map_err(|e| CorpusError::Csv(e.into()))?;
    Ok(())
}

pub fn write_records_file(path: &Path, records: &[CsvRecord]) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|source| CorpusError::Io { path: path.to_owned(), source })?;
    write_records(std::io::BufWriter::new(file), records)
}

/// An immutable labeled corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub manifest: DatasetManifest,
    pub documents: Vec<LabeledDocument>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub avg_words: f64,
    pub class_histogram: Vec<usize>,
    pub max_words: usize,
}

impl Corpus {
    /// Resolves labels against `manifest` and checks every invariant.
    pub fn from_records(manifest: DatasetManifest, records: Vec<CsvRecord>) -> Result<Self, CorpusError> {
        manifest.validate()?;
        if records.is_empty() {
            return Err(CorpusError::NoRecords);
        }
        let mut seen = HashSet::with_capacity(records.len());
        let mut documents = Vec::with_capacity(records.len());
        for (i, r) in records.into_iter().enumerate() {
            let row = i + 1;
            let label_id = manifest
                .class_id(&r.label)
                .ok_or_else(|| CorpusError::UnknownClass { row, label: r.label.clone() })?;
            if r.text.trim().is_empty() {
                return Err(CorpusError::MalformedRow { row, msg: "empty text".into() });
            }
            if r.doc_id.is_empty() {
                return Err(CorpusError::MalformedRow { row, msg: "empty doc_id".into() });
            }
            if !seen.insert(r.doc_id.clone()) {
                return Err(CorpusError::DuplicateId(r.doc_id));
            }
            documents.push(LabeledDocument { doc_id: r.doc_id, raw_text: r.text, label_id, split: r.split });
        }
        let corpus = Self { manifest, documents };
        corpus.check_counts()?;
        Ok(corpus)
    }

    fn check_counts(&self) -> Result<(), CorpusError> {
        let m = &self.manifest;
        let train = self.split_count(Split::Train);
        let test = self.split_count(Split::Test);
        let expect = |what, expected: Option<usize>, actual| match expected {
            Some(e) if e != actual => Err(CorpusError::CountMismatch { what, expected: e, actual }),
            _ => Ok(()),
        };
        if m.canonical_split {
            expect("train", m.train_count, train)?;
            expect("test", m.test_count, test)?;
        } else if let (Some(a), Some(b)) = (m.train_count, m.test_count) {
            expect("total", Some(a + b), self.documents.len())?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn split_count(&self, split: Split) -> usize {
        self.documents.iter().filter(|d| d.split == split).count()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &LabeledDocument> {
        self.documents.iter().filter(move |d| d.split == split)
    }

    pub fn to_records(&self) -> Vec<CsvRecord> {
        self.documents
            .iter()
            .map(|d| CsvRecord {
                doc_id: d.doc_id.clone(),
                split: d.split,
                label: self.manifest.class_names[d.label_id].clone(),
                text: d.raw_text.clone(),
            })
            .collect()
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), CorpusError> {
        write_records_file(path, &self.to_records())
    }

    pub fn stats(&self) -> Result<CorpusStats, CorpusError> {
        corpus_stats(self)
    }
}

/// Loads a canonical CSV file and validates it against `manifest`.
pub fn load_dataset(manifest: &DatasetManifest, path: &Path) -> Result<Corpus, CorpusError> {
    let records = read_records_file(path)?;
    Corpus::from_records(manifest.clone(), records)
}

/// Whitespace-token statistics. `avg_words` is total tokens over documents.
pub fn corpus_stats(corpus: &Corpus) -> Result<CorpusStats, CorpusError> {
    if corpus.documents.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut class_histogram = vec![0; corpus.manifest.num_classes];
    let mut total = 0usize;
    let mut max_words = 0usize;
    for d in &corpus.documents {
        let n = d.word_count();
        total += n;
        max_words = max_words.max(n);
        class_histogram[d.label_id] += 1;
    }
    Ok(CorpusStats {
        avg_words: total as f64 / corpus.documents.len() as f64,
        class_histogram,
        max_words,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> DatasetManifest {
        DatasetManifest::new("toy", &["sport", "tech"], 30)
    }

    fn csv_bytes(rows: &[(&str, &str, &str, &str)]) -> Vec<u8> {
        let records: Vec<CsvRecord> = rows
            .iter()
            .map(|(id, s, l, t)| CsvRecord {
                doc_id: id.to_string(),
                split: s.parse().unwrap(),
                label: l.to_string(),
                text: t.to_string(),
            })
            .collect();
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        buf
    }

    #[test]
    fn builtins_validate() {
        let names: Vec<_> = DatasetManifest::builtin_names().collect();
        assert_eq!(names.len(), 6);
        for n in names {
            let m = DatasetManifest::builtin(n).unwrap();
            m.validate().unwrap();
            assert_eq!(m.name, n);
        }
        let ng = DatasetManifest::builtin("20ng").unwrap();
        assert_eq!((ng.num_classes, ng.train_count, ng.test_count), (20, Some(11314), Some(7532)));
        let ag = DatasetManifest::builtin("ag_news").unwrap();
        assert_eq!((ag.avg_words, ag.default_chunk_size), (39, 20));
    }

    #[test]
    fn manifest_rejects_unsorted_classes() {
        let mut m = manifest();
        m.class_names.reverse();
        assert!(matches!(m.validate(), Err(CorpusError::Manifest(_))));
        let mut m = manifest();
        m.default_chunk_size = 60;
        assert!(m.validate().is_err());
    }

    #[test]
    fn label_ids_follow_alphabetical_order() {
        let buf = csv_bytes(&[("a", "train", "tech", "x y"), ("b", "test", "sport", "z")]);
        let corpus = Corpus::from_records(manifest(), read_records(&buf[..]).unwrap()).unwrap();
        assert_eq!(corpus.documents[0].label_id, 1);
        assert_eq!(corpus.documents[1].label_id, 0);
    }

    #[test]
    fn quoted_text_survives() {
        let text = "he said, \"hi\"\nand left";
        let buf = csv_bytes(&[("a", "train", "tech", text)]);
        let recs = read_records(&buf[..]).unwrap();
        assert_eq!(recs[0].text, text);
    }

    #[test]
    fn errors() {
        let empty = b"doc_id,split,label,text\n";
        let recs = read_records(&empty[..]).unwrap();
        assert!(matches!(Corpus::from_records(manifest(), recs), Err(CorpusError::NoRecords)));

        let short = b"doc_id,split,label,text\na,train,tech\n";
        assert!(matches!(read_records(&short[..]), Err(CorpusError::MalformedRow { row: 1, .. })));

        let buf = csv_bytes(&[("a", "train", "cooking", "x")]);
        let err = Corpus::from_records(manifest(), read_records(&buf[..]).unwrap()).unwrap_err();
        assert!(matches!(err, CorpusError::UnknownClass { .. }));

        let buf = csv_bytes(&[("a", "train", "tech", "x"), ("a", "test", "tech", "y")]);
        let err = Corpus::from_records(manifest(), read_records(&buf[..]).unwrap()).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId(_)));

        let mut m = manifest();
        m.train_count = Some(2);
        let buf = csv_bytes(&[("a", "train", "tech", "x"), ("b", "test", "tech", "y")]);
        let err = Corpus::from_records(m, read_records(&buf[..]).unwrap()).unwrap_err();
        assert!(matches!(err, CorpusError::CountMismatch { expected: 2, actual: 1, .. }));

        let bad_split = b"doc_id,split,label,text\na,dev,tech,x\n";
        assert!(read_records(&bad_split[..]).is_err());
    }

    #[test]
    fn missing_file() {
        let err = load_dataset(&manifest(), Path::new("/nonexistent/x.csv")).unwrap_err();
        assert!(matches!(err, CorpusError::Io { .. }));
    }

    #[test]
    fn stats_examples() {
        let ten = ["w"; 10].join(" ");
        let thirty = vec!["w"; 30].join(" ");
        let buf = csv_bytes(&[("a", "train", "tech", &ten), ("b", "test", "sport", &thirty)]);
        let corpus = Corpus::from_records(manifest(), read_records(&buf[..]).unwrap()).unwrap();
        let s = corpus_stats(&corpus).unwrap();
        assert_eq!(s.avg_words, 20.0);
        assert_eq!(s.max_words, 30);
        assert_eq!(s.class_histogram, vec![1, 1]);

        let buf = csv_bytes(&[("a", "train", "tech", "one two three")]);
        let single = Corpus::from_records(manifest(), read_records(&buf[..]).unwrap()).unwrap();
        assert_eq!(corpus_stats(&single).unwrap().avg_words, 3.0);
    }
}
