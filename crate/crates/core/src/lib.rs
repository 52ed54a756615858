//! Long-document classification by chunking text, embedding each chunk with
//! a frozen sentence encoder, and classifying the chunk sequence with a
//! small BiLSTM or CNN head.
//!
//! ```no_run
//! use hierdoc::corpus::synthetic::{random_corpus, SyntheticSpec};
//! use hierdoc::embedstore::{ClassSignal, HashEmbedder};
//! use hierdoc::harness::{chunk_corpus, train, TrainConfig};
//! use hierdoc::heads::HeadKind;
//!
//! let corpus = random_corpus(&SyntheticSpec::default());
//! let docs = chunk_corpus(&corpus, 20, 64).unwrap();
//! let embedder = HashEmbedder::from_documents(512, 0, Some(ClassSignal { epsilon: 0.5 }), &docs).unwrap();
//! let mut config = TrainConfig::new(HeadKind::UseCnn, "synthetic");
//! config.epochs = 5;
//! let outcome = train(&config, &corpus, &embedder).unwrap();
//! println!("{:.3}", outcome.report.test_metrics.unwrap().accuracy);
//! ```

pub mod chunker;
pub mod corpus;
pub mod embedstore;
pub mod harness;
pub mod heads;
pub mod neural;
pub mod rng;
pub mod textprep;

pub use chunker::{ChunkError, ChunkedDocument};
pub use corpus::{Corpus, CorpusError, DatasetManifest, LabeledDocument, Split};
pub use embedstore::{DocEmbedding, EmbedError, EmbeddingProvider};
pub use harness::{HarnessError, Metrics, TrainConfig, TrainReport};
pub use heads::{HeadKind, HeadModel};
pub use neural::NeuralError;
