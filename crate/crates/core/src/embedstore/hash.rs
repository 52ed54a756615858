use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DocEmbedding, EmbedError, EmbeddingProvider};
use crate::chunker::ChunkedDocument;
use crate::rng::fnv1a64;
use crate::textprep::TokenSequence;

pub const MIN_HASH_DIM: usize = 8;

fn token_vector(token: &str, dim: usize, seed: u64, out: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a64(token.as_bytes()));
    let mut norm = 0.0;
    for v in out.iter_mut().take(dim) {
        *v = StandardNormal.sample(&mut rng);
        norm += *v * *v;
    }
    let inv = 1.0 / norm.sqrt();
    out.iter_mut().for_each(|v| *v *= inv);
}

/// Deterministic stand-in sentence encoder: the L2-normalized sum of
/// per-token random unit vectors. A token's vector is a Gaussian draw from
/// a ChaCha stream keyed by `(fnv1a(token), seed)`.
pub fn hash_embed(chunk: &TokenSequence, dim: usize, seed: u64) -> Result<Vec<f32>, EmbedError> {
    if dim < MIN_HASH_DIM {
        return Err(EmbedError::DimTooSmall { min: MIN_HASH_DIM, got: dim });
    }
    if chunk.is_empty() {
        return Err(EmbedError::EmptyChunk);
    }
    let mut sum = vec![0.0f64; dim];
    let mut tok = vec![0.0f64; dim];
    for t in chunk.iter() {
        token_vector(t, dim, seed, &mut tok);
        sum.iter_mut().zip(&tok).for_each(|(s, v)| *s += v);
    }
    let norm = sum.iter().map(|v| v * v).sum::<f64>().sqrt();
    // Repeated opposite tokens cannot cancel exactly, but guard anyway.
    let inv = if norm > 0.0 { 1.0 / norm } else { 0.0 };
    Ok(sum.into_iter().map(|v| (v * inv) as f32).collect())
}

/// Adds `epsilon · e_label` (a one-hot direction per class) to every chunk
/// vector, making a corpus linearly separable by label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassSignal {
    pub epsilon: f32,
}

/// [`EmbeddingProvider`] that hash-embeds the chunks of known documents on
/// demand.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
    tag: String,
    signal: Option<ClassSignal>,
    docs: HashMap<String, (Vec<TokenSequence>, usize)>,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self, EmbedError> {
        if dim < MIN_HASH_DIM {
            return Err(EmbedError::DimTooSmall { min: MIN_HASH_DIM, got: dim });
        }
        Ok(Self { dim, seed, tag: format!("hash-{dim}-s{seed}"), signal: None, docs: HashMap::new() })
    }

    pub fn with_class_signal(mut self, signal: ClassSignal) -> Self {
        self.tag = format!("hash-{}-s{}-signal", self.dim, self.seed);
        self.signal = Some(signal);
        self
    }

    pub fn add_documents<'a>(&mut self, docs: impl IntoIterator<Item = &'a ChunkedDocument>) -> Result<(), EmbedError> {
        for d in docs {
            if self.signal.is_some() && d.label_id >= self.dim {
                return Err(EmbedError::LabelOutOfRange { label: d.label_id, dim: self.dim });
            }
            if self.docs.contains_key(&d.doc_id) {
                return Err(EmbedError::DuplicateId(d.doc_id.clone()));
            }
            self.docs.insert(d.doc_id.clone(), (d.chunks.clone(), d.label_id));
        }
        Ok(())
    }

    pub fn from_documents(dim: usize, seed: u64, signal: Option<ClassSignal>, docs: &[ChunkedDocument]) -> Result<Self, EmbedError> {
        let mut e = Self::new(dim, seed)?;
        if let Some(s) = signal {
            e = e.with_class_signal(s);
        }
        e.add_documents(docs)?;
        Ok(e)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encoder_tag(&self) -> &str {
        &self.tag
    }

    fn lookup(&self, doc_id: &str) -> Result<DocEmbedding, EmbedError> {
        let (chunks, label) = self.docs.get(doc_id).ok_or_else(|| EmbedError::NotFound(doc_id.to_owned()))?;
        let mut data = Vec::with_capacity(chunks.len() * self.dim);
        for c in chunks {
            let mut v = hash_embed(c, self.dim, self.seed)?;
            if let Some(s) = self.signal {
                v[*label] += s.epsilon;
            }
            data.extend(v);
        }
        DocEmbedding::new(doc_id, self.dim, data)
    }

    fn n_chunks(&self, doc_id: &str) -> Result<usize, EmbedError> {
        self.docs
            .get(doc_id)
            .map(|(c, _)| c.len())
            .ok_or_else(|| EmbedError::NotFound(doc_id.to_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;

    fn seq(words: &[&str]) -> TokenSequence {
        TokenSequence::new(words)
    }

    fn cosine(a: &[f32], b: &[f32]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
        let na: f64 = a.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn deterministic_and_unit_norm() {
        let c = seq(&["the", "cat", "sat"]);
        let a = hash_embed(&c, 512, 9).unwrap();
        let b = hash_embed(&c, 512, 9).unwrap();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let norm: f64 = a.iter().map(|v| f64::from(*v).powi(2)).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
        assert_ne!(a, hash_embed(&c, 512, 10).unwrap());
    }

    #[test]
    fn cat_dog_nearly_orthogonal() {
        let cat = hash_embed(&seq(&["cat"]), 512, 0).unwrap();
        let dog = hash_embed(&seq(&["dog"]), 512, 0).unwrap();
        assert!(cosine(&cat, &dog).abs() < 0.2);
    }

    #[test]
    fn errors() {
        assert!(matches!(hash_embed(&seq(&[]), 512, 0), Err(EmbedError::EmptyChunk)));
        assert!(matches!(hash_embed(&seq(&["a"]), 4, 0), Err(EmbedError::DimTooSmall { .. })));
    }

    #[test]
    fn class_signal_is_added_per_row() {
        let doc = ChunkedDocument {
            doc_id: "d".into(),
            label_id: 3,
            split: Split::Train,
            chunks: vec![seq(&["a", "b"]), seq(&["c"])],
            truncated: false,
        };
        let plain = HashEmbedder::from_documents(16, 1, None, std::slice::from_ref(&doc)).unwrap();
        let signal = HashEmbedder::from_documents(16, 1, Some(ClassSignal { epsilon: 0.5 }), &[doc]).unwrap();
        let p = plain.lookup("d").unwrap();
        let s = signal.lookup("d").unwrap();
        assert_eq!(s.n_chunks(), 2);
        for r in 0..2 {
            for k in 0..16 {
                let expect = p.row(r)[k] + if k == 3 { 0.5 } else { 0.0 };
                assert_eq!(s.row(r)[k], expect);
            }
        }
        assert_eq!(signal.n_chunks("d").unwrap(), 2);
        assert!(matches!(signal.lookup("x"), Err(EmbedError::NotFound(_))));
    }
}
