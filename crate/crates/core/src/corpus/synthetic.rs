//! Random-word corpora for encoder-free tests and demos.
//!
//! Texts carry no class information; label signal, if wanted, comes from
//! the hash embedder's class-signal injection.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Corpus, DatasetManifest, LabeledDocument, Split};
use crate::rng::RngStreams;

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ne", "su", "ta", "vo", "ri", "pe", "du", "ga", "fo", "hi", "ze", "bu", "wa",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub num_classes: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_train: 200,
            n_test: 100,
            num_classes: 4,
            min_words: 20,
            max_words: 200,
            vocab_size: 2000,
            seed: 0,
        }
    }
}

fn vocabulary(size: usize) -> Vec<String> {
    (0..size)
        .map(|mut i| {
            let mut w = String::new();
            loop {
                w.push_str(SYLLABLES[i % SYLLABLES.len()]);
                i /= SYLLABLES.len();
                if i == 0 {
                    break;
                }
            }
            w
        })
        .collect()
}

/// Balanced labels (round-robin, then shuffled) and uniform word counts in
/// `[min_words, max_words]`. Class names are `class0`, `class1`, ...
pub fn random_corpus(spec: &SyntheticSpec) -> Corpus {
    assert!(spec.num_classes >= 1 && spec.min_words >= 1 && spec.min_words <= spec.max_words);
    let names: Vec<String> = (0..spec.num_classes).map(|i| format!("class{i}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut manifest = DatasetManifest::new(format!("synthetic-{}", spec.seed), &refs, 0);
    manifest.train_count = Some(spec.n_train);
    manifest.test_count = Some(spec.n_test);

    let vocab = vocabulary(spec.vocab_size.max(1));
    let streams = RngStreams::new(spec.seed);
    let mut text_rng = streams.stream("synthetic/text");
    let mut label_rng = streams.stream("synthetic/labels");

    let mut documents = Vec::with_capacity(spec.n_train + spec.n_test);
    let mut total_words = 0usize;
    for (split, n) in [(Split::Train, spec.n_train), (Split::Test, spec.n_test)] {
        let mut labels: Vec<usize> = (0..n).map(|i| i % spec.num_classes).collect();
        labels.shuffle(&mut label_rng);
        for (i, label_id) in labels.into_iter().enumerate() {
            let len = text_rng.random_range(spec.min_words..=spec.max_words);
            total_words += len;
            let words: Vec<&str> = (0..len)
                .map(|_| vocab[text_rng.random_range(0..vocab.len())].as_str())
                .collect();
            documents.push(LabeledDocument {
                doc_id: format!("{split}-{i:05}"),
                raw_text: words.join(" "),
                label_id,
                split,
            });
        }
    }
    let docs = documents.len().max(1);
    manifest.avg_words = ((total_words + docs / 2) / docs).max(1) as u32;
    manifest.default_chunk_size = crate::chunker::choose_chunk_size(f64::from(manifest.avg_words));
    Corpus { manifest, documents }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::preprocess;

    #[test]
    fn shape_and_balance() {
        let c = random_corpus(&SyntheticSpec::default());
        assert_eq!(c.split_count(Split::Train), 200);
        assert_eq!(c.split_count(Split::Test), 100);
        c.manifest.validate().unwrap();
        let hist = c.stats().unwrap().class_histogram;
        assert_eq!(hist, vec![75, 75, 75, 75]);
    }

    #[test]
    fn text_is_already_clean() {
        let c = random_corpus(&SyntheticSpec { n_train: 5, n_test: 5, ..Default::default() });
        for d in &c.documents {
            assert_eq!(preprocess(&d.raw_text).as_str(), d.raw_text);
        }
    }

    #[test]
    fn deterministic() {
        let spec = SyntheticSpec { n_train: 10, n_test: 4, ..Default::default() };
        assert_eq!(random_corpus(&spec), random_corpus(&spec));
    }
}
