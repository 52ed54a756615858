use rand::seq::SliceRandom;
use rand::Rng;

use super::{Corpus, CorpusError, Split};
use crate::rng::RngStreams;

const SCALE: u128 = 1_000_000_000;

/// Marks `round(fraction * N)` items as `true`, apportioned across classes by
/// largest remainder so every class gets `floor` or `ceil` of
/// `fraction * class_count`. Ties go to the lower class id. Which members of
/// a class are picked is decided by shuffling with `rng`.
pub fn stratified_partition<R: Rng + ?Sized>(
    labels: &[usize],
    num_classes: usize,
    fraction: f64,
    rng: &mut R,
) -> Result<Vec<bool>, CorpusError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CorpusError::BadFraction(fraction));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    for (class, m) in members.iter().enumerate() {
        if !m.is_empty() && m.len() < 2 {
            return Err(CorpusError::ClassTooSmall { class, count: m.len() });
        }
    }

    // Exact integer arithmetic so equal remainders compare equal.
    let f = (fraction * SCALE as f64).round() as u128;
    let total = labels.len() as u128;
    let target = ((f * total + SCALE / 2) / SCALE) as usize;
    let mut quota: Vec<usize> = Vec::with_capacity(num_classes);
    let mut remainders: Vec<(u128, usize)> = Vec::new();
    for (class, m) in members.iter().enumerate() {
        let scaled = f * m.len() as u128;
        quota.push((scaled / SCALE) as usize);
        if !m.is_empty() {
            remainders.push((scaled % SCALE, class));
        }
    }
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let extra = target.saturating_sub(quota.iter().sum());
    for &(_, class) in remainders.iter().take(extra) {
        quota[class] += 1;
    }

    let mut out = vec![false; labels.len()];
    for (class, m) in members.iter_mut().enumerate() {
        m.shuffle(rng);
        for &i in m.iter().take(quota[class]) {
            out[i] = true;
        }
    }
    Ok(out)
}

/// Assigns train/test per class. All documents must be `unsplit` or `train`.
pub fn stratified_split(corpus: &Corpus, train_fraction: f64, seed: u64) -> Result<Corpus, CorpusError> {
    if let Some(d) = corpus.documents.iter().find(|d| d.split == Split::Test) {
        return Err(CorpusError::AlreadySplit(d.doc_id.clone()));
    }
    let labels: Vec<usize> = corpus.documents.iter().map(|d| d.label_id).collect();
    let mut rng = RngStreams::new(seed).stream("corpus/split");
    let is_train = stratified_partition(&labels, corpus.manifest.num_classes, train_fraction, &mut rng)?;
    let documents = corpus
        .documents
        .iter()
        .zip(is_train)
        .map(|(d, train)| {
            let mut d = d.clone();
            d.split = if train { Split::Train } else { Split::Test };
            d
        })
        .collect();
    Ok(Corpus { manifest: corpus.manifest.clone(), documents })
}
