use proptest::prelude::*;

use hierdoc::chunker::chunk;
use hierdoc::embedstore::{write_store, DocEmbedding, EmbeddingProvider, FileStore};
use hierdoc::harness::make_batches;
use hierdoc::rng::RngStreams;
use hierdoc::textprep::{preprocess, tokenize, CleanText, TokenSequence};

fn messy_text() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        "[a-zA-Z0-9]{1,8}",
        Just(" ".to_owned()),
        Just("\t\n".to_owned()),
        Just("<b>".to_owned()),
        Just("</p>".to_owned()),
        Just("<a href='x'>".to_owned()),
        Just("&amp;".to_owned()),
        Just("&lt;".to_owned()),
        Just("'".to_owned()),
        Just("\u{2019}".to_owned()),
        Just("can't".to_owned()),
        Just("I'd've".to_owned()),
        Just("caf\u{e9}".to_owned()),
        Just("\u{fb01}".to_owned()),
        Just("\u{ff21}".to_owned()),
        Just("x < y".to_owned()),
        "[!-/:-@]{1,3}",
        any::<char>().prop_map(String::from),
    ];
    prop::collection::vec(piece, 0..40).prop_map(|v| v.concat())
}

proptest! {
    #[test]
    fn preprocess_is_idempotent_and_clean(text in messy_text()) {
        let once = preprocess(&text);
        prop_assert!(CleanText::from_clean(once.as_str()).is_some(), "{:?}", once);
        prop_assert_eq!(preprocess(once.as_str()), once);
    }

    #[test]
    fn tokens_are_non_empty_and_rejoin(text in messy_text()) {
        let clean = preprocess(&text);
        let tokens = tokenize(&clean);
        prop_assert!(tokens.iter().all(|t| !t.is_empty() && !t.contains(' ')));
        prop_assert_eq!(tokens.join(), clean.as_str());
    }

    #[test]
    fn chunks_tile_a_prefix(n in 1usize..400, size in 1usize..60, max in 1usize..12) {
        let tokens = TokenSequence::new((0..n).map(|i| format!("t{i}")));
        let (chunks, truncated) = chunk(&tokens, size, max).unwrap();
        prop_assert_eq!(chunks.len(), n.div_ceil(size).min(max));
        prop_assert_eq!(truncated, n > size * max);
        let (last, full) = chunks.split_last().unwrap();
        prop_assert!(full.iter().all(|c| c.len() == size));
        prop_assert!(!last.is_empty() && last.len() <= size);
        let flat: Vec<&str> = chunks.iter().flat_map(|c| c.iter()).collect();
        prop_assert_eq!(&flat[..], &tokens.tokens().iter().map(String::as_str).collect::<Vec<_>>()[..flat.len()]);
    }

    #[test]
    fn batches_partition_the_examples(lengths in prop::collection::vec(1usize..20, 0..80), batch in 1usize..17, seed: u64) {
        let batches = make_batches(&lengths, batch, &mut RngStreams::new(seed).stream("p"));
        prop_assert!(batches.iter().all(|b| !b.is_empty() && b.len() <= batch));
        let mut all: Vec<usize> = batches.into_iter().flatten().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..lengths.len()).collect::<Vec<_>>());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn store_round_trip_is_bit_exact(
        dim in 1usize..9,
        docs in prop::collection::vec((1usize..5, prop::collection::vec(-1e6f32..1e6, 40)), 1..6),
    ) {
        let entries: Vec<DocEmbedding> = docs
            .iter()
            .enumerate()
            .map(|(i, (rows, pool))| {
                let data = pool.iter().cycle().take(rows * dim).copied().collect();
                DocEmbedding::new(format!("doc{i}"), dim, data).unwrap()
            })
            .collect();
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("p.emb");
        write_store(&entries, dim, "prop", &path).unwrap();
        let store = FileStore::open(&path).unwrap();
        prop_assert_eq!(store.dim(), dim);
        prop_assert_eq!(store.encoder_tag(), "prop");
        for e in &entries {
            let back = store.lookup(&e.doc_id).unwrap();
            prop_assert_eq!(back.n_chunks(), e.n_chunks());
            let same = back.data().iter().zip(e.data()).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
        }
    }
}
