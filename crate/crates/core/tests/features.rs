mod common;

use claimgram_core::corpus::tokenize;
use claimgram_core::features::{build_vocab, featurize, fit_principal_component};
use common::linalg::{covariance_2d, dot, norm, top_eigenvector_2x2};
use common::sif_fixture::{fixture_sentences, random_cloud, toy_table};
use proptest::prelude::*;

#[test]
fn sif_output_orthogonal_to_component() {
    let mut table = toy_table();
    let sentences = fixture_sentences(1000, 3);
    table.fit(&sentences);
    let u = table.u.clone().expect("component fitted");
    assert!((norm(&u) - 1.0).abs() < 1e-12);
    for s in &sentences {
        let v = table.sif_embed(s);
        assert!(dot(&u, &v).abs() <= 1e-9 * norm(&v), "{s:?}");
    }
}

#[test]
fn fixture_sentence_index_set() {
    let train = vec![tokenize("the rule is too costly"), tokenize("the rule is fine")];
    let vocab = build_vocab(&train, 100);
    let f = featurize(&tokenize("is the rule costly"), &vocab, None);
    // hand-listed: is, the, rule, costly, the rule (present in vocab); "is the" and "rule costly" absent
    let mut expected: Vec<u32> =
        ["is", "the", "rule", "costly", "the rule"].iter().map(|g| vocab.index_of(g).unwrap()).collect();
    expected.sort();
    assert_eq!(f.sparse, expected);
}

#[test]
fn vocab_depends_only_on_training_split() {
    let all = fixture_sentences(300, 5);
    let (train, test) = all.split_at(200);
    let a = build_vocab(train, 50);
    let mut other = train.to_vec();
    other.extend(fixture_sentences(50, 99));
    let b = build_vocab(&other, 50);
    assert_ne!(a.to_tsv(), b.to_tsv());
    let c = build_vocab(train, 50);
    assert_eq!(a.to_tsv(), c.to_tsv());
    let _ = test;

    let mut t1 = toy_table();
    let mut t2 = toy_table();
    t1.fit(train);
    t2.fit(train);
    assert_eq!(t1.u, t2.u);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn power_iteration_matches_closed_form(seed in any::<u64>()) {
        let points = random_cloud(seed);
        let (a, b, c) = covariance_2d(&points);
        let expected = top_eigenvector_2x2(a, b, c);
        let u = fit_principal_component(&points.iter().map(|p| p.to_vec()).collect::<Vec<_>>()).unwrap();
        prop_assert!((u[0] - expected[0]).abs() < 1e-8 && (u[1] - expected[1]).abs() < 1e-8, "{:?} vs {:?}", u, expected);
    }

    #[test]
    fn featurize_ignores_duplicate_ngrams(seed in any::<u64>()) {
        let sentences = fixture_sentences(20, seed);
        let vocab = build_vocab(&sentences, 40);
        for s in &sentences {
            let mut doubled = s.clone();
            doubled.extend(s.iter().cloned());
            let once = featurize(s, &vocab, None);
            let twice = featurize(&doubled, &vocab, None);
            // doubling adds only the seam bigram
            prop_assert!(once.sparse.iter().all(|i| twice.sparse.contains(i)));
            prop_assert!(twice.sparse.len() <= once.sparse.len() + 1);
            prop_assert!(twice.sparse.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
