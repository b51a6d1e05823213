mod common;

use std::collections::HashSet;
use std::path::Path;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ner_selfaug::augment::{
    generate_augmented_set, mix_embeddings, token_substitute, AugConfig, EntityDict, Method, SubstitutionKind,
    SynonymDict,
};
use ner_selfaug::corpus::{
    decode_spans, extract_spans, parse_conll, Corpus, LabeledSequence, Scheme, WordVectors,
};
use ner_selfaug::gradcore::Tensor;

struct Fixture {
    corpus: Corpus,
    edict: EntityDict,
    sdict: SynonymDict,
}

fn fixture(n: usize) -> Fixture {
    let corpus = Corpus::new(common::sentences(n, 17), Scheme::Bio).unwrap().convert(Scheme::Bioes);
    let vectors = WordVectors::parse(&common::vector_text(8, 5), Path::new("v.txt")).unwrap();
    let stop: HashSet<String> = common::STOPWORDS.iter().map(|s| s.to_string()).collect();
    Fixture {
        edict: EntityDict::build(&corpus),
        sdict: SynonymDict::build(&vectors, 2, &stop, None),
        corpus,
    }
}

fn span_types(seq: &LabeledSequence) -> Vec<String> {
    extract_spans(seq).into_iter().map(|s| s.entity_type).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn substitution_keeps_span_count_and_types(
        idx in 0usize..40,
        seed in any::<u64>(),
        gamma in 0.0f64..=1.0,
        p_sub in 0.05f64..=1.0,
    ) {
        let f = fixture(40);
        let cfg = AugConfig { gamma, p_sub, ..AugConfig::default() };
        let src = &f.corpus.examples()[idx];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(out) = token_substitute(src, &f.edict, &f.sdict, &cfg, &mut rng) {
            let seq = &out.sequence;
            prop_assert_eq!(seq.scheme(), Scheme::Bioes);
            prop_assert!(!decode_spans(seq.labels()).1);
            prop_assert_eq!(span_types(seq), span_types(src));
            prop_assert!(!out.replacements.is_empty());
            for r in &out.replacements {
                prop_assert_ne!(&r.original, &r.replacement);
                if r.kind == SubstitutionKind::Nws {
                    prop_assert_eq!(&src.labels()[r.position], "O");
                    prop_assert_eq!(r.replacement.len(), 1);
                }
            }
            let ems = out.replacements.iter().filter(|r| r.kind == SubstitutionKind::Ems).count();
            let nws = out.replacements.len() - ems;
            let length_change: isize = out.replacements.iter()
                .map(|r| r.replacement.len() as isize - r.original.len() as isize)
                .sum();
            prop_assert_eq!(seq.len() as isize, src.len() as isize + length_change);
            prop_assert!(ems <= extract_spans(src).len());
            prop_assert!(nws <= src.len());
        }
    }

    #[test]
    fn mixing_is_linear_in_lambda(
        (n1, n2, d) in (1usize..5, 1usize..5, 1usize..4),
        lambda in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rand_t = |r: usize| Tensor::matrix(r, d, (0..r * d).map(|_| rng.random_range(-2.0..2.0)).collect());
        let (e1, e2) = (rand_t(n1), rand_t(n2));
        let n = n1.max(n2);
        let at0 = mix_embeddings(&e1, &e2, 0.0, n);
        let at1 = mix_embeddings(&e1, &e2, 1.0, n);
        let mid = mix_embeddings(&e1, &e2, lambda, n);
        prop_assert_eq!(mid.shape(), &[n, d]);
        for i in 0..n {
            for j in 0..d {
                let first = if i < n1 { e1.at(i, j) } else { 0.0 };
                let second = if i < n2 { e2.at(i, j) } else { 0.0 };
                prop_assert_eq!(at1.at(i, j), first);
                prop_assert_eq!(at0.at(i, j), second);
                let want = at0.at(i, j) + lambda * (at1.at(i, j) - at0.at(i, j));
                prop_assert!((mid.at(i, j) - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn augmented_set_sizes() {
    let f = fixture(20);
    let count = |method, times| {
        let cfg = AugConfig {
            method,
            times,
            ..AugConfig::default()
        };
        let set = generate_augmented_set(&f.corpus, &f.edict, &f.sdict, &cfg, 3).unwrap();
        let mixed = set.iter().filter(|p| p.is_mixed()).count();
        (set.len() - mixed, mixed)
    };
    assert_eq!(count(Method::Ts, 0), (0, 0));
    assert_eq!(count(Method::Both, 0), (0, 0));
    assert_eq!(count(Method::Ts, 5), (100, 0));
    assert_eq!(count(Method::Mixup, 5), (0, 100));
    assert_eq!(count(Method::Baseline, 5), (0, 0));

    let half = fixture(10);
    let cfg = AugConfig {
        method: Method::Both,
        times: 2,
        ..AugConfig::default()
    };
    let set = generate_augmented_set(&half.corpus, &half.edict, &half.sdict, &cfg, 3).unwrap();
    assert_eq!(set.iter().filter(|p| !p.is_mixed()).count(), 10);
    assert_eq!(set.iter().filter(|p| p.is_mixed()).count(), 10);
}

#[test]
fn augmented_set_is_deterministic_per_seed() {
    let f = fixture(20);
    let cfg = AugConfig::default();
    let a = generate_augmented_set(&f.corpus, &f.edict, &f.sdict, &cfg, 11).unwrap();
    let b = generate_augmented_set(&f.corpus, &f.edict, &f.sdict, &cfg, 11).unwrap();
    let c = generate_augmented_set(&f.corpus, &f.edict, &f.sdict, &cfg, 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn mixup_pairs_are_distinct_and_weights_in_range() {
    let f = fixture(12);
    let cfg = AugConfig {
        method: Method::Mixup,
        times: 10,
        ..AugConfig::default()
    };
    for p in generate_augmented_set(&f.corpus, &f.edict, &f.sdict, &cfg, 4).unwrap() {
        let ner_selfaug::augment::PseudoExample::Mixed(m) = p else {
            panic!("expected a mixed example");
        };
        assert_ne!(m.first_id, m.second_id);
        assert!((0.0..=1.0).contains(&m.lambda));
        assert_eq!(m.first_labels().len(), m.len());
        assert_eq!(m.second_labels().len(), m.len());
    }
}

#[test]
fn entity_dictionary_counts_on_toy_file() {
    let text = "John B-PER\nSmith I-PER\nmet O\nMary B-PER\n\nMary B-PER\nvisited O\nParis B-LOC\n\nJohn B-PER\nSmith I-PER\nleft O\n";
    let corpus = parse_conll(text, Path::new("toy.conll")).unwrap();
    let dict = EntityDict::build(&corpus);
    let per: Vec<Vec<String>> = vec![
        vec!["John".into(), "Smith".into()],
        vec!["Mary".into()],
    ];
    assert_eq!(dict.mentions("PER"), &per[..]);
    assert_eq!(dict.mentions("LOC"), &[vec!["Paris".to_string()]][..]);
    assert!(dict.mentions("ORG").is_empty());
    assert_eq!(dict.len(), 3);
}

#[test]
fn synonym_lists_skip_stopwords_and_self() {
    let vectors = WordVectors::parse(&common::vector_text(8, 5), Path::new("v.txt")).unwrap();
    let stop: HashSet<String> = common::STOPWORDS.iter().map(|s| s.to_string()).collect();
    let dict = SynonymDict::build(&vectors, 2, &stop, None);
    for (word, syns) in dict.iter() {
        assert!(!stop.contains(word));
        assert!(syns.len() <= 2);
        for s in syns {
            assert_ne!(s.word, word);
            assert!(!stop.contains(&s.word));
        }
    }
    // clustered groups find each other
    let visited: HashSet<&str> = dict.get("visited").unwrap().iter().map(|s| s.word.as_str()).collect();
    assert_eq!(visited, HashSet::from(["toured", "explored"]));
}
