//! Synthetic template corpus shared by the integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ner_selfaug::corpus::{format_conll, LabeledSequence, Scheme, Span};

pub const PER: &[&str] = &[
    "John", "Mary", "Ahmed", "Li Wei", "Anna Berg", "Carlos", "Priya Nair", "Tom", "Elena Rossi", "Kofi",
    "Sara", "Ivan Petrov", "Mei", "Lucas Silva", "Hana",
];
pub const LOC: &[&str] = &[
    "Paris", "Berlin", "New York", "Lagos", "Tokyo", "Cairo", "Lima", "San Diego", "Oslo", "Hanoi", "Cape Town",
    "Quito",
];
pub const ORG: &[&str] = &[
    "Acme Corp", "Globex", "United Nations", "Initech", "Red Cross", "Umbrella Inc", "Stark Industries", "Hooli",
    "World Bank", "Vandelay",
];

/// Filler words grouped by meaning; members of a group are near neighbours
/// in the generated vector space.
pub const SYNONYM_GROUPS: &[&[&str]] = &[
    &["visited", "toured", "explored"],
    &["met", "greeted", "joined"],
    &["yesterday", "recently", "today"],
    &["works", "serves", "operates"],
    &["office", "branch", "bureau"],
    &["opened", "launched", "started"],
    &["near", "outside", "beyond"],
    &["report", "statement", "notice"],
    &["said", "noted", "claimed"],
    &["city", "town", "region"],
];

pub const STOPWORDS: &[&str] = &["the", "a", "in", "at", "for", "of", "to", "and", "with", "from", "on", "by"];

const TEMPLATES: &[&str] = &[
    "PER visited LOC yesterday",
    "PER met PER in LOC",
    "PER works for ORG in LOC",
    "the ORG office in LOC opened yesterday",
    "ORG said PER visited the city",
    "a report from ORG said PER met PER",
    "PER joined ORG near LOC",
    "the city of LOC opened a ORG office",
    "ORG works with ORG in LOC",
    "PER said the report from LOC was opened",
    "in LOC , PER met the ORG office",
    "PER visited the ORG branch near LOC",
];

fn pick_synonym(word: &str, rng: &mut impl Rng) -> String {
    for group in SYNONYM_GROUPS {
        if group.contains(&word) {
            return group.choose(rng).unwrap().to_string();
        }
    }
    word.to_string()
}

/// One sentence from a random template with random fillers.
pub fn sentence(rng: &mut impl Rng) -> LabeledSequence {
    let template = TEMPLATES.choose(rng).unwrap();
    let mut tokens = Vec::new();
    let mut spans = Vec::new();
    for slot in template.split(' ') {
        let pool = match slot {
            "PER" => Some(PER),
            "LOC" => Some(LOC),
            "ORG" => Some(ORG),
            _ => None,
        };
        match pool {
            Some(pool) => {
                let start = tokens.len();
                tokens.extend(pool.choose(rng).unwrap().split(' ').map(str::to_string));
                spans.push(Span {
                    entity_type: slot.to_string(),
                    start,
                    end: tokens.len() - 1,
                });
            }
            None => tokens.push(pick_synonym(slot, rng)),
        }
    }
    LabeledSequence::from_spans(tokens, &spans, Scheme::Bio).unwrap()
}

pub fn sentences(n: usize, seed: u64) -> Vec<LabeledSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sentence(&mut rng)).collect()
}

/// Every word of the corpus with a vector: synonym groups cluster tightly,
/// everything else is spread at random.
pub fn vector_text(dim: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words: Vec<String> = Vec::new();
    let mut text = String::new();
    let emit = |w: &str, v: &[f64], text: &mut String| {
        write!(text, "{w}").unwrap();
        for x in v {
            write!(text, " {x:.6}").unwrap();
        }
        text.push('\n');
    };
    let random_vec = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect() };
    for group in SYNONYM_GROUPS {
        let center = random_vec(&mut rng);
        for w in *group {
            let v: Vec<f64> = center.iter().map(|c| c + rng.random_range(-0.05..0.05)).collect();
            emit(w, &v, &mut text);
            words.push(w.to_string());
        }
    }
    let mut others: Vec<&str> = STOPWORDS.to_vec();
    for t in TEMPLATES {
        others.extend(t.split(' ').filter(|w| !["PER", "LOC", "ORG"].contains(w)));
    }
    for pool in [PER, LOC, ORG] {
        for name in pool {
            others.extend(name.split(' '));
        }
    }
    others.push(",");
    for w in others {
        if words.iter().any(|x| x == w) {
            continue;
        }
        let v = random_vec(&mut rng);
        emit(w, &v, &mut text);
        words.push(w.to_string());
    }
    text
}

/// Files of a synthetic dataset on disk.
pub struct Dataset {
    pub dir: PathBuf,
    pub train: PathBuf,
    pub dev: PathBuf,
    pub test: PathBuf,
    pub vectors: PathBuf,
    pub stopwords: PathBuf,
}

fn conll(seqs: &[LabeledSequence]) -> String {
    format_conll(seqs.iter().map(|s| (s.tokens(), s.labels())))
}

/// Writes train/dev/test CoNLL files, a vector file and a stopword list.
pub fn write_dataset(dir: &Path, n_train: usize, n_dev: usize, dim: usize, seed: u64) -> Dataset {
    fs::create_dir_all(dir).unwrap();
    let ds = Dataset {
        dir: dir.to_path_buf(),
        train: dir.join("train.conll"),
        dev: dir.join("dev.conll"),
        test: dir.join("test.conll"),
        vectors: dir.join("vectors.txt"),
        stopwords: dir.join("stopwords.txt"),
    };
    fs::write(&ds.train, conll(&sentences(n_train, seed))).unwrap();
    fs::write(&ds.dev, conll(&sentences(n_dev, seed + 1))).unwrap();
    fs::write(&ds.test, conll(&sentences(n_dev, seed + 2))).unwrap();
    fs::write(&ds.vectors, vector_text(dim, seed + 3)).unwrap();
    fs::write(&ds.stopwords, STOPWORDS.join("\n") + "\n").unwrap();
    ds
}

/// Swaps the type of every span to the next entity type.
pub fn corrupt_types(seq: &LabeledSequence) -> LabeledSequence {
    let next = |t: &str| match t {
        "PER" => "LOC",
        "LOC" => "ORG",
        _ => "PER",
    };
    let spans: Vec<Span> = ner_selfaug::corpus::extract_spans(seq)
        .into_iter()
        .map(|s| Span {
            entity_type: next(&s.entity_type).to_string(),
            ..s
        })
        .collect();
    LabeledSequence::from_spans(seq.tokens().to_vec(), &spans, seq.scheme()).unwrap()
}
