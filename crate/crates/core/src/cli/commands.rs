use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::RunConfig;
use crate::augment::{generate_augmented_set, read_stopwords, EntityDict, PseudoExample, SynonymDict};
use crate::corpus::{
    format_conll, label_set, read_conll, span_f1, subsample, Corpus, SpanScores, Vocab, WordVectors,
};
use crate::error::{Error, Result};
use crate::gradcore::checkpoint::Checkpoint;
use crate::metaweight::{train as run_training, EvalRecord, TrainItem, WeightRecord};
use crate::model::Tagger;

pub const CONFIG_FILE: &str = "config.resolved";
pub const MODEL_FILE: &str = "model.ckpt";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const WEIGHT_LOG_FILE: &str = "weight_log.jsonl";
pub const WEIGHTS_TSV_FILE: &str = "weights.tsv";
pub const PSEUDO_FILE: &str = "pseudo.conll";
pub const MIXUP_FILE: &str = "mixup_pairs.tsv";
pub const ENTITIES_FILE: &str = "entities.tsv";
pub const SYNONYMS_FILE: &str = "synonyms.tsv";
pub const PREDICTIONS_FILE: &str = "predictions.conll";
pub const SCORES_FILE: &str = "scores.json";

// Independent random streams derived from the master seed.
const SAMPLE_STREAM: u64 = 0;
const AUGMENT_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;
const TRAIN_STREAM: u64 = 3;

fn stream(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn json_lines<T: Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let out = cfg.paths.output.clone().ok_or_else(|| Error::Config {
        key: "paths.output".into(),
        message: "required".into(),
    })?;
    create_dir(&out)?;
    Ok(out)
}

fn load(path: &Option<PathBuf>, cfg: &RunConfig) -> Result<Option<Corpus>> {
    path.as_ref()
        .map(|p| Ok(read_conll(p)?.convert(cfg.scheme)))
        .transpose()
}

/// Corpora, dictionaries and the pseudo set of a run.
pub struct Prepared {
    pub train: Corpus,
    pub dev: Option<Corpus>,
    pub test: Option<Corpus>,
    pub vectors: Option<WordVectors>,
    pub entities: EntityDict,
    pub synonyms: SynonymDict,
    pub pseudo: Vec<PseudoExample>,
}

/// Loads and subsamples the data, builds both dictionaries and generates
/// the pseudo set as configured.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let full = load(&cfg.paths.train, cfg)?.ok_or_else(|| Error::Config {
        key: "paths.train".into(),
        message: "required".into(),
    })?;
    let train = subsample(&full, cfg.fraction, stream(cfg.seed, SAMPLE_STREAM))?;
    log::info!("training on {} of {} sentences", train.len(), full.len());
    let dev = load(&cfg.paths.dev, cfg)?;
    let test = load(&cfg.paths.test, cfg)?;
    let vectors = cfg.paths.vectors.as_deref().map(WordVectors::read).transpose()?;

    let entities = EntityDict::build(&train);
    let synonyms = match (&cfg.paths.synonyms, &vectors) {
        (Some(p), _) => SynonymDict::read(p)?,
        (None, Some(v)) => {
            let stop = match &cfg.paths.stopwords {
                Some(p) => read_stopwords(p)?,
                None => HashSet::new(),
            };
            // only words that can be substituted need neighbours
            let keys: HashSet<String> = train
                .examples()
                .iter()
                .flat_map(|e| e.tokens().iter().zip(e.labels()))
                .filter(|(_, l)| *l == "O")
                .map(|(t, _)| t.clone())
                .collect();
            SynonymDict::build(v, cfg.aug.k, &stop, Some(&keys))
        }
        (None, None) => SynonymDict::default(),
    };
    if cfg.aug.method.uses_ts() && synonyms.is_empty() {
        log::warn!("no synonyms available; normal word substitution is disabled");
    }

    let pseudo = generate_augmented_set(&train, &entities, &synonyms, &cfg.aug, stream(cfg.seed, AUGMENT_STREAM))?;
    Ok(Prepared {
        train,
        dev,
        test,
        vectors,
        entities,
        synonyms,
        pseudo,
    })
}

/// `build-dict`: synonym dictionary from a vector file and, given a
/// training file, the entity dictionary.
pub fn build_dict(vectors: &Path, stopwords: Option<&Path>, k: usize, train: Option<&Path>, out: &Path) -> Result<()> {
    if k == 0 {
        return Err(Error::Config {
            key: "k".into(),
            message: "must be at least 1".into(),
        });
    }
    create_dir(out)?;
    let v = WordVectors::read(vectors)?;
    let stop = stopwords.map(read_stopwords).transpose()?.unwrap_or_default();
    let sdict = SynonymDict::build(&v, k, &stop, None);
    write(&out.join(SYNONYMS_FILE), sdict.to_text())?;
    log::info!("{} synonym entries", sdict.len());
    if let Some(t) = train {
        let edict = EntityDict::build(&read_conll(t)?);
        write(&out.join(ENTITIES_FILE), edict.to_text())?;
        log::info!("{} entity mentions", edict.len());
    }
    Ok(())
}

/// Counts written by `augment`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentCounts {
    pub substituted: usize,
    pub mixed: usize,
}

/// `augment`: writes substituted sentences as CoNLL and mixed pairs as a
/// `(id1, id2, λ)` manifest into the output directory.
pub fn augment(cfg: &RunConfig) -> Result<AugmentCounts> {
    let out = output_dir(cfg)?;
    write(&out.join(CONFIG_FILE), cfg.to_text())?;
    let prep = prepare(cfg)?;
    write(&out.join(ENTITIES_FILE), prep.entities.to_text())?;
    write(&out.join(SYNONYMS_FILE), prep.synonyms.to_text())?;

    let substituted: Vec<_> = prep.pseudo.iter().filter_map(PseudoExample::as_sequence).collect();
    let conll = format_conll(substituted.iter().map(|s| (s.tokens(), s.labels())));
    write(&out.join(PSEUDO_FILE), conll)?;

    let mut manifest = String::from("id1\tid2\tlambda\n");
    let mut mixed = 0;
    for p in &prep.pseudo {
        if let PseudoExample::Mixed(mx) = p {
            writeln!(manifest, "{}\t{}\t{}", mx.first_id, mx.second_id, mx.lambda).expect("writing to a String");
            mixed += 1;
        }
    }
    write(&out.join(MIXUP_FILE), manifest)?;
    Ok(AugmentCounts {
        substituted: substituted.len(),
        mixed,
    })
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub method: String,
    pub meta_reweight: bool,
    pub mix_layer: String,
    pub train_sentences: usize,
    pub pseudo_examples: usize,
    pub steps: usize,
    pub best_step: Option<usize>,
    pub best_dev_f1: Option<f64>,
    pub dev: Option<SpanScores>,
    pub test: Option<SpanScores>,
}

/// `train`: the full pipeline. Writes the resolved config, the best
/// checkpoint, the metrics history, the per-step weight log and a summary.
pub fn train(cfg: &RunConfig) -> Result<TrainSummary> {
    let out = output_dir(cfg)?;
    let config_text = cfg.to_text();
    write(&out.join(CONFIG_FILE), &config_text)?;
    let prep = prepare(cfg)?;

    let pseudo: Vec<TrainItem> = prep.pseudo.into_iter().map(TrainItem::from).collect();
    let mut words = BTreeSet::new();
    for ex in prep.train.examples() {
        words.extend(ex.tokens().iter().map(String::as_str));
    }
    for item in &pseudo {
        if let TrainItem::Substituted(s) = item {
            words.extend(s.tokens().iter().map(String::as_str));
        }
    }
    let vocab = Vocab::build(words, cfg.lowercase);
    let labels = label_set(&prep.train.entity_types(), cfg.scheme);
    let mut init_rng = ChaCha8Rng::seed_from_u64(stream(cfg.seed, INIT_STREAM));
    let mut tagger = Tagger::<f64>::new(vocab, labels, cfg.emb_dim, cfg.hidden, &mut init_rng);
    if let Some(v) = &prep.vectors {
        if v.dim() == cfg.emb_dim {
            let hits = tagger.init_from_vectors(v)?;
            log::info!("initialized {hits} embedding rows from vectors");
        } else {
            log::warn!(
                "vector dimension {} differs from emb_dim {}; embeddings stay random",
                v.dim(),
                cfg.emb_dim
            );
        }
    }

    let mut tcfg = cfg.trainer.clone();
    tcfg.seed = stream(cfg.seed, TRAIN_STREAM);
    let pseudo_examples = pseudo.len();
    let outcome = run_training(tagger, &prep.train, pseudo, prep.dev.as_ref(), &tcfg)?;

    outcome
        .tagger
        .to_checkpoint(config_text)
        .save(&out.join(MODEL_FILE))?;
    write(&out.join(METRICS_FILE), json_lines(&outcome.history)?)?;
    write(&out.join(WEIGHT_LOG_FILE), json_lines(&outcome.weight_log)?)?;

    let summary = TrainSummary {
        method: cfg.aug.method.to_string(),
        meta_reweight: cfg.trainer.meta_reweight,
        mix_layer: cfg.aug.mix_layer.to_string(),
        train_sentences: prep.train.len(),
        pseudo_examples,
        steps: outcome.steps,
        best_step: outcome.best_step,
        best_dev_f1: outcome.best_dev_f1,
        dev: prep.dev.as_ref().map(|d| outcome.tagger.evaluate(d)),
        test: prep.test.as_ref().map(|t| outcome.tagger.evaluate(t)),
    };
    write(&out.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}

/// Source of predicted labels for `eval`.
pub enum Predictor<'a> {
    Model(&'a Path),
    Predictions(&'a Path),
}

/// `eval`: span scores of a checkpoint (or a predictions file) against a
/// gold CoNLL file. Writes predictions and `scores.json` when `out` is set.
pub fn eval(predictor: Predictor<'_>, data: &Path, out: Option<&Path>) -> Result<SpanScores> {
    let gold = read_conll(data)?;
    let gold_labels: Vec<&[String]> = gold.examples().iter().map(|e| e.labels()).collect();
    let pred: Vec<Vec<String>> = match predictor {
        Predictor::Model(path) => {
            let tagger = Tagger::<f64>::from_checkpoint(&Checkpoint::load(path)?)?;
            tagger.predict(&gold)
        }
        Predictor::Predictions(path) => {
            let p = read_conll(path)?;
            if p.len() != gold.len() {
                return Err(Error::Data(format!(
                    "{} has {} sentences, gold has {}",
                    path.display(),
                    p.len(),
                    gold.len()
                )));
            }
            for (i, (a, b)) in p.examples().iter().zip(gold.examples()).enumerate() {
                if a.tokens() != b.tokens() {
                    return Err(Error::Data(format!(
                        "sentence {}: prediction tokens do not match gold",
                        i + 1
                    )));
                }
            }
            p.into_examples().into_iter().map(|e| e.labels().to_vec()).collect()
        }
    };
    let scores = span_f1(&pred, &gold_labels);
    if let Some(out) = out {
        create_dir(out)?;
        let conll = format_conll(
            gold.examples()
                .iter()
                .zip(&pred)
                .map(|(e, p)| (e.tokens(), p.as_slice())),
        );
        write(&out.join(PREDICTIONS_FILE), conll)?;
        write(&out.join(SCORES_FILE), serde_json::to_string_pretty(&scores)? + "\n")?;
    }
    Ok(scores)
}

/// `inspect-weights`: converts a run's weight log into
/// `step, example_id, provenance, weight` TSV. Returns the row count.
pub fn inspect_weights(run: &Path) -> Result<usize> {
    let src = run.join(WEIGHT_LOG_FILE);
    let text = fs::read_to_string(&src).map_err(|e| Error::io(&src, e))?;
    let mut out = String::from("step\texample_id\tprovenance\tweight\n");
    let mut rows = 0;
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: WeightRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: src.clone(),
            line: no + 1,
            message: e.to_string(),
        })?;
        writeln!(out, "{}\t{}\t{}\t{}", r.step, r.example_id, r.provenance, r.weight).expect("writing to a String");
        rows += 1;
    }
    write(&run.join(WEIGHTS_TSV_FILE), out)?;
    Ok(rows)
}

/// Reads a metrics history written by `train`.
pub fn read_metrics(path: &Path) -> Result<Vec<EvalRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
