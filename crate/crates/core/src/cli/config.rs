use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::augment::AugConfig;
use crate::corpus::Scheme;
use crate::error::{Error, Result};
use crate::metaweight::TrainerConfig;
use crate::model::EMBEDDING_GROUP;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Paths {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Word vectors: synonym search and embedding initialization.
    pub vectors: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    /// Prebuilt synonym dictionary; skips the neighbour search.
    pub synonyms: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Paths {
    fn absolutize(&mut self) -> Result<()> {
        for p in [
            &mut self.train,
            &mut self.dev,
            &mut self.test,
            &mut self.vectors,
            &mut self.stopwords,
            &mut self.synonyms,
            &mut self.output,
        ]
        .into_iter()
        .flatten()
        {
            *p = std::path::absolute(&*p).map_err(|e| Error::io(&*p, e))?;
        }
        Ok(())
    }
}

/// Everything a run needs, read from a flat `key = value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub paths: Paths,
    /// Share of the training file kept, in (0, 1].
    pub fraction: f64,
    /// Master seed; subsampling, augmentation, initialization and training
    /// each derive their own stream from it.
    pub seed: u64,
    /// Tagging scheme the model is trained in.
    pub scheme: Scheme,
    pub lowercase: bool,
    pub emb_dim: usize,
    pub hidden: usize,
    pub aug: AugConfig,
    pub trainer: TrainerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            fraction: 1.0,
            seed: 42,
            scheme: Scheme::Bioes,
            lowercase: false,
            emb_dim: 50,
            hidden: 64,
            aug: AugConfig::default(),
            trainer: TrainerConfig::default(),
        }
    }
}

/// Every accepted key, in the order they are written back.
pub const KEYS: &[&str] = &[
    "paths.train",
    "paths.dev",
    "paths.test",
    "paths.vectors",
    "paths.stopwords",
    "paths.synonyms",
    "paths.output",
    "fraction",
    "seed",
    "scheme",
    "lowercase",
    "emb_dim",
    "hidden",
    "method",
    "gamma",
    "p_sub",
    "k",
    "times",
    "alpha",
    "mix_layer",
    "meta_reweight",
    "batch",
    "meta_batch",
    "steps",
    "epochs",
    "eval_every",
    "beta",
    "delta",
    "lr",
    "embedding_lr",
    "beta1",
    "beta2",
    "eps",
    "weight_decay",
    "clip",
    "dropout",
];

fn value<T: FromStr>(key: &str, raw: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>().map_err(|e| format!("`{key}`: cannot parse `{raw}`: {e}"))
}

fn boolean(key: &str, raw: &str) -> std::result::Result<bool, String> {
    match raw {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("`{key}`: expected true or false, got `{raw}`")),
    }
}

impl RunConfig {
    /// Parses `text`; `path` is used in diagnostics and to resolve relative
    /// paths against the config file's directory. Does not validate.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new(""));
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (no, line) in text.lines().enumerate() {
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: no + 1,
                message,
            };
            let line = line.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, raw)) = line.split_once('=') else {
                return Err(err(format!("expected `key = value`, got `{line}`")));
            };
            let (key, raw) = (key.trim(), raw.trim());
            if !KEYS.contains(&key) {
                return Err(err(format!("unknown key `{key}`")));
            }
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            cfg.set(key, raw, base).map_err(err)?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, raw: &str, base: &Path) -> std::result::Result<(), String> {
        let path = || Some(base.join(raw));
        let t = &mut self.trainer;
        match key {
            "paths.train" => self.paths.train = path(),
            "paths.dev" => self.paths.dev = path(),
            "paths.test" => self.paths.test = path(),
            "paths.vectors" => self.paths.vectors = path(),
            "paths.stopwords" => self.paths.stopwords = path(),
            "paths.synonyms" => self.paths.synonyms = path(),
            "paths.output" => self.paths.output = path(),
            "fraction" => self.fraction = value(key, raw)?,
            "seed" => self.seed = value(key, raw)?,
            "scheme" => self.scheme = value(key, raw)?,
            "lowercase" => self.lowercase = boolean(key, raw)?,
            "emb_dim" => self.emb_dim = value(key, raw)?,
            "hidden" => self.hidden = value(key, raw)?,
            "method" => self.aug.method = value(key, raw)?,
            "gamma" => self.aug.gamma = value(key, raw)?,
            "p_sub" => self.aug.p_sub = value(key, raw)?,
            "k" => self.aug.k = value(key, raw)?,
            "times" => self.aug.times = value(key, raw)?,
            "alpha" => self.aug.alpha = value(key, raw)?,
            "mix_layer" => {
                self.aug.mix_layer = value(key, raw)?;
                t.mix_layer = self.aug.mix_layer;
            }
            "meta_reweight" => t.meta_reweight = boolean(key, raw)?,
            "batch" => t.batch = value(key, raw)?,
            "meta_batch" => t.meta_batch = value(key, raw)?,
            "steps" => t.steps = Some(value(key, raw)?),
            "epochs" => t.epochs = value(key, raw)?,
            "eval_every" => t.eval_every = Some(value(key, raw)?),
            "beta" => t.beta = Some(value(key, raw)?),
            "delta" => t.delta = value(key, raw)?,
            "lr" => t.optimizer.lr = value(key, raw)?,
            "embedding_lr" => {
                t.optimizer.group_lr.insert(EMBEDDING_GROUP.into(), value(key, raw)?);
            }
            "beta1" => t.optimizer.beta1 = value(key, raw)?,
            "beta2" => t.optimizer.beta2 = value(key, raw)?,
            "eps" => t.optimizer.eps = value(key, raw)?,
            "weight_decay" => t.optimizer.weight_decay = value(key, raw)?,
            "clip" => t.clip = value(key, raw)?,
            "dropout" => t.dropout = value(key, raw)?,
            _ => unreachable!("key list and setter disagree on `{key}`"),
        }
        if key == "seed" {
            self.trainer.seed = self.seed;
        }
        Ok(())
    }

    /// Range checks plus existence of every referenced input file. `train`
    /// and `output` are required.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| {
            Err(Error::Config {
                key: key.into(),
                message,
            })
        };
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return bad("fraction", format!("must be in (0, 1], got {}", self.fraction));
        }
        if self.emb_dim == 0 {
            return bad("emb_dim", "must be at least 1".into());
        }
        if self.hidden == 0 {
            return bad("hidden", "must be at least 1".into());
        }
        self.aug.validate()?;
        self.trainer.validate()?;

        let p = &self.paths;
        if p.train.is_none() {
            return bad("paths.train", "required".into());
        }
        if p.output.is_none() {
            return bad("paths.output", "required".into());
        }
        let inputs = [
            ("paths.train", &p.train),
            ("paths.dev", &p.dev),
            ("paths.test", &p.test),
            ("paths.vectors", &p.vectors),
            ("paths.stopwords", &p.stopwords),
            ("paths.synonyms", &p.synonyms),
        ];
        for (key, path) in inputs {
            if let Some(path) = path {
                if !path.is_file() {
                    return bad(key, format!("file not found: {}", path.display()));
                }
            }
        }
        Ok(())
    }

    /// Resolved configuration in the same format, every key present. Unset
    /// optional values are written as comments.
    pub fn to_text(&self) -> String {
        let t = &self.trainer;
        let opt_path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let mut out = String::new();
        for &key in KEYS {
            let v: Option<String> = match key {
                "paths.train" => opt_path(&self.paths.train),
                "paths.dev" => opt_path(&self.paths.dev),
                "paths.test" => opt_path(&self.paths.test),
                "paths.vectors" => opt_path(&self.paths.vectors),
                "paths.stopwords" => opt_path(&self.paths.stopwords),
                "paths.synonyms" => opt_path(&self.paths.synonyms),
                "paths.output" => opt_path(&self.paths.output),
                "fraction" => Some(self.fraction.to_string()),
                "seed" => Some(self.seed.to_string()),
                "scheme" => Some(self.scheme.to_string()),
                "lowercase" => Some(self.lowercase.to_string()),
                "emb_dim" => Some(self.emb_dim.to_string()),
                "hidden" => Some(self.hidden.to_string()),
                "method" => Some(self.aug.method.to_string()),
                "gamma" => Some(self.aug.gamma.to_string()),
                "p_sub" => Some(self.aug.p_sub.to_string()),
                "k" => Some(self.aug.k.to_string()),
                "times" => Some(self.aug.times.to_string()),
                "alpha" => Some(self.aug.alpha.to_string()),
                "mix_layer" => Some(self.aug.mix_layer.to_string()),
                "meta_reweight" => Some(t.meta_reweight.to_string()),
                "batch" => Some(t.batch.to_string()),
                "meta_batch" => Some(t.meta_batch.to_string()),
                "steps" => t.steps.map(|s| s.to_string()),
                "epochs" => Some(t.epochs.to_string()),
                "eval_every" => t.eval_every.map(|s| s.to_string()),
                "beta" => Some(t.beta().to_string()),
                "delta" => Some(t.delta.to_string()),
                "lr" => Some(t.optimizer.lr.to_string()),
                "embedding_lr" => t.optimizer.group_lr.get(EMBEDDING_GROUP).map(|v| v.to_string()),
                "beta1" => Some(t.optimizer.beta1.to_string()),
                "beta2" => Some(t.optimizer.beta2.to_string()),
                "eps" => Some(t.optimizer.eps.to_string()),
                "weight_decay" => Some(t.optimizer.weight_decay.to_string()),
                "clip" => Some(t.clip.to_string()),
                "dropout" => Some(t.dropout.to_string()),
                _ => unreachable!(),
            };
            match v {
                Some(v) => writeln!(out, "{key} = {v}"),
                None => writeln!(out, "# {key} ="),
            }
            .expect("writing to a String");
        }
        out
    }
}

/// Reads, parses and validates a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    // an unreadable config file is bad input, not a runtime failure
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        key: "config".into(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let mut cfg = RunConfig::parse(&text, path)?;
    cfg.validate()?;
    cfg.paths.absolutize()?;
    Ok(cfg)
}
