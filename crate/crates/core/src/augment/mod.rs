//! Self-augmentation: entity/synonym dictionaries, token substitution and
//! mixup for CRF.

mod dicts;
mod mixup;
mod substitute;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use dicts::{read_stopwords, EntityDict, Synonym, SynonymDict};
pub use mixup::{mix_embeddings, mix_nodes, mixed_forward, mixup_loss, sample_mixup_pair, MixLayer, MixedExample};
pub use substitute::{token_substitute, Replacement, Substituted, SubstitutionKind, MAX_RETRIES};

use crate::corpus::{Corpus, LabeledSequence};
use crate::error::{Error, Result};

/// Which augmentation methods feed the pseudo set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// No augmentation.
    Baseline,
    /// Token substitution only.
    Ts,
    /// Mixup only.
    Mixup,
    /// Token substitution and mixup, split evenly.
    #[default]
    Both,
}

impl Method {
    pub fn uses_ts(self) -> bool {
        matches!(self, Method::Ts | Method::Both)
    }

    pub fn uses_mixup(self) -> bool {
        matches!(self, Method::Mixup | Method::Both)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Baseline => "baseline",
            Method::Ts => "ts",
            Method::Mixup => "mixup",
            Method::Both => "both",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Method::Baseline),
            "ts" => Ok(Method::Ts),
            "mixup" => Ok(Method::Mixup),
            "both" => Ok(Method::Both),
            _ => Err(format!("unknown method `{s}` (expected baseline, ts, mixup or both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugConfig {
    /// Share of substitution operations that are entity mention substitutions.
    pub gamma: f64,
    /// Per-site substitution probability.
    pub p_sub: f64,
    /// Synonyms kept per word.
    pub k: usize,
    /// Pseudo examples generated per clean example.
    pub times: usize,
    /// Beta(α, α) parameter for the mixup weight.
    pub alpha: f64,
    pub mix_layer: MixLayer,
    pub method: Method,
}

impl Default for AugConfig {
    fn default() -> Self {
        Self {
            gamma: 0.2,
            p_sub: 0.3,
            k: 5,
            times: 5,
            alpha: 7.0,
            mix_layer: MixLayer::Embedding,
            method: Method::Both,
        }
    }
}

impl AugConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| {
            Err(Error::Config {
                key: key.into(),
                message,
            })
        };
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma", format!("must be in [0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.p_sub) {
            return bad("p_sub", format!("must be in [0, 1], got {}", self.p_sub));
        }
        if self.k < 1 {
            return bad("k", "must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha", format!("must be > 0, got {}", self.alpha));
        }
        Ok(())
    }
}

/// An augmented training example.
#[derive(Debug, Clone, PartialEq)]
pub enum PseudoExample {
    Substituted {
        /// Index of the clean source sentence.
        source: usize,
        result: Substituted,
    },
    Mixed(MixedExample),
}

impl PseudoExample {
    pub fn is_mixed(&self) -> bool {
        matches!(self, PseudoExample::Mixed(_))
    }

    pub fn as_sequence(&self) -> Option<&LabeledSequence> {
        match self {
            PseudoExample::Substituted { result, .. } => Some(&result.sequence),
            PseudoExample::Mixed(_) => None,
        }
    }
}

/// Seed of the generator for pseudo example `index`.
pub fn example_seed(seed: u64, index: usize) -> u64 {
    seed ^ index as u64
}

/// Generates `times × |corpus|` pseudo examples. With both methods enabled
/// the first half (rounded up) are substituted and the rest mixed. Clean
/// originals are not included.
///
/// Each pseudo example draws from its own generator seeded with
/// [`example_seed`], so the output is a pure function of the inputs.
pub fn generate_augmented_set(
    corpus: &Corpus,
    edict: &EntityDict,
    sdict: &SynonymDict,
    cfg: &AugConfig,
    seed: u64,
) -> Result<Vec<PseudoExample>> {
    cfg.validate()?;
    let total = cfg.times * corpus.len();
    let (n_ts, n_mix) = match cfg.method {
        Method::Baseline => (0, 0),
        Method::Ts => (total, 0),
        Method::Mixup => (0, total),
        Method::Both => (total.div_ceil(2), total / 2),
    };
    let examples = corpus.examples();
    let mut out = Vec::with_capacity(n_ts + n_mix);

    let mut skipped = 0;
    for idx in 0..n_ts {
        let mut rng = ChaCha8Rng::seed_from_u64(example_seed(seed, idx));
        // cycle through sources; on a skip, redraw uniformly
        let mut source = idx % examples.len();
        let mut made = None;
        for _ in 0..4 * MAX_RETRIES {
            if let Some(result) = token_substitute(&examples[source], edict, sdict, cfg, &mut rng) {
                made = Some(PseudoExample::Substituted { source, result });
                break;
            }
            source = rng.random_range(0..examples.len());
        }
        match made {
            Some(p) => out.push(p),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("token substitution found no applicable site for {skipped} of {n_ts} draws");
    }

    for idx in 0..n_mix {
        let mut rng = ChaCha8Rng::seed_from_u64(example_seed(seed, n_ts + idx));
        out.push(PseudoExample::Mixed(sample_mixup_pair(examples, cfg.alpha, &mut rng)?));
    }
    Ok(out)
}
