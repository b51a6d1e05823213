use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::conll::Corpus;
use crate::error::{Error, Result};

/// Uniform sample of `round(fraction · N)` examples without replacement,
/// keeping the original order among kept examples.
pub fn subsample(corpus: &Corpus, fraction: f64, seed: u64) -> Result<Corpus> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config {
            key: "fraction".into(),
            message: format!("must be in (0, 1], got {fraction}"),
        });
    }
    let n = corpus.len();
    let k = (fraction * n as f64).round() as usize;
    if k == 0 {
        return Err(Error::Data(format!(
            "subsampling {n} examples at fraction {fraction} leaves an empty training set"
        )));
    }
    if k == n {
        return Ok(corpus.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = index::sample(&mut rng, n, k).into_vec();
    keep.sort_unstable();
    let examples = keep.into_iter().map(|i| corpus.examples()[i].clone()).collect();
    Corpus::new(examples, corpus.scheme())
}
