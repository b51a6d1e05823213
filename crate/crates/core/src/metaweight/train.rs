use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::step::{meta_train_step, Provenance, TrainItem};
use super::TrainerConfig;
use crate::corpus::{Corpus, LabeledSequence};
use crate::error::{Error, Result};
use crate::gradcore::{AdamW, ParamStore};
use crate::model::Tagger;
use crate::Scalar;

/// One line of the metrics history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub step: usize,
    pub dev_f1: Option<f64>,
    /// Mean normalized weight per provenance over the steps since the
    /// previous record; `None` when no such example was drawn.
    pub mean_weight_clean: Option<f64>,
    pub mean_weight_ts: Option<f64>,
    pub mean_weight_mixup: Option<f64>,
    /// Mean per-example loss over the same window.
    pub loss: f64,
}

/// Weight of one example in one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRecord {
    pub step: usize,
    /// Index into the training pool: clean examples first, then the pseudo
    /// set in its given order.
    pub example_id: usize,
    pub provenance: Provenance,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<F> {
    /// Best-dev parameters, or the final ones without a dev set.
    pub tagger: Tagger<F>,
    pub history: Vec<EvalRecord>,
    pub weight_log: Vec<WeightRecord>,
    pub steps: usize,
    pub best_step: Option<usize>,
    pub best_dev_f1: Option<f64>,
}

#[derive(Default)]
struct Window {
    weight_sum: BTreeMap<Provenance, (f64, usize)>,
    loss_sum: f64,
    loss_count: usize,
}

impl Window {
    fn mean(&self, p: Provenance) -> Option<f64> {
        self.weight_sum
            .get(&p)
            .filter(|(_, n)| *n > 0)
            .map(|(s, n)| s / *n as f64)
    }
}

/// Meta-reweighted training over `clean ∪ pseudo`.
///
/// Every step draws a fresh augmented batch from the pool and a fresh meta
/// batch from `clean`, both without replacement within the step. Dev span F1
/// is computed every `eval_every` steps and at the last step; the best
/// parameters are kept.
pub fn train<F: Scalar>(
    mut tagger: Tagger<F>,
    clean: &Corpus,
    pseudo: Vec<TrainItem>,
    dev: Option<&Corpus>,
    cfg: &TrainerConfig,
) -> Result<TrainOutcome<F>> {
    cfg.validate()?;
    if clean.is_empty() {
        return Err(Error::Data("clean training corpus is empty".into()));
    }
    let mut pool: Vec<TrainItem> = clean.examples().iter().cloned().map(TrainItem::Clean).collect();
    pool.extend(pseudo);
    let meta_pool: Vec<&LabeledSequence> = clean.examples().iter().collect();

    let steps = cfg.resolved_steps(pool.len());
    let eval_every = cfg.resolved_eval_every(pool.len());
    let mut outcome = TrainOutcome {
        tagger: tagger.clone(),
        history: Vec::new(),
        weight_log: Vec::new(),
        steps,
        best_step: None,
        best_dev_f1: None,
    };
    if steps == 0 {
        return Ok(outcome);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = AdamW::new(cfg.optimizer.clone(), &tagger.params);
    let mut best: Option<ParamStore<F>> = None;
    let mut window = Window::default();
    let n = cfg.batch.min(pool.len());
    let m = cfg.meta_batch.min(meta_pool.len());

    for step in 1..=steps {
        let ids: Vec<usize> = index::sample(&mut rng, pool.len(), n).into_vec();
        let batch: Vec<&TrainItem> = ids.iter().map(|&i| &pool[i]).collect();
        let meta: Vec<&LabeledSequence> = if cfg.meta_reweight {
            index::sample(&mut rng, meta_pool.len(), m)
                .into_iter()
                .map(|i| meta_pool[i])
                .collect()
        } else {
            Vec::new()
        };

        let report = meta_train_step(&mut tagger, &mut opt, &batch, &meta, cfg, &mut rng).map_err(|e| {
            Error::Diverged {
                step,
                message: e.to_string(),
            }
        })?;

        for (k, &id) in ids.iter().enumerate() {
            let p = pool[id].provenance();
            let w = report.weights.weights[k].as_f64();
            let slot = window.weight_sum.entry(p).or_default();
            slot.0 += w;
            slot.1 += 1;
            outcome.weight_log.push(WeightRecord {
                step,
                example_id: id,
                provenance: p,
                weight: w,
            });
        }
        for l in &report.losses {
            window.loss_sum += l.as_f64();
            window.loss_count += 1;
        }

        if step % eval_every == 0 || step == steps {
            let dev_f1 = dev.map(|d| tagger.evaluate(d).f1);
            let loss = window.loss_sum / window.loss_count.max(1) as f64;
            log::info!(
                "step {step}/{steps} loss {loss:.4}{}",
                dev_f1.map(|f| format!(" dev f1 {f:.4}")).unwrap_or_default()
            );
            if let Some(f1) = dev_f1 {
                if outcome.best_dev_f1.is_none_or(|b| f1 > b) {
                    outcome.best_dev_f1 = Some(f1);
                    outcome.best_step = Some(step);
                    best = Some(tagger.params.clone());
                }
            }
            outcome.history.push(EvalRecord {
                step,
                dev_f1,
                mean_weight_clean: window.mean(Provenance::Clean),
                mean_weight_ts: window.mean(Provenance::Ts),
                mean_weight_mixup: window.mean(Provenance::Mixup),
                loss,
            });
            window = Window::default();
        }
    }

    if let Some(params) = best {
        tagger.params = params;
    }
    outcome.tagger = tagger;
    Ok(outcome)
}
