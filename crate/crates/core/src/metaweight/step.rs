use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::weights::{epsilon_grad, reweight, EpsilonGrad, WeightVector};
use super::TrainerConfig;
use crate::augment::{mixup_loss, MixLayer, MixedExample, PseudoExample};
use crate::corpus::LabeledSequence;
use crate::error::{Error, Result};
use crate::gradcore::{clip_global_norm, AdamW, Graph, GradientMap, Var};
use crate::model::{Dropout, Tagger};
use crate::Scalar;

/// Where a training example came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Clean,
    Ts,
    Mixup,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Clean => "clean",
            Provenance::Ts => "ts",
            Provenance::Mixup => "mixup",
        }
    }
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One member of the augmented training set.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainItem {
    Clean(LabeledSequence),
    Substituted(LabeledSequence),
    Mixed(MixedExample),
}

impl TrainItem {
    pub fn provenance(&self) -> Provenance {
        match self {
            TrainItem::Clean(_) => Provenance::Clean,
            TrainItem::Substituted(_) => Provenance::Ts,
            TrainItem::Mixed(_) => Provenance::Mixup,
        }
    }

    /// Loss node of this example: CRF negative log-likelihood, or the
    /// λ-weighted pair of likelihoods for a mixed example.
    pub fn loss<F: Scalar>(
        &self,
        g: &mut Graph<F>,
        tagger: &Tagger<F>,
        layer: MixLayer,
        drop: &mut Dropout<'_, F>,
    ) -> Result<Var> {
        match self {
            TrainItem::Clean(s) | TrainItem::Substituted(s) => tagger.nll(g, s, drop),
            TrainItem::Mixed(mx) => mixup_loss(g, tagger, mx, layer, drop),
        }
    }
}

impl From<PseudoExample> for TrainItem {
    fn from(p: PseudoExample) -> Self {
        match p {
            PseudoExample::Substituted { result, .. } => TrainItem::Substituted(result.sequence),
            PseudoExample::Mixed(mx) => TrainItem::Mixed(mx),
        }
    }
}

/// Loss value and parameter gradient of one example. `dropout = 0` runs the
/// network deterministically.
pub fn example_gradient<F: Scalar>(
    tagger: &Tagger<F>,
    item: &TrainItem,
    layer: MixLayer,
    dropout: f64,
    rng: &mut dyn RngCore,
) -> Result<(F, GradientMap<F>)> {
    let mut g = Graph::new();
    let mut drop = Dropout::sample(dropout, rng);
    let loss = item.loss(&mut g, tagger, layer, &mut drop)?;
    let value = g.scalar_value(loss);
    let mut grads = g.grad(loss, &tagger.params);
    tagger.mask_frozen(&mut grads);
    Ok((value, grads))
}

/// Gradient of the mean loss over `batch` (all clean sequences).
pub fn mean_gradient<F: Scalar>(
    tagger: &Tagger<F>,
    batch: &[&LabeledSequence],
    dropout: f64,
    rng: &mut dyn RngCore,
) -> Result<(F, GradientMap<F>)> {
    assert!(!batch.is_empty(), "meta batch is empty");
    let mut total = GradientMap::zeros(&tagger.params);
    let mut loss = F::zero();
    for &seq in batch {
        let mut g = Graph::new();
        let mut drop = Dropout::sample(dropout, rng);
        let l = tagger.nll(&mut g, seq, &mut drop)?;
        loss += g.scalar_value(l);
        let mut grads = g.grad(l, &tagger.params);
        tagger.mask_frozen(&mut grads);
        total.axpy(F::one(), &grads);
    }
    let inv = F::one() / F::of(batch.len() as f64);
    total.scale(inv);
    Ok((loss * inv, total))
}

/// Outcome of one training step.
#[derive(Debug, Clone)]
pub struct StepReport<F> {
    pub weights: WeightVector<F>,
    /// `None` when reweighting is disabled.
    pub eps_grad: Option<EpsilonGrad<F>>,
    /// Per-example losses before the update.
    pub losses: Vec<F>,
    /// `Σ w_i L_i`
    pub weighted_loss: F,
    /// Global norm of the weighted gradient before clipping.
    pub grad_norm: F,
}

/// One iteration of meta-reweighted training.
///
/// Per-example gradients `g_i` at the current parameters are computed once
/// and reused both for the ε-gradient and for the weighted update
/// `Σ w_i g_i`, which is then clipped and handed to the optimizer.
pub fn meta_train_step<F: Scalar>(
    tagger: &mut Tagger<F>,
    opt: &mut AdamW<F>,
    aug_batch: &[&TrainItem],
    meta_batch: &[&LabeledSequence],
    cfg: &TrainerConfig,
    rng: &mut dyn RngCore,
) -> Result<StepReport<F>> {
    if aug_batch.is_empty() {
        return Err(Error::Data("augmented batch is empty".into()));
    }
    let mut losses = Vec::with_capacity(aug_batch.len());
    let mut grads = Vec::with_capacity(aug_batch.len());
    for item in aug_batch {
        let (l, g) = example_gradient(tagger, item, cfg.mix_layer, cfg.dropout, rng)?;
        if !l.is_finite() || !g.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss or gradient on a {} example",
                item.provenance()
            )));
        }
        losses.push(l);
        grads.push(g);
    }

    let (weights, eps_grad) = if cfg.meta_reweight {
        if meta_batch.is_empty() {
            return Err(Error::Data("meta batch is empty".into()));
        }
        let (_, meta_grad) = mean_gradient(tagger, meta_batch, cfg.dropout, rng)?;
        if !meta_grad.is_finite() {
            return Err(Error::Numeric("non-finite meta gradient".into()));
        }
        let eg = epsilon_grad(&meta_grad, &grads, F::of(cfg.beta()));
        let w = reweight(&eg, F::of(cfg.delta));
        (w, Some(eg))
    } else {
        (WeightVector::uniform(aug_batch.len()), None)
    };
    if weights.weights.iter().all(|w| *w == F::zero()) {
        log::warn!("all example weights are zero; the update is a no-op");
    }

    let mut total = GradientMap::zeros(&tagger.params);
    let mut weighted_loss = F::zero();
    for ((g, &l), &w) in grads.iter().zip(&losses).zip(&weights.weights) {
        total.axpy(w, g);
        weighted_loss += w * l;
    }
    let grad_norm = clip_global_norm(&mut total, F::of(cfg.clip));
    opt.step(&mut tagger.params, &total)?;

    Ok(StepReport {
        weights,
        eps_grad,
        losses,
        weighted_loss,
        grad_norm,
    })
}
