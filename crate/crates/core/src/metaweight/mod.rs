//! Meta-reweighted training: per-example weights from a one-step lookahead
//! against a clean meta batch, and the loop that drives it.

mod step;
mod train;
mod weights;

pub use step::{example_gradient, mean_gradient, meta_train_step, Provenance, StepReport, TrainItem};
pub use train::{train, EvalRecord, TrainOutcome, WeightRecord};
pub use weights::{epsilon_grad, reweight, EpsilonGrad, WeightVector};

use crate::augment::MixLayer;
use crate::error::{Error, Result};
use crate::gradcore::AdamWConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    /// Meta batch size `m`.
    pub meta_batch: usize,
    /// Augmented batch size `n`.
    pub batch: usize,
    /// Explicit step count; overrides `epochs`.
    pub steps: Option<usize>,
    /// Passes over the training pool when `steps` is unset.
    pub epochs: usize,
    /// Lookahead step size; defaults to the optimizer learning rate.
    pub beta: Option<f64>,
    pub delta: f64,
    pub optimizer: AdamWConfig,
    pub clip: f64,
    pub dropout: f64,
    pub seed: u64,
    pub meta_reweight: bool,
    /// Dev evaluation cadence in steps; defaults to once per epoch.
    pub eval_every: Option<usize>,
    pub mix_layer: MixLayer,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            meta_batch: 16,
            batch: 16,
            steps: None,
            epochs: 30,
            beta: None,
            delta: 1e-8,
            optimizer: AdamWConfig::default(),
            clip: 5.0,
            dropout: 0.5,
            seed: 42,
            meta_reweight: true,
            eval_every: None,
            mix_layer: MixLayer::Embedding,
        }
    }
}

impl TrainerConfig {
    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(self.optimizer.lr)
    }

    pub fn steps_per_epoch(&self, pool: usize) -> usize {
        pool.div_ceil(self.batch).max(1)
    }

    pub fn resolved_steps(&self, pool: usize) -> usize {
        self.steps.unwrap_or(self.epochs * self.steps_per_epoch(pool))
    }

    pub fn resolved_eval_every(&self, pool: usize) -> usize {
        self.eval_every.unwrap_or(self.steps_per_epoch(pool)).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| {
            Err(Error::Config {
                key: key.into(),
                message,
            })
        };
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if self.meta_batch < 1 {
            return bad("meta_batch", "must be at least 1".into());
        }
        if self.batch < 1 {
            return bad("batch", "must be at least 1".into());
        }
        if !positive(self.beta()) {
            return bad("beta", format!("must be > 0, got {}", self.beta()));
        }
        if !positive(self.delta) {
            return bad("delta", format!("must be > 0, got {}", self.delta));
        }
        if !positive(self.optimizer.lr) {
            return bad("lr", format!("must be > 0, got {}", self.optimizer.lr));
        }
        for (group, lr) in &self.optimizer.group_lr {
            if !positive(*lr) {
                return bad(&format!("{group}_lr"), format!("must be > 0, got {lr}"));
            }
        }
        if !(0.0..1.0).contains(&self.optimizer.beta1) {
            return bad("beta1", format!("must be in [0, 1), got {}", self.optimizer.beta1));
        }
        if !(0.0..1.0).contains(&self.optimizer.beta2) {
            return bad("beta2", format!("must be in [0, 1), got {}", self.optimizer.beta2));
        }
        if !positive(self.optimizer.eps) {
            return bad("eps", format!("must be > 0, got {}", self.optimizer.eps));
        }
        if !(self.optimizer.weight_decay >= 0.0 && self.optimizer.weight_decay.is_finite()) {
            return bad("weight_decay", format!("must be >= 0, got {}", self.optimizer.weight_decay));
        }
        if !positive(self.clip) {
            return bad("clip", format!("must be > 0, got {}", self.clip));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout", format!("must be in [0, 1), got {}", self.dropout));
        }
        if self.eval_every == Some(0) {
            return bad("eval_every", "must be at least 1".into());
        }
        Ok(())
    }
}
