use std::collections::BTreeMap;

use super::{GradientMap, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Learning-rate overrides keyed by parameter group.
    pub group_lr: BTreeMap<String, f64>,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-8,
            weight_decay: 1e-4,
            group_lr: BTreeMap::new(),
        }
    }
}

/// AdamW with decoupled weight decay and bias-corrected moments.
#[derive(Debug, Clone)]
pub struct AdamW<F> {
    pub config: AdamWConfig,
    first: Vec<Tensor<F>>,
    second: Vec<Tensor<F>>,
    step: u64,
}

impl<F: Scalar> AdamW<F> {
    pub fn new(config: AdamWConfig, store: &ParamStore<F>) -> Self {
        let zeros: Vec<Tensor<F>> = store
            .trainable_ids()
            .into_iter()
            .map(|id| store.value(id).zeros_like())
            .collect();
        Self {
            config,
            second: zeros.clone(),
            first: zeros,
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update. A non-finite gradient aborts the step and leaves both the
    /// parameters and the optimizer state untouched.
    pub fn step(&mut self, store: &mut ParamStore<F>, grads: &GradientMap<F>) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::Numeric("non-finite gradient passed to AdamW".into()));
        }
        assert_eq!(grads.len(), self.first.len(), "gradient map does not match optimizer state");
        assert!(self.config.lr > 0.0, "learning rate must be positive");

        self.step += 1;
        let t = self.step as i32;
        let b1 = F::of(self.config.beta1);
        let b2 = F::of(self.config.beta2);
        let eps = F::of(self.config.eps);
        let wd = F::of(self.config.weight_decay);
        let c1 = F::one() - b1.powi(t);
        let c2 = F::one() - b2.powi(t);

        for (slot, (id, g)) in grads.iter().enumerate() {
            let group = &store.entry(id).group;
            let lr = F::of(*self.config.group_lr.get(group).unwrap_or(&self.config.lr));
            let m = self.first[slot].data_mut();
            let v = self.second[slot].data_mut();
            let p = store.value_mut(id).data_mut();
            for i in 0..p.len() {
                let gi = g.data()[i];
                m[i] = b1 * m[i] + (F::one() - b1) * gi;
                v[i] = b2 * v[i] + (F::one() - b2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] = p[i] - lr * wd * p[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<F: Scalar>(grads: &mut GradientMap<F>, max_norm: F) -> F {
    assert!(max_norm > F::zero(), "max_norm must be positive");
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(v: f64) -> (ParamStore<f64>, GradientMap<f64>) {
        let mut s = ParamStore::new();
        s.insert("p", "default", true, Tensor::vector(vec![v]));
        let g = GradientMap::zeros(&s);
        (s, g)
    }

    #[test]
    fn zero_gradient_no_decay_is_identity() {
        let (mut s, g) = single(1.5);
        let mut opt = AdamW::new(
            AdamWConfig {
                weight_decay: 0.0,
                ..Default::default()
            },
            &s,
        );
        opt.step(&mut s, &g).unwrap();
        assert_eq!(s.get("p").unwrap().data(), &[1.5]);
        assert_eq!(opt.steps_taken(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let (mut s, mut g) = single(1.0);
        g.get_mut("p").unwrap().data_mut()[0] = 1.0;
        let mut opt = AdamW::new(
            AdamWConfig {
                lr: 0.1,
                weight_decay: 0.0,
                ..Default::default()
            },
            &s,
        );
        opt.step(&mut s, &g).unwrap();
        // m̂ = 1, v̂ = 1 after bias correction: p = 1 - 0.1 * 1 / (1 + 1e-8)
        let p = s.get("p").unwrap().data()[0];
        assert!((p - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn decoupled_decay_shrinks_multiplicatively() {
        let (mut s, g) = single(2.0);
        let mut opt = AdamW::new(
            AdamWConfig {
                lr: 0.01,
                weight_decay: 1e-4,
                ..Default::default()
            },
            &s,
        );
        opt.step(&mut s, &g).unwrap();
        let p = s.get("p").unwrap().data()[0];
        assert!((p - 2.0 * (1.0 - 0.01 * 1e-4)).abs() < 1e-15);
    }

    #[test]
    fn group_learning_rate_overrides_default() {
        let mut s = ParamStore::<f64>::new();
        s.insert("a", "embedding", true, Tensor::vector(vec![0.0]));
        s.insert("b", "default", true, Tensor::vector(vec![0.0]));
        let mut g = GradientMap::zeros(&s);
        g.get_mut("a").unwrap().data_mut()[0] = 1.0;
        g.get_mut("b").unwrap().data_mut()[0] = 1.0;
        let mut cfg = AdamWConfig {
            lr: 0.1,
            weight_decay: 0.0,
            ..Default::default()
        };
        cfg.group_lr.insert("embedding".into(), 0.01);
        let mut opt = AdamW::new(cfg, &s);
        opt.step(&mut s, &g).unwrap();
        let a = s.get("a").unwrap().data()[0];
        let b = s.get("b").unwrap().data()[0];
        assert!((a / b - 0.1).abs() < 1e-9);
    }

    #[test]
    fn nan_gradient_aborts_without_mutation() {
        let (mut s, mut g) = single(1.0);
        g.get_mut("p").unwrap().data_mut()[0] = f64::NAN;
        let mut opt = AdamW::new(AdamWConfig::default(), &s);
        assert!(opt.step(&mut s, &g).is_err());
        assert_eq!(s.get("p").unwrap().data(), &[1.0]);
        assert_eq!(opt.steps_taken(), 0);
    }

    fn grads(values: &[f64]) -> GradientMap<f64> {
        GradientMap::from_named(vec![("g".into(), Tensor::vector(values.to_vec()))])
    }

    #[test]
    fn clipping_cases() {
        let mut small = grads(&[0.0, 3.0]);
        clip_global_norm(&mut small, 5.0);
        assert_eq!(small.tensors()[0].data(), &[0.0, 3.0]);

        let mut big = grads(&[6.0, 8.0]);
        assert_eq!(clip_global_norm(&mut big, 5.0), 10.0);
        assert_eq!(big.tensors()[0].data(), &[3.0, 4.0]);
        assert!((big.global_norm() - 5.0).abs() < 1e-12);

        let mut zero = grads(&[0.0, 0.0]);
        clip_global_norm(&mut zero, 5.0);
        assert_eq!(zero.tensors()[0].data(), &[0.0, 0.0]);
    }
}
