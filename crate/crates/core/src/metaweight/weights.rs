use crate::gradcore::{grad_dot, sigmoid, GradientMap};
use crate::Scalar;

/// `∂ L_meta / ∂ ε_i` at `ε = 0`, one entry per augmented example.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonGrad<F>(pub Vec<F>);

/// Example weights for one augmented batch.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector<F> {
    /// `ŵ_i = σ(−∇ε_i)`
    pub raw: Vec<F>,
    /// `w_i = ŵ_i / (Σ_j ŵ_j + δ)`
    pub weights: Vec<F>,
}

impl<F: Scalar> WeightVector<F> {
    /// Equal weights `1/n`, used when reweighting is disabled.
    pub fn uniform(n: usize) -> Self {
        let w = F::one() / F::of(n as f64);
        Self {
            raw: vec![F::one(); n],
            weights: vec![w; n],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> F {
        self.weights.iter().copied().sum()
    }
}

/// Closed-form derivative of the lookahead meta loss with respect to the
/// per-example loss weights ε at ε = 0.
///
/// With `Θ̂(ε) = Θ − β Σ_j ε_j g_j(Θ)` the lookahead is linear in ε, so
/// `∂/∂ε_i L_meta(Θ̂(ε))|_{ε=0} = −β ⟨∇L_meta(Θ), g_i(Θ)⟩` exactly.
pub fn epsilon_grad<F: Scalar>(meta_grad: &GradientMap<F>, example_grads: &[GradientMap<F>], beta: F) -> EpsilonGrad<F> {
    let out: Vec<F> = example_grads
        .iter()
        .map(|g| -beta * grad_dot(meta_grad, g))
        .collect();
    EpsilonGrad(out)
}

/// Sigmoid of the negated ε-gradient, normalized over the batch.
pub fn reweight<F: Scalar>(eg: &EpsilonGrad<F>, delta: F) -> WeightVector<F> {
    assert!(delta > F::zero(), "delta must be positive");
    let raw: Vec<F> = eg.0.iter().map(|&d| sigmoid(-d)).collect();
    let denom = raw.iter().copied().sum::<F>() + delta;
    let weights = raw.iter().map(|&r| r / denom).collect();
    WeightVector { raw, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcore::Tensor;

    fn gm(v: &[f64]) -> GradientMap<f64> {
        GradientMap::from_named(vec![("p".into(), Tensor::vector(v.to_vec()))])
    }

    #[test]
    fn identical_example_gets_nonpositive_grad() {
        let g = gm(&[0.3, -1.0]);
        let eg = epsilon_grad(&g, std::slice::from_ref(&g), 0.1);
        assert!((eg.0[0] + 0.1 * g.norm_sq()).abs() < 1e-15);
        assert!(reweight(&eg, 1e-8).raw[0] >= 0.5);
    }

    #[test]
    fn orthogonal_example_gets_half() {
        let eg = epsilon_grad(&gm(&[1.0, 0.0]), &[gm(&[0.0, 5.0])], 0.1);
        assert_eq!(eg.0[0], 0.0);
        assert_eq!(reweight(&eg, 1e-8).raw[0], 0.5);
    }

    #[test]
    fn negated_gradient_negates_entry() {
        let meta = gm(&[0.4, -0.2]);
        let a = epsilon_grad(&meta, &[gm(&[1.0, 2.0])], 0.5);
        let b = epsilon_grad(&meta, &[gm(&[-1.0, -2.0])], 0.5);
        assert_eq!(a.0[0], -b.0[0]);
    }

    #[test]
    fn zero_grads_give_equal_weights() {
        let w = reweight(&EpsilonGrad(vec![0.0f64; 4]), 1e-8);
        for &x in &w.weights {
            assert!((x - 0.5 / (2.0 + 1e-8)).abs() < 1e-16);
        }
    }

    #[test]
    fn log_three_hand_case() {
        let ln3 = 3f64.ln();
        let w = reweight(&EpsilonGrad(vec![-ln3, ln3]), 1e-8);
        assert!((w.raw[0] - 0.75).abs() < 1e-15);
        assert!((w.raw[1] - 0.25).abs() < 1e-15);
        assert!((w.weights[0] - 0.75).abs() < 1e-8);
        assert!((w.weights[1] - 0.25).abs() < 1e-8);
    }

    #[test]
    fn most_aligned_example_gets_largest_weight() {
        let w = reweight(&EpsilonGrad(vec![0.5f64, -3.0, 1.0, 0.2]), 1e-8);
        let best = (0..4).max_by(|&a, &b| w.weights[a].total_cmp(&w.weights[b])).unwrap();
        assert_eq!(best, 1);
    }
}
