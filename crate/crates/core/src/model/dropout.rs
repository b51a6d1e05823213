use rand::{Rng, RngCore};

use crate::gradcore::{Graph, Tensor, Var};
use crate::Scalar;

enum Mode<'a> {
    Off,
    Sample { rate: f64, rng: &'a mut dyn RngCore },
    Replay,
}

/// Source of dropout masks for one forward pass.
///
/// Masks are explicit tensors (inverted dropout: entries are `0` or
/// `1/(1-rate)`). A sampling pass records its masks so the exact same
/// network can be replayed, which is what gradient checks need.
pub struct Dropout<'a, F> {
    mode: Mode<'a>,
    masks: Vec<Tensor<F>>,
    cursor: usize,
}

impl<'a, F: Scalar> Dropout<'a, F> {
    /// Evaluation mode: identity.
    pub fn off() -> Self {
        Self {
            mode: Mode::Off,
            masks: Vec::new(),
            cursor: 0,
        }
    }

    pub fn sample(rate: f64, rng: &'a mut dyn RngCore) -> Self {
        assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
        if rate == 0.0 {
            return Self::off();
        }
        Self {
            mode: Mode::Sample { rate, rng },
            masks: Vec::new(),
            cursor: 0,
        }
    }

    /// Replays previously recorded masks in order.
    pub fn replay(masks: Vec<Tensor<F>>) -> Self {
        Self {
            mode: Mode::Replay,
            masks,
            cursor: 0,
        }
    }

    pub fn is_active(&self) -> bool {
        !matches!(self.mode, Mode::Off)
    }

    pub fn apply(&mut self, g: &mut Graph<F>, x: Var) -> Var {
        let shape = g.value(x).shape().to_vec();
        let mask = match &mut self.mode {
            Mode::Off => return x,
            Mode::Sample { rate, rng } => {
                let keep = 1.0 - *rate;
                let scale = F::of(1.0 / keep);
                let len = shape.iter().product();
                let data = (0..len)
                    .map(|_| if rng.random::<f64>() < keep { scale } else { F::zero() })
                    .collect();
                let m = Tensor::from_parts(shape, data);
                self.masks.push(m.clone());
                m
            }
            Mode::Replay => {
                let m = self
                    .masks
                    .get(self.cursor)
                    .cloned()
                    .expect("replay ran out of recorded dropout masks");
                assert_eq!(m.shape(), shape.as_slice(), "replayed mask shape mismatch");
                self.cursor += 1;
                m
            }
        };
        let mv = g.constant(mask);
        g.mul(x, mv)
    }

    /// The masks drawn so far (sampling mode) or supplied (replay mode).
    pub fn into_masks(self) -> Vec<Tensor<F>> {
        self.masks
    }
}
