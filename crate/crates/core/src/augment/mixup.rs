use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::corpus::LabeledSequence;
use crate::error::{Error, Result};
use crate::gradcore::{Graph, Tensor, Var};
use crate::model::{crf_loss_node, Dropout, Tagger};
use crate::Scalar;

/// Representation layer at which two examples are interpolated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MixLayer {
    /// Embedding output, below the BiLSTM.
    #[default]
    Embedding,
    /// BiLSTM output, below the emission layer.
    Encoder,
}

impl fmt::Display for MixLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MixLayer::Embedding => "embedding",
            MixLayer::Encoder => "encoder",
        })
    }
}

impl FromStr for MixLayer {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "embedding" => Ok(MixLayer::Embedding),
            "encoder" => Ok(MixLayer::Encoder),
            _ => Err(format!("unknown mix layer `{s}` (expected embedding or encoder)")),
        }
    }
}

/// A virtual example: two clean sentences and an interpolation weight.
/// Its input exists only as a mixed representation at forward time.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedExample {
    pub first: LabeledSequence,
    pub second: LabeledSequence,
    /// Indices of the members in the corpus they were drawn from.
    pub first_id: usize,
    pub second_id: usize,
    pub lambda: f64,
}

impl MixedExample {
    pub fn new(first: LabeledSequence, second: LabeledSequence, first_id: usize, second_id: usize, lambda: f64) -> Self {
        assert!(
            lambda.is_finite() && (0.0..=1.0).contains(&lambda),
            "mixup weight must lie in [0, 1], got {lambda}"
        );
        Self {
            first,
            second,
            first_id,
            second_id,
            lambda,
        }
    }

    /// Padded length `max(n1, n2)`.
    pub fn len(&self) -> usize {
        self.first.len().max(self.second.len())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn pad(labels: &[String], n: usize) -> Vec<String> {
        let mut out = labels.to_vec();
        out.resize(n, "O".to_string());
        out
    }

    /// Labels of the first member padded with `O` to the mixed length.
    pub fn first_labels(&self) -> Vec<String> {
        Self::pad(self.first.labels(), self.len())
    }

    pub fn second_labels(&self) -> Vec<String> {
        Self::pad(self.second.labels(), self.len())
    }
}

/// Draws two distinct examples uniformly and `λ ~ Beta(α, α)`.
pub fn sample_mixup_pair(examples: &[LabeledSequence], alpha: f64, rng: &mut impl Rng) -> Result<MixedExample> {
    if examples.len() < 2 {
        return Err(Error::Data(format!(
            "mixup needs at least 2 examples, corpus has {}",
            examples.len()
        )));
    }
    let beta = Beta::new(alpha, alpha).map_err(|e| Error::Config {
        key: "alpha".into(),
        message: e.to_string(),
    })?;
    let i = rng.random_range(0..examples.len());
    let mut j = rng.random_range(0..examples.len() - 1);
    if j >= i {
        j += 1;
    }
    let lambda = beta.sample(rng).clamp(0.0, 1.0);
    Ok(MixedExample::new(examples[i].clone(), examples[j].clone(), i, j, lambda))
}

/// `λ·e1 + (1−λ)·e2` row by row, both zero-padded to `n` rows.
pub fn mix_embeddings<F: Scalar>(e1: &Tensor<F>, e2: &Tensor<F>, lambda: F, n: usize) -> Tensor<F> {
    assert_eq!(e1.cols(), e2.cols(), "cannot mix representations of different widths");
    assert!(n >= e1.rows() && n >= e2.rows(), "mixed length shorter than a member");
    let d = e1.cols();
    let mut out = Tensor::zeros(&[n, d]);
    let mu = F::one() - lambda;
    for r in 0..n {
        let row = out.row_mut(r);
        if r < e1.rows() {
            for (o, &x) in row.iter_mut().zip(e1.row(r)) {
                *o += lambda * x;
            }
        }
        if r < e2.rows() {
            for (o, &x) in row.iter_mut().zip(e2.row(r)) {
                *o += mu * x;
            }
        }
    }
    out
}

/// Graph version of [`mix_embeddings`].
pub fn mix_nodes<F: Scalar>(g: &mut Graph<F>, a: Var, b: Var, lambda: F, n: usize) -> Var {
    let pa = g.pad_rows(a, n);
    let pb = g.pad_rows(b, n);
    let sa = g.scale(pa, lambda);
    let sb = g.scale(pb, F::one() - lambda);
    g.add(sa, sb)
}

/// Mixed representation through the remaining layers: `(emissions, T)`.
pub fn mixed_forward<F: Scalar>(
    g: &mut Graph<F>,
    tagger: &Tagger<F>,
    mx: &MixedExample,
    layer: MixLayer,
    drop: &mut Dropout<'_, F>,
) -> (Var, Var) {
    let lambda = F::of(mx.lambda);
    let n = mx.len();
    let ids1 = tagger.token_ids(mx.first.tokens());
    let ids2 = tagger.token_ids(mx.second.tokens());
    let e1 = tagger.embed(g, &ids1, drop);
    let e2 = tagger.embed(g, &ids2, drop);
    match layer {
        MixLayer::Embedding => {
            let mixed = mix_nodes(g, e1, e2, lambda, n);
            tagger.forward_from_embeddings(g, mixed, drop)
        }
        MixLayer::Encoder => {
            let h1 = tagger.encode(g, e1, drop);
            let h2 = tagger.encode(g, e2, drop);
            let mixed = mix_nodes(g, h1, h2, lambda, n);
            let o = tagger.emissions(g, mixed);
            let t = tagger.transitions(g);
            (o, t)
        }
    }
}

/// `λ·L(X̄, Y1) + (1−λ)·L(X̄, Y2)` over one shared mixed representation.
pub fn mixup_loss<F: Scalar>(
    g: &mut Graph<F>,
    tagger: &Tagger<F>,
    mx: &MixedExample,
    layer: MixLayer,
    drop: &mut Dropout<'_, F>,
) -> Result<Var> {
    assert!((0.0..=1.0).contains(&mx.lambda), "mixup weight outside [0, 1]");
    let y1 = tagger.label_ids(&mx.first_labels())?;
    let y2 = tagger.label_ids(&mx.second_labels())?;
    let (o, t) = mixed_forward(g, tagger, mx, layer, drop);
    let lambda = F::of(mx.lambda);
    Ok(crf_loss_node(g, o, t, vec![(lambda, y1), (F::one() - lambda, y2)]))
}
