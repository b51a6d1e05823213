//! Linear-chain CRF over emission scores `o: [n, L]` and transitions
//! `T: [L+1, L]`, where row `L` holds the START transitions.
//!
//! The sequence score is `Σ_i T[y_{i-1}, y_i] + o_i[y_i]` with `y_0 = START`.
//! There is no STOP transition.

use crate::gradcore::{logsumexp, CustomOp, Graph, Tensor, Var};
use crate::Scalar;

fn check_dims<F: Scalar>(o: &Tensor<F>, trans: &Tensor<F>) -> (usize, usize) {
    let (n, l) = (o.rows(), o.cols());
    assert!(n >= 1, "CRF needs at least one position");
    assert_eq!(trans.shape(), &[l + 1, l], "transition matrix must be [L+1, L] for L = {l}");
    (n, l)
}

/// Score of one label path.
pub fn crf_score<F: Scalar>(o: &Tensor<F>, trans: &Tensor<F>, labels: &[usize]) -> F {
    let (n, l) = check_dims(o, trans);
    assert_eq!(labels.len(), n, "label path length {} != sequence length {n}", labels.len());
    let mut prev = l;
    let mut s = F::zero();
    for (i, &y) in labels.iter().enumerate() {
        assert!(y < l, "label index {y} out of range for {l} labels");
        s += trans.at(prev, y) + o.at(i, y);
        prev = y;
    }
    s
}

/// Forward log-scores `alpha[i][y]`: log-sum over prefixes ending in `y` at
/// position `i`, including `o_i[y]`.
fn forward_alphas<F: Scalar>(o: &Tensor<F>, trans: &Tensor<F>) -> Vec<Vec<F>> {
    let (n, l) = check_dims(o, trans);
    let mut alphas = Vec::with_capacity(n);
    alphas.push((0..l).map(|y| trans.at(l, y) + o.at(0, y)).collect::<Vec<F>>());
    let mut buf = vec![F::zero(); l];
    for i in 1..n {
        let prev = &alphas[i - 1];
        let cur = (0..l)
            .map(|y| {
                for (a, b) in buf.iter_mut().enumerate() {
                    *b = prev[a] + trans.at(a, y);
                }
                logsumexp(&buf) + o.at(i, y)
            })
            .collect();
        alphas.push(cur);
    }
    alphas
}

/// Backward log-scores `beta[i][y]`: log-sum over suffixes after `i` given
/// `y` at `i`, excluding `o_i[y]`.
fn backward_betas<F: Scalar>(o: &Tensor<F>, trans: &Tensor<F>) -> Vec<Vec<F>> {
    let (n, l) = check_dims(o, trans);
    let mut betas = vec![vec![F::zero(); l]; n];
    let mut buf = vec![F::zero(); l];
    for i in (0..n - 1).rev() {
        for a in 0..l {
            for (b, slot) in buf.iter_mut().enumerate() {
                *slot = trans.at(a, b) + o.at(i + 1, b) + betas[i + 1][b];
            }
            betas[i][a] = logsumexp(&buf);
        }
    }
    betas
}

/// `log Σ_Y exp(score(Y))` by the forward algorithm.
pub fn crf_log_partition<F: Scalar>(o: &Tensor<F>, trans: &Tensor<F>) -> F {
    let alphas = forward_alphas(o, trans);
    logsumexp(alphas.last().expect("n >= 1"))
}

/// Negative log-likelihood of `labels`.
pub fn crf_nll<F: Scalar>(o: &Tensor<F>, trans: &Tensor<F>, labels: &[usize]) -> F {
    crf_log_partition(o, trans) - crf_score(o, trans, labels)
}

/// Posterior marginals.
pub struct Marginals<F> {
    /// `P(y_i = y)`, shape `[n, L]`.
    pub unary: Tensor<F>,
    /// Expected transition counts `Σ_i P(y_{i-1} = a, y_i = b)`, shape
    /// `[L+1, L]` with the START row first-position marginals.
    pub transitions: Tensor<F>,
    pub log_partition: F,
}

#[allow(clippy::needless_range_loop)]
pub fn crf_marginals<F: Scalar>(o: &Tensor<F>, trans: &Tensor<F>) -> Marginals<F> {
    let (n, l) = check_dims(o, trans);
    let alphas = forward_alphas(o, trans);
    let betas = backward_betas(o, trans);
    let log_z = logsumexp(&alphas[n - 1]);

    let mut unary = Tensor::zeros(&[n, l]);
    for i in 0..n {
        for y in 0..l {
            unary.row_mut(i)[y] = (alphas[i][y] + betas[i][y] - log_z).exp();
        }
    }
    let mut pair = Tensor::zeros(&[l + 1, l]);
    for y in 0..l {
        pair.row_mut(l)[y] = unary.at(0, y);
    }
    for i in 1..n {
        for a in 0..l {
            for b in 0..l {
                let lp = alphas[i - 1][a] + trans.at(a, b) + o.at(i, b) + betas[i][b] - log_z;
                pair.row_mut(a)[b] += lp.exp();
            }
        }
    }
    Marginals {
        unary,
        transitions: pair,
        log_partition: log_z,
    }
}

/// Highest-scoring path and its score. Ties go to the lowest label index,
/// both in the recursion and at the final position.
#[allow(clippy::needless_range_loop)]
pub fn viterbi<F: Scalar>(o: &Tensor<F>, trans: &Tensor<F>) -> (Vec<usize>, F) {
    let (n, l) = check_dims(o, trans);
    let mut score: Vec<F> = (0..l).map(|y| trans.at(l, y) + o.at(0, y)).collect();
    let mut back = vec![vec![0usize; l]; n];
    for i in 1..n {
        let mut next = vec![F::zero(); l];
        for y in 0..l {
            let mut best = 0;
            let mut best_s = score[0] + trans.at(0, y);
            for a in 1..l {
                let s = score[a] + trans.at(a, y);
                if s > best_s {
                    best = a;
                    best_s = s;
                }
            }
            back[i][y] = best;
            next[y] = best_s + o.at(i, y);
        }
        score = next;
    }
    let mut last = 0;
    for y in 1..l {
        if score[y] > score[last] {
            last = y;
        }
    }
    let best_score = score[last];
    let mut path = vec![last; n];
    for i in (1..n).rev() {
        path[i - 1] = back[i][path[i]];
    }
    (path, best_score)
}

/// Tape node for `Σ_k w_k · (log Z − score(Y_k))`. With a single target of
/// weight 1 this is the plain NLL; two targets weighted `(λ, 1−λ)` give the
/// mixup loss.
struct CrfLoss<F> {
    targets: Vec<(F, Vec<usize>)>,
}

impl<F: Scalar> CustomOp<F> for CrfLoss<F> {
    fn name(&self) -> &'static str {
        "crf_loss"
    }

    fn backward(&self, inputs: &[&Tensor<F>], _output: &Tensor<F>, grad: &Tensor<F>) -> Vec<Tensor<F>> {
        let (o, trans) = (inputs[0], inputs[1]);
        let l = o.cols();
        let g = grad.item();
        let m = crf_marginals(o, trans);
        let total: F = self.targets.iter().map(|(w, _)| *w).sum();

        let mut go = m.unary;
        go.scale_in_place(total);
        let mut gt = m.transitions;
        gt.scale_in_place(total);
        for (w, path) in &self.targets {
            let mut prev = l;
            for (i, &y) in path.iter().enumerate() {
                go.row_mut(i)[y] -= *w;
                gt.row_mut(prev)[y] -= *w;
                prev = y;
            }
        }
        go.scale_in_place(g);
        gt.scale_in_place(g);
        vec![go, gt]
    }
}

/// Weighted CRF loss node over emission and transition nodes.
pub fn crf_loss_node<F: Scalar>(g: &mut Graph<F>, o: Var, trans: Var, targets: Vec<(F, Vec<usize>)>) -> Var {
    let (ov, tv) = (g.value(o), g.value(trans));
    let log_z = crf_log_partition(ov, tv);
    let value: F = targets
        .iter()
        .map(|(w, path)| *w * (log_z - crf_score(ov, tv, path)))
        .sum();
    g.custom(&[o, trans], Tensor::scalar(value), Box::new(CrfLoss { targets }))
}

/// NLL node for one gold path.
pub fn crf_nll_node<F: Scalar>(g: &mut Graph<F>, o: Var, trans: Var, labels: Vec<usize>) -> Var {
    crf_loss_node(g, o, trans, vec![(F::one(), labels)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, v: &[f64]) -> Tensor<f64> {
        Tensor::matrix(rows, cols, v.to_vec())
    }

    #[test]
    fn single_position_formulas() {
        let o = t(1, 3, &[0.5, -1.0, 2.0]);
        let tr = t(4, 3, &[0.0; 9].iter().chain(&[0.1, 0.2, 0.3]).copied().collect::<Vec<_>>());
        assert!((crf_score(&o, &tr, &[2]) - 2.3).abs() < 1e-15);
        let expect = logsumexp(&[0.6, -0.8, 2.3]);
        assert!((crf_log_partition(&o, &tr) - expect).abs() < 1e-14);
    }

    #[test]
    fn uniform_scores_partition() {
        let o = Tensor::zeros(&[2, 3]);
        let tr = Tensor::zeros(&[4, 3]);
        assert!((crf_log_partition::<f64>(&o, &tr) - 2.0 * 3f64.ln()).abs() < 1e-14);
        assert_eq!(crf_score::<f64>(&o, &tr, &[1, 2]), 0.0);
    }

    #[test]
    fn hand_summed_score() {
        // n=3, L=2
        let o = t(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let tr = t(3, 2, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        // path [1, 0, 1]: T[S,1] + o0[1] + T[1,0] + o1[0] + T[0,1] + o2[1]
        let expect = 0.6 + 2.0 + 0.3 + 3.0 + 0.2 + 6.0;
        assert!((crf_score(&o, &tr, &[1, 0, 1]) - expect).abs() < 1e-14);
    }

    #[test]
    fn one_label_has_zero_loss() {
        let o = t(3, 1, &[0.3, -2.0, 5.0]);
        let tr = t(2, 1, &[1.0, -1.0]);
        assert!(crf_nll(&o, &tr, &[0, 0, 0]).abs() < 1e-14);
        assert_eq!(viterbi(&o, &tr).0, vec![0, 0, 0]);
    }

    #[test]
    fn viterbi_picks_per_position_argmax_without_transitions() {
        let o = t(3, 3, &[9.0, 0.0, 0.0, 0.0, 0.0, 9.0, 0.0, 9.0, 0.0]);
        let tr = Tensor::zeros(&[4, 3]);
        assert_eq!(viterbi(&o, &tr).0, vec![0, 2, 1]);
    }

    #[test]
    fn viterbi_ties_go_to_lowest_index() {
        let o = Tensor::<f64>::zeros(&[3, 3]);
        let tr = Tensor::zeros(&[4, 3]);
        assert_eq!(viterbi(&o, &tr).0, vec![0, 0, 0]);
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn score_rejects_bad_label() {
        let o = Tensor::<f64>::zeros(&[1, 2]);
        let tr = Tensor::zeros(&[3, 2]);
        crf_score(&o, &tr, &[2]);
    }

    #[test]
    fn marginals_sum_to_one_per_position() {
        let o = t(3, 2, &[0.3, -0.2, 1.0, 0.5, -1.0, 0.7]);
        let tr = t(3, 2, &[0.1, -0.4, 0.2, 0.3, -0.5, 0.6]);
        let m = crf_marginals(&o, &tr);
        for i in 0..3 {
            assert!((m.unary.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // n-1 transitions plus the START row
        assert!((m.transitions.sum() - 3.0).abs() < 1e-12);
    }
}
