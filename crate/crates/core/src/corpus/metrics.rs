use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::scheme::{decode_spans, Span};

/// Micro-averaged exact-match span scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of gold spans.
    pub support: usize,
}

/// Span-level precision, recall and F1 over aligned label sequences.
///
/// A span counts as correct only when type, start and end all match.
/// Precision is 0 when nothing is predicted; F1 is 0 when P + R = 0.
pub fn span_f1<P, G>(pred: &[P], gold: &[G]) -> SpanScores
where
    P: AsRef<[String]>,
    G: AsRef<[String]>,
{
    assert_eq!(pred.len(), gold.len(), "prediction and gold sentence counts differ");
    let (mut n_pred, mut n_gold, mut n_correct) = (0usize, 0usize, 0usize);
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        let (p, g) = (p.as_ref(), g.as_ref());
        assert_eq!(p.len(), g.len(), "sentence {i}: prediction and gold lengths differ");
        let ps: HashSet<Span> = decode_spans(p).0.into_iter().collect();
        let gs: HashSet<Span> = decode_spans(g).0.into_iter().collect();
        n_pred += ps.len();
        n_gold += gs.len();
        n_correct += ps.intersection(&gs).count();
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(n_correct, n_pred);
    let recall = ratio(n_correct, n_gold);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    SpanScores {
        precision,
        recall,
        f1,
        support: n_gold,
    }
}
