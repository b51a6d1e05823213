use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ner_selfaug::corpus::{label_set, Scheme, Vocab, WordVectors, UNK_ID};
use ner_selfaug::gradcore::{Graph, Tensor};
use ner_selfaug::model::{
    crf_log_partition, crf_marginals, crf_nll, crf_score, viterbi, Dropout, Tagger, EMBEDDING, PROJ_BIAS, PROJ_WEIGHT,
    TRANSITIONS,
};

/// Emissions `[n, L]` and transitions `[L+1, L]` with small n and L.
fn crf_inputs() -> impl Strategy<Value = (Tensor<f64>, Tensor<f64>)> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(n, l)| {
        (
            prop::collection::vec(-3.0f64..3.0, n * l),
            prop::collection::vec(-3.0f64..3.0, (l + 1) * l),
        )
            .prop_map(move |(o, t)| (Tensor::matrix(n, l, o), Tensor::matrix(l + 1, l, t)))
    })
}

fn paths(n: usize, l: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..l).map(move |y| {
                    let mut q = p.clone();
                    q.push(y);
                    q
                })
            })
            .collect();
    }
    out
}

/// Path score written out directly: START row is the last row of `t`.
fn score(o: &Tensor<f64>, t: &Tensor<f64>, y: &[usize]) -> f64 {
    let start = t.rows() - 1;
    let mut s = t.at(start, y[0]) + o.at(0, y[0]);
    for i in 1..y.len() {
        s += t.at(y[i - 1], y[i]) + o.at(i, y[i]);
    }
    s
}

proptest! {
    #[test]
    fn path_probabilities_sum_to_one((o, t) in crf_inputs()) {
        let log_z = crf_log_partition(&o, &t);
        let total: f64 = paths(o.rows(), o.cols()).iter().map(|y| (score(&o, &t, y) - log_z).exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "sum {total}");
    }

    #[test]
    fn viterbi_dominates_every_path((o, t) in crf_inputs()) {
        let (best, best_score) = viterbi(&o, &t);
        prop_assert!((score(&o, &t, &best) - best_score).abs() < 1e-12);
        for y in paths(o.rows(), o.cols()) {
            prop_assert!(score(&o, &t, &y) <= best_score + 1e-12);
        }
    }

    #[test]
    fn nll_and_score_match_brute_force((o, t) in crf_inputs(), pick in any::<prop::sample::Index>()) {
        let all = paths(o.rows(), o.cols());
        let y = &all[pick.index(all.len())];
        let lse = {
            let s: Vec<f64> = all.iter().map(|p| score(&o, &t, p)).collect();
            let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            m + s.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
        };
        prop_assert!((crf_score(&o, &t, y) - score(&o, &t, y)).abs() < 1e-12);
        prop_assert!((crf_nll(&o, &t, y) - (lse - score(&o, &t, y))).abs() < 1e-8);
        prop_assert!(crf_nll(&o, &t, y) >= -1e-12);
    }

    #[test]
    fn constant_emission_shift_cancels((o, t) in crf_inputs(), c in -5.0f64..5.0, pick in any::<prop::sample::Index>()) {
        let n = o.rows() as f64;
        let shifted = o.map(|x| x + c);
        let all = paths(o.rows(), o.cols());
        let y = &all[pick.index(all.len())];
        let tol = 1e-9 * (1.0 + c.abs() * n);
        prop_assert!((crf_score(&shifted, &t, y) - crf_score(&o, &t, y) - n * c).abs() < tol);
        prop_assert!((crf_log_partition(&shifted, &t) - crf_log_partition(&o, &t) - n * c).abs() < tol);
        prop_assert!((crf_nll(&shifted, &t, y) - crf_nll(&o, &t, y)).abs() < tol);
        prop_assert_eq!(viterbi(&shifted, &t).0, viterbi(&o, &t).0);
    }

    #[test]
    fn marginals_are_distributions((o, t) in crf_inputs()) {
        let m = crf_marginals(&o, &t);
        for i in 0..o.rows() {
            let row: f64 = m.unary.row(i).iter().sum();
            prop_assert!((row - 1.0).abs() < 1e-9);
        }
    }
}

fn tagger(words: &[&str], emb: usize, hidden: usize, seed: u64) -> Tagger<f64> {
    let vocab = Vocab::build(words.iter().copied(), false);
    let labels = label_set(&["PER".to_string()], Scheme::Bioes);
    Tagger::new(vocab, labels, emb, hidden, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn set(t: &mut Tagger<f64>, name: &str, data: Vec<f64>) {
    let id = t.params.id(name).unwrap();
    let shape = t.params.value(id).shape().to_vec();
    t.params.set(id, Tensor::from_parts(shape, data));
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[test]
fn lstm_matches_hand_computed_steps() {
    // one input dimension, one hidden unit; gate order is input, forget, candidate, output
    let mut t = tagger(&["a", "b"], 1, 1, 3);
    let ids = t.token_ids(&["a".to_string(), "b".to_string()]);
    let mut emb = t.params.get(EMBEDDING).unwrap().data().to_vec();
    emb[ids[0]] = 0.7;
    emb[ids[1]] = -0.4;
    set(&mut t, EMBEDDING, emb);
    let (wi_f, wh_f, b_f) = ([0.5, -0.3, 0.8, 0.2], [0.1, 0.4, -0.6, 0.3], [0.05, 0.1, -0.2, 0.0]);
    let (wi_b, wh_b, b_b) = ([-0.2, 0.6, 0.3, -0.5], [0.7, -0.1, 0.2, 0.4], [0.0, -0.3, 0.1, 0.2]);
    set(&mut t, "lstm.fwd.w_ih", wi_f.to_vec());
    set(&mut t, "lstm.fwd.w_hh", wh_f.to_vec());
    set(&mut t, "lstm.fwd.bias", b_f.to_vec());
    set(&mut t, "lstm.bwd.w_ih", wi_b.to_vec());
    set(&mut t, "lstm.bwd.w_hh", wh_b.to_vec());
    set(&mut t, "lstm.bwd.bias", b_b.to_vec());

    let step = |x: f64, h: f64, c: f64, wi: [f64; 4], wh: [f64; 4], b: [f64; 4]| {
        let z: Vec<f64> = (0..4).map(|k| x * wi[k] + h * wh[k] + b[k]).collect();
        let c = sig(z[1]) * c + sig(z[0]) * z[2].tanh();
        (sig(z[3]) * c.tanh(), c)
    };
    let xs = [0.7, -0.4];
    let (f0, cf0) = step(xs[0], 0.0, 0.0, wi_f, wh_f, b_f);
    let (f1, _) = step(xs[1], f0, cf0, wi_f, wh_f, b_f);
    let (b1, cb1) = step(xs[1], 0.0, 0.0, wi_b, wh_b, b_b);
    let (b0, _) = step(xs[0], b1, cb1, wi_b, wh_b, b_b);

    let mut g = Graph::new();
    let mut off = Dropout::off();
    let e = t.embed(&mut g, &ids, &mut off);
    let h = t.encode(&mut g, e, &mut off);
    let got = g.value(h);
    assert_eq!(got.shape(), &[2, 2]);
    let want = [f0, b0, f1, b1];
    for (a, b) in got.data().iter().zip(want) {
        assert!((a - b).abs() < 1e-14, "{:?} vs {want:?}", got.data());
    }
}

#[test]
fn encoder_shapes_for_short_and_long_inputs() {
    let t = tagger(&["x", "y", "z"], 4, 3, 5);
    for n in [1, 2, 9] {
        let tokens: Vec<String> = (0..n).map(|i| ["x", "y", "z"][i % 3].to_string()).collect();
        let mut g = Graph::new();
        let mut off = Dropout::off();
        let e = t.embed(&mut g, &t.token_ids(&tokens), &mut off);
        let h = t.encode(&mut g, e, &mut off);
        assert_eq!(g.value(h).shape(), &[n, 6]);
    }
}

#[test]
fn emissions_are_an_affine_map_of_encoder_states() {
    let mut t = tagger(&["x", "y"], 3, 2, 7);
    let l = t.labels().len();
    let tokens: Vec<String> = ["x", "y", "x"].iter().map(|s| s.to_string()).collect();
    let ids = t.token_ids(&tokens);

    let run = |t: &Tagger<f64>| {
        let mut g = Graph::new();
        let mut off = Dropout::off();
        let e = t.embed(&mut g, &ids, &mut off);
        let h = t.encode(&mut g, e, &mut off);
        let o = t.emissions(&mut g, h);
        (g.value(h).clone(), g.value(o).clone())
    };
    let (h, o) = run(&t);
    let w = t.params.get(PROJ_WEIGHT).unwrap().clone();
    let b = t.params.get(PROJ_BIAS).unwrap().clone();
    for i in 0..h.rows() {
        for j in 0..l {
            let want: f64 = (0..h.cols()).map(|k| h.at(i, k) * w.at(k, j)).sum::<f64>() + b.data()[j];
            assert!((o.at(i, j) - want).abs() < 1e-13);
        }
    }

    set(&mut t, PROJ_WEIGHT, vec![0.0; w.len()]);
    set(&mut t, PROJ_BIAS, vec![0.25; l]);
    let (_, o) = run(&t);
    assert!(o.data().iter().all(|&x| x == 0.25));
}

#[test]
fn embedding_lookup_and_vector_initialization() {
    let mut t = tagger(&["cat", "dog"], 3, 2, 9);
    let cat = t.token_ids(&["cat".to_string()])[0];
    let unseen = t.token_ids(&["zebra".to_string()])[0];
    assert_eq!(unseen, UNK_ID);

    let text = "cat 0.5 -1.0 2.0\nbird 1 1 1\n";
    let vectors = WordVectors::parse(text, std::path::Path::new("v.txt")).unwrap();
    let found = t.init_from_vectors(&vectors).unwrap();
    assert_eq!(found, 1);

    let mut g = Graph::new();
    let mut off = Dropout::off();
    let e = t.embed(&mut g, &[cat, unseen], &mut off);
    assert_eq!(g.value(e).row(0), &[0.5, -1.0, 2.0]);
    assert_eq!(g.value(e).row(1), t.params.get(EMBEDDING).unwrap().row(UNK_ID));
}

#[test]
fn forward_from_embeddings_reproduces_forward() {
    let t = tagger(&["p", "q", "r"], 5, 4, 11);
    let ids = t.token_ids(&["r".to_string(), "p".to_string(), "q".to_string()]);
    let mut g = Graph::new();
    let mut off = Dropout::off();
    let (o1, _) = t.forward(&mut g, &ids, &mut off);
    let e = t.embed(&mut g, &ids, &mut off);
    let (o2, t2) = t.forward_from_embeddings(&mut g, e, &mut off);
    assert_eq!(g.value(o1), g.value(o2));
    assert_eq!(g.value(t2), t.params.get(TRANSITIONS).unwrap());
}

#[test]
fn viterbi_prefers_lowest_index_on_ties() {
    let o = Tensor::matrix(3, 3, vec![0.0; 9]);
    let t = Tensor::matrix(4, 3, vec![0.0; 12]);
    assert_eq!(viterbi(&o, &t).0, vec![0, 0, 0]);
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let t = tagger(&["x", "y", "z"], 4, 3, 13);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    t.to_checkpoint("seed = 1\n".into()).save(&path).unwrap();
    let ck = ner_selfaug::gradcore::checkpoint::Checkpoint::load(&path).unwrap();
    let back = Tagger::<f64>::from_checkpoint(&ck).unwrap();
    let tokens: Vec<String> = ["z", "x", "unseen", "y"].iter().map(|s| s.to_string()).collect();
    assert_eq!(back.decode(&tokens), t.decode(&tokens));
    for ((_, a), (_, b)) in back.params.entries().zip(t.params.entries()) {
        assert_eq!(a.value(), b.value());
    }
}
