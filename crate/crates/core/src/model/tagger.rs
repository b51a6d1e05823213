use std::collections::HashMap;

use rand::{Rng, RngCore};

use super::crf::{crf_nll_node, viterbi};
use super::Dropout;
use crate::corpus::{span_f1, Corpus, LabeledSequence, SpanScores, Vocab, WordVectors, PAD_ID};
use crate::error::{Error, Result};
use crate::gradcore::checkpoint::Checkpoint;
use crate::gradcore::{Graph, GradientMap, ParamId, ParamStore, Tensor, Var};
use crate::Scalar;

pub const EMBEDDING: &str = "embedding";
pub const PROJ_WEIGHT: &str = "crf.proj.weight";
pub const PROJ_BIAS: &str = "crf.proj.bias";
pub const TRANSITIONS: &str = "crf.transitions";

/// Optimizer group of the embedding table.
pub const EMBEDDING_GROUP: &str = "embedding";
pub const DEFAULT_GROUP: &str = "default";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaggerDims {
    pub vocab_size: usize,
    pub emb_dim: usize,
    pub hidden: usize,
    pub num_labels: usize,
}

#[derive(Debug, Clone, Copy)]
struct LstmIds {
    w_ih: ParamId,
    w_hh: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct Ids {
    embedding: ParamId,
    fwd: LstmIds,
    bwd: LstmIds,
    proj_w: ParamId,
    proj_b: ParamId,
    trans: ParamId,
}

impl Ids {
    fn resolve<F: Scalar>(store: &ParamStore<F>) -> Result<Self> {
        let get = |n: &str| {
            store
                .id(n)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{n}`")))
        };
        let lstm = |dir: &str| -> Result<LstmIds> {
            Ok(LstmIds {
                w_ih: get(&format!("lstm.{dir}.w_ih"))?,
                w_hh: get(&format!("lstm.{dir}.w_hh"))?,
                bias: get(&format!("lstm.{dir}.bias"))?,
            })
        };
        Ok(Self {
            embedding: get(EMBEDDING)?,
            fwd: lstm("fwd")?,
            bwd: lstm("bwd")?,
            proj_w: get(PROJ_WEIGHT)?,
            proj_b: get(PROJ_BIAS)?,
            trans: get(TRANSITIONS)?,
        })
    }
}

/// BiLSTM-CRF tagger: embedding table, one bidirectional LSTM layer, a linear
/// emission layer and a transition matrix with a START row.
#[derive(Debug, Clone)]
pub struct Tagger<F> {
    pub params: ParamStore<F>,
    dims: TaggerDims,
    ids: Ids,
    vocab: Vocab,
    labels: Vec<String>,
    label_index: HashMap<String, usize>,
}

fn uniform<F: Scalar>(rng: &mut dyn RngCore, shape: &[usize], bound: f64) -> Tensor<F> {
    let len = shape.iter().product();
    let data = (0..len)
        .map(|_| F::of(rng.random_range(-bound..=bound)))
        .collect();
    Tensor::from_parts(shape.to_vec(), data)
}

impl<F: Scalar> Tagger<F> {
    /// Randomly initialized tagger. `labels` fixes the label index order.
    pub fn new(vocab: Vocab, labels: Vec<String>, emb_dim: usize, hidden: usize, rng: &mut dyn RngCore) -> Self {
        assert!(emb_dim > 0 && hidden > 0, "dimensions must be positive");
        assert!(!labels.is_empty(), "label set is empty");
        let dims = TaggerDims {
            vocab_size: vocab.len(),
            emb_dim,
            hidden,
            num_labels: labels.len(),
        };
        let (v, d, h, l) = (dims.vocab_size, emb_dim, hidden, labels.len());
        let mut store = ParamStore::new();

        let mut emb = uniform::<F>(rng, &[v, d], 0.1);
        emb.row_mut(PAD_ID).fill(F::zero());
        store.insert(EMBEDDING, EMBEDDING_GROUP, true, emb);

        let lstm_bound = 1.0 / (h as f64).sqrt();
        for dir in ["fwd", "bwd"] {
            store.insert(&format!("lstm.{dir}.w_ih"), DEFAULT_GROUP, true, uniform(rng, &[d, 4 * h], lstm_bound));
            store.insert(&format!("lstm.{dir}.w_hh"), DEFAULT_GROUP, true, uniform(rng, &[h, 4 * h], lstm_bound));
            store.insert(&format!("lstm.{dir}.bias"), DEFAULT_GROUP, true, uniform(rng, &[4 * h], lstm_bound));
        }
        let xavier = (6.0 / (2 * h + l) as f64).sqrt();
        store.insert(PROJ_WEIGHT, DEFAULT_GROUP, true, uniform(rng, &[2 * h, l], xavier));
        store.insert(PROJ_BIAS, DEFAULT_GROUP, true, Tensor::zeros(&[l]));
        store.insert(TRANSITIONS, DEFAULT_GROUP, true, Tensor::zeros(&[l + 1, l]));

        Self::from_parts(store, vocab, labels).expect("freshly built parameters are complete")
    }

    /// Assembles a tagger from existing parameters, validating shapes.
    pub fn from_parts(params: ParamStore<F>, vocab: Vocab, labels: Vec<String>) -> Result<Self> {
        let ids = Ids::resolve(&params)?;
        let emb = params.value(ids.embedding);
        let (v, d) = (emb.rows(), emb.cols());
        let h = params.value(ids.fwd.w_hh).rows();
        let l = labels.len();
        let dims = TaggerDims {
            vocab_size: v,
            emb_dim: d,
            hidden: h,
            num_labels: l,
        };
        let expect: [(ParamId, Vec<usize>); 9] = [
            (ids.fwd.w_ih, vec![d, 4 * h]),
            (ids.fwd.w_hh, vec![h, 4 * h]),
            (ids.fwd.bias, vec![4 * h]),
            (ids.bwd.w_ih, vec![d, 4 * h]),
            (ids.bwd.w_hh, vec![h, 4 * h]),
            (ids.bwd.bias, vec![4 * h]),
            (ids.proj_w, vec![2 * h, l]),
            (ids.proj_b, vec![l]),
            (ids.trans, vec![l + 1, l]),
        ];
        for (id, shape) in expect {
            if params.value(id).shape() != shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{}` has shape {:?}, expected {:?}",
                    params.entry(id).name,
                    params.value(id).shape(),
                    shape
                )));
            }
        }
        if vocab.len() != v {
            return Err(Error::Checkpoint(format!(
                "vocabulary has {} entries but embedding table has {v} rows",
                vocab.len()
            )));
        }
        let label_index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        Ok(Self {
            params,
            dims,
            ids,
            vocab,
            labels,
            label_index,
        })
    }

    pub fn dims(&self) -> TaggerDims {
        self.dims
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Copies rows of the embedding table from pretrained vectors for every
    /// vocabulary word present there. Returns the number of rows set.
    pub fn init_from_vectors(&mut self, vectors: &WordVectors) -> Result<usize> {
        if vectors.dim() != self.dims.emb_dim && !vectors.is_empty() {
            return Err(Error::Config {
                key: "emb_dim".into(),
                message: format!(
                    "pretrained vectors have dimension {}, model uses {}",
                    vectors.dim(),
                    self.dims.emb_dim
                ),
            });
        }
        let words = self.vocab.words().to_vec();
        let table = self.params.value_mut(self.ids.embedding);
        let mut hits = 0;
        for (row, w) in words.iter().enumerate().skip(2) {
            if let Some(v) = vectors.get(w) {
                for (dst, &src) in table.row_mut(row).iter_mut().zip(v) {
                    *dst = F::of(src);
                }
                hits += 1;
            }
        }
        Ok(hits)
    }

    pub fn token_ids(&self, tokens: &[String]) -> Vec<usize> {
        self.vocab.ids(tokens)
    }

    pub fn label_ids(&self, labels: &[String]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| {
                self.label_index
                    .get(l)
                    .copied()
                    .ok_or_else(|| Error::Data(format!("label `{l}` is not in the model's label set")))
            })
            .collect()
    }

    /// Embedding lookup `[n, d_emb]` followed by input dropout.
    pub fn embed(&self, g: &mut Graph<F>, ids: &[usize], drop: &mut Dropout<'_, F>) -> Var {
        assert!(!ids.is_empty(), "cannot embed an empty sentence");
        let table = g.param(&self.params, self.ids.embedding);
        let e = g.gather(table, ids);
        drop.apply(g, e)
    }

    /// `x W_ih + b` for all positions at once: `[n, 4H]`.
    fn input_projection(&self, g: &mut Graph<F>, emb: Var, ids: LstmIds) -> Var {
        let w_ih = g.param(&self.params, ids.w_ih);
        let b = g.param(&self.params, ids.bias);
        let proj = g.matmul(emb, w_ih);
        g.add_row(proj, b)
    }

    fn lstm_direction(&self, g: &mut Graph<F>, xs: Var, ids: LstmIds, reverse: bool) -> Var {
        let n = g.value(xs).rows();
        let h = self.dims.hidden;
        let w_hh = g.param(&self.params, ids.w_hh);
        let mut outputs: Vec<Option<Var>> = vec![None; n];
        let mut state: Option<(Var, Var)> = None;
        let order: Vec<usize> = if reverse { (0..n).rev().collect() } else { (0..n).collect() };
        for t in order {
            let x_t = g.row(xs, t);
            let gates = match state {
                Some((h_prev, _)) => {
                    let rec = g.matmul(h_prev, w_hh);
                    g.add(x_t, rec)
                }
                None => x_t,
            };
            let i_gate = g.slice(gates, 0, h);
            let i_gate = g.sigmoid(i_gate);
            let f_gate = g.slice(gates, h, h);
            let f_gate = g.sigmoid(f_gate);
            let cand = g.slice(gates, 2 * h, h);
            let cand = g.tanh(cand);
            let o_gate = g.slice(gates, 3 * h, h);
            let o_gate = g.sigmoid(o_gate);
            let fresh = g.mul(i_gate, cand);
            let c = match state {
                Some((_, c_prev)) => {
                    let kept = g.mul(f_gate, c_prev);
                    g.add(kept, fresh)
                }
                None => fresh,
            };
            let c_act = g.tanh(c);
            let h_t = g.mul(o_gate, c_act);
            outputs[t] = Some(h_t);
            state = Some((h_t, c));
        }
        let rows: Vec<Var> = outputs.into_iter().map(|v| v.expect("every step visited")).collect();
        g.stack(&rows)
    }

    /// BiLSTM over `[n, d_emb]`, giving `[n, 2H]` (forward state then
    /// backward state per token), followed by output dropout.
    pub fn encode(&self, g: &mut Graph<F>, emb: Var, drop: &mut Dropout<'_, F>) -> Var {
        assert_eq!(
            g.value(emb).cols(),
            self.dims.emb_dim,
            "embedding width does not match the model"
        );
        let xf = self.input_projection(g, emb, self.ids.fwd);
        let xb = self.input_projection(g, emb, self.ids.bwd);
        let hf = self.lstm_direction(g, xf, self.ids.fwd, false);
        let hb = self.lstm_direction(g, xb, self.ids.bwd, true);
        let h = g.concat_cols(hf, hb);
        drop.apply(g, h)
    }

    /// `o_i = W h_i + b` for every position: `[n, L]`.
    pub fn emissions(&self, g: &mut Graph<F>, enc: Var) -> Var {
        let w = g.param(&self.params, self.ids.proj_w);
        let b = g.param(&self.params, self.ids.proj_b);
        let o = g.matmul(enc, w);
        g.add_row(o, b)
    }

    pub fn transitions(&self, g: &mut Graph<F>) -> Var {
        g.param(&self.params, self.ids.trans)
    }

    /// Encoder and emission layers applied to externally supplied embeddings.
    pub fn forward_from_embeddings(&self, g: &mut Graph<F>, emb: Var, drop: &mut Dropout<'_, F>) -> (Var, Var) {
        let enc = self.encode(g, emb, drop);
        let o = self.emissions(g, enc);
        let t = self.transitions(g);
        (o, t)
    }

    /// Full path from token ids to `(emissions, transitions)`.
    pub fn forward(&self, g: &mut Graph<F>, ids: &[usize], drop: &mut Dropout<'_, F>) -> (Var, Var) {
        let emb = self.embed(g, ids, drop);
        self.forward_from_embeddings(g, emb, drop)
    }

    /// CRF negative log-likelihood of a gold-labeled sentence.
    pub fn nll(&self, g: &mut Graph<F>, seq: &LabeledSequence, drop: &mut Dropout<'_, F>) -> Result<Var> {
        let ids = self.token_ids(seq.tokens());
        let labels = self.label_ids(seq.labels())?;
        let (o, t) = self.forward(g, &ids, drop);
        Ok(crf_nll_node(g, o, t, labels))
    }

    /// Zeroes gradient rows that must stay frozen (the PAD embedding).
    pub fn mask_frozen(&self, grads: &mut GradientMap<F>) {
        if let Some(t) = grads.get_mut(EMBEDDING) {
            t.row_mut(PAD_ID).fill(F::zero());
        }
    }

    /// Viterbi decoding in evaluation mode.
    pub fn decode(&self, tokens: &[String]) -> Vec<String> {
        let mut g = Graph::new();
        let ids = self.token_ids(tokens);
        let (o, t) = self.forward(&mut g, &ids, &mut Dropout::off());
        let (path, _) = viterbi(g.value(o), g.value(t));
        path.into_iter().map(|i| self.labels[i].clone()).collect()
    }

    pub fn predict(&self, corpus: &Corpus) -> Vec<Vec<String>> {
        corpus.examples().iter().map(|e| self.decode(e.tokens())).collect()
    }

    pub fn evaluate(&self, corpus: &Corpus) -> SpanScores {
        let pred = self.predict(corpus);
        let gold: Vec<&[String]> = corpus.examples().iter().map(|e| e.labels()).collect();
        span_f1(&pred, &gold)
    }

    /// Packs parameters, vocabularies and `config` into a checkpoint.
    pub fn to_checkpoint(&self, config: String) -> Checkpoint {
        let mut ck = Checkpoint::from_store(&self.params, config);
        ck.tables.push(("tokens".into(), self.vocab.words().to_vec()));
        ck.tables.push(("labels".into(), self.labels.clone()));
        ck.tables.push((
            "model".into(),
            vec![format!("lowercase={}", self.vocab.lowercase())],
        ));
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let table = |name: &str| {
            ck.table(name)
                .map(|t| t.to_vec())
                .ok_or_else(|| Error::Checkpoint(format!("missing `{name}` table")))
        };
        let lowercase = table("model")?.iter().any(|l| l == "lowercase=true");
        let vocab = Vocab::from_words(table("tokens")?, lowercase)?;
        Self::from_parts(ck.to_store()?, vocab, table("labels")?)
    }
}
