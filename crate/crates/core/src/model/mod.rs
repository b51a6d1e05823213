//! BiLSTM-CRF tagger.
//!
//! Gate layout of each LSTM direction is `[input, forget, candidate, output]`
//! along the `4H` axis.

mod crf;
mod dropout;
mod tagger;

pub use crf::{
    crf_log_partition, crf_loss_node, crf_marginals, crf_nll, crf_nll_node, crf_score, viterbi, Marginals,
};
pub use dropout::Dropout;
pub use tagger::{
    Tagger, TaggerDims, DEFAULT_GROUP, EMBEDDING, EMBEDDING_GROUP, PROJ_BIAS, PROJ_WEIGHT, TRANSITIONS,
};
