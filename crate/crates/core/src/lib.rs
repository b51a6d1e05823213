//! Sequence labeling with self-augmentation for low-resource named entity
//! recognition.
//!
//! The crate is organized bottom-up:
//!
//! - [`gradcore`]: dense tensors, a reverse-mode tape, AdamW, global-norm
//!   clipping and gradient-map algebra.
//! - [`corpus`]: CoNLL ingestion, BIO/BIOES conversion, span extraction,
//!   span-level F1 and low-resource subsampling.
//! - [`model`]: the BiLSTM-CRF tagger (embedding table, BiLSTM encoder,
//!   linear-chain CRF with a START transition row, Viterbi decoding).
//! - [`augment`]: entity/synonym dictionaries, token substitution and
//!   mixup for CRF.
//! - [`metaweight`]: per-batch example reweighting by a one-step lookahead
//!   against a clean meta batch, and the training loop built on it.
//! - [`cli`]: config parsing and the command implementations behind the
//!   `ner-selfaug` binary.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below pin the double-precision instantiation used by the CLI.

pub mod augment;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod gradcore;
pub mod metaweight;
pub mod model;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor = gradcore::Tensor<f64>;
pub type Graph = gradcore::Graph<f64>;
pub type ParamStore = gradcore::ParamStore<f64>;
pub type GradientMap = gradcore::GradientMap<f64>;
pub type AdamW = gradcore::AdamW<f64>;
pub type Tagger = model::Tagger<f64>;
pub type EpsilonGrad = metaweight::EpsilonGrad<f64>;
pub type WeightVector = metaweight::WeightVector<f64>;

pub type TensorF32 = gradcore::Tensor<f32>;
pub type TaggerF32 = model::Tagger<f32>;
