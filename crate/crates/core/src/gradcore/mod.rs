//! Numeric substrate: tensors, a reverse-mode tape, AdamW, global-norm
//! clipping, gradient-map algebra and the checkpoint container.

mod check;
pub mod checkpoint;
mod graph;
mod optim;
mod params;
mod tensor;

pub use check::{finite_diff_check, FiniteDiffReport};
pub use graph::{grad, logsumexp, sigmoid, CustomOp, Graph, NodeGrads, Var};
pub use optim::{clip_global_norm, AdamW, AdamWConfig};
pub use params::{grad_dot, GradientMap, ParamEntry, ParamId, ParamStore};
pub use tensor::Tensor;
