//! Tensor algebra, reverse-mode differentiation, parameters and SGD.

mod checkpoint;
mod layers;
mod optim;
mod param;
mod rng;
pub(crate) mod tape;
mod tensor;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use layers::{pooled_projection, pooled_projection_eager, Pool};
pub use optim::{clip_grad_norm, sgd_step};
pub use param::{ParamId, ParamStore, Parameter};
pub use rng::Rng;
pub use tape::{record_and_backward, temporal_conv, Gradients, Tape, Var};
pub use tensor::Tensor;


use crate::error::Result;

/// `matmul(a, b)` on eager tensors.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.matmul(b)
}

/// Row softmax of `m/√d` over the last axis.
pub fn scaled_softmax_rows(m: &Tensor, d: f64) -> Result<Tensor> {
    m.scaled_softmax_last(d)
}
