//! Small from-scratch neural kernel: dense nets, Adam, replay buffers.

mod dense;
mod replay;

pub use dense::{
    Activation, DenseNet, Grads, Layer, LayerGrads, Sample, Target, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, CHECKPOINT_MAGIC,
};
pub use replay::{ReplayBuffer, Transition, DEFAULT_BATCH, DEFAULT_CAPACITY};
