//! Small fully connected networks: forward and backward passes, Adam
//! training on weighted masked regression, and a binary checkpoint format.

pub mod checkpoint;
mod mlp;
mod train;

use thiserror::Error;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, CheckpointError, CheckpointMeta};
pub use mlp::{ForwardCache, Layer, Mlp, NetConfig, Real};
pub use train::{clip_grad_norm, train, Adam, TrainConfig, TrainStats};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NnError {
    #[error("expected {expected} values, got {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("cannot train on an empty buffer")]
    EmptyBuffer,
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
}
