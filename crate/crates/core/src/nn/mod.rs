//! Minimal deterministic neural stack: rank-tagged f64 arrays, a recording
//! tape with exact reverse-mode gradients, and the three optimizers.
//!
//! Everything is 64-bit and free of hidden randomness: dropout masks come
//! from explicit RNG state, parameter updates follow a fixed order, and the
//! optimizers implement their update rules verbatim (Adam ships without bias
//! correction by default; a corrected mode is behind a flag).

mod checkpoint;
mod init;
mod optim;
mod params;
mod tape;
mod tensor;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CheckpointEntry, EntryKind, CHECKPOINT_VERSION,
};
pub use init::kaiming_uniform;
pub use optim::{Optimizer, OptimizerKind};
pub use params::{BnRunning, Param, ParamStore};
pub use tape::{Bound, Gradients, Mode, Tape, VarId};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("train-mode batch norm needs a batch of at least 2, got {0}")]
    BatchTooSmall(usize),
    #[error("no recorded forward graph to differentiate")]
    GraphNotRecorded,
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
