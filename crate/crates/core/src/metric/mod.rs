//! Metric learning: embedding distances, the shell/pressure networks, and
//! the siamese training loop with contrastive or triplet loss.

mod data;
mod distance;
mod loss;
mod model;
mod train;

pub use data::{RawSample, SampleStore};
pub use distance::{dist_cosine_sim, dist_euclidean, dist_manhattan};
pub use loss::{contrastive_loss, triplet_loss};
pub use model::{Arch, BatchInput, LayerAudit, Model, ModelConfig};
pub use train::{
    embed_pairs, embed_single, train, EpochStats, LossKind, TrainConfig, TrainOutcome,
    PAPER_BATCH_SIZE, PAPER_EPOCHS, PAPER_LEARNING_RATE, PAPER_MARGIN,
};

use crate::nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("training manifest is empty")]
    EmptyManifest,
    #[error("loss diverged (non-finite) at epoch {epoch}, batch {batch}")]
    DivergedLoss { epoch: usize, batch: usize },
    #[error("checkpoint architecture does not match the provided inputs: {0}")]
    ArchMismatch(String),
    #[error("sample not found in data root: {0}")]
    MissingSample(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Shell(#[from] crate::shells::ShellError),
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
