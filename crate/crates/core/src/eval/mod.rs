//! Evaluation of distance-based verification: threshold classification,
//! confusion metrics, ROC curves, AUC, score histograms, and cross-dataset
//! report assembly.
//!
//! Conventions: the positive class is forged (label 1) and the score is the
//! embedding distance; a distance at or above the threshold predicts forged.

mod metrics;
mod report;
mod roc;

pub use metrics::{classify_threshold, metrics, ConfusionMatrix, Metrics, DEFAULT_THRESHOLD};
pub use report::{cross_report, evaluate_distances, CrossReport, DatasetEval, EvalReport};
pub use roc::{auc, distance_histogram, roc_curve, Histogram, RocCurve};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no samples to evaluate")]
    EmptyInput,
    #[error("ROC needs both classes present (got {zeros} genuine / {ones} forged)")]
    OneClassOnly { zeros: usize, ones: usize },
    #[error("labels must be 0 or 1, got {0}")]
    BadLabel(u8),
    #[error(transparent)]
    Metric(#[from] crate::metric::MetricError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
