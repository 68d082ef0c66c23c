//! Threshold classifier and confusion-matrix metrics.

use super::EvalError;
use serde::Serialize;

/// Decision threshold used by the published classification rule.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Binary confusion counts laid out as `[[TP, FP], [FN, TN]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Tallies predictions `distance >= threshold -> forged`. A distance exactly
/// at the threshold predicts forged (conservative for forgery detection).
pub fn classify_threshold(
    distances: &[f64],
    labels: &[u8],
    threshold: f64,
) -> Result<ConfusionMatrix, EvalError> {
    if distances.is_empty() || distances.len() != labels.len() {
        return Err(EvalError::EmptyInput);
    }
    let mut cm = ConfusionMatrix { tp: 0, fp: 0, fn_: 0, tn: 0 };
    for (&d, &y) in distances.iter().zip(labels) {
        if y > 1 {
            return Err(EvalError::BadLabel(y));
        }
        let predicted_forged = d >= threshold;
        match (y, predicted_forged) {
            (1, true) => cm.tp += 1,
            (0, true) => cm.fp += 1,
            (1, false) => cm.fn_ += 1,
            (0, false) => cm.tn += 1,
            _ => unreachable!(),
        }
    }
    Ok(cm)
}

/// Derived metrics; a metric whose denominator is zero is reported as
/// absent rather than forced to a value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    let total = cm.total() as f64;
    let accuracy = (cm.tp + cm.tn) as f64 / total;
    let precision = (cm.tp + cm.fp > 0).then(|| cm.tp as f64 / (cm.tp + cm.fp) as f64);
    let recall = (cm.tp + cm.fn_ > 0).then(|| cm.tp as f64 / (cm.tp + cm.fn_) as f64);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Metrics { accuracy, precision, recall, f1 }
}
