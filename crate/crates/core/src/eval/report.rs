//! Report assembly: single-manifest evaluation and the cross-dataset
//! comparison with its spread statistic.

use super::{auc, classify_threshold, metrics, roc_curve, EvalError};
use super::{ConfusionMatrix, Metrics, RocCurve, DEFAULT_THRESHOLD};
use crate::dataset::PairRow;
use crate::metric::{embed_pairs, Model, SampleStore};
use serde::Serialize;

/// Full evaluation of one set of (distance, label) scores.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub roc: RocCurve,
    pub auc: f64,
    pub samples: usize,
}

pub fn evaluate_distances(distances: &[f64], labels: &[u8]) -> Result<EvalReport, EvalError> {
    let confusion = classify_threshold(distances, labels, DEFAULT_THRESHOLD)?;
    let roc = roc_curve(distances, labels)?;
    let auc_value = auc(&roc);
    Ok(EvalReport {
        confusion,
        metrics: metrics(&confusion),
        auc: auc_value,
        roc,
        samples: distances.len(),
    })
}

/// Per-dataset result inside a cross-dataset report.
#[derive(Debug, Clone, Serialize)]
pub struct DatasetEval {
    pub name: String,
    pub auc: f64,
    pub accuracy: f64,
    pub samples: usize,
}

/// Cross-dataset evaluation: per-dataset AUCs plus their mean and
/// population standard deviation (the performance-spread statistic).
#[derive(Debug, Clone, Serialize)]
pub struct CrossReport {
    /// Dataset-group label of the evaluated model (e.g. "CI").
    pub group: String,
    /// Training sets behind the checkpoint (e.g. "CEDAR+ICDAR").
    pub train_sets: String,
    pub datasets: Vec<DatasetEval>,
    pub mean_auc: f64,
    pub std_auc: f64,
}

impl CrossReport {
    pub fn from_aucs(
        group: &str,
        train_sets: &str,
        named: &[(String, f64, f64, usize)],
    ) -> Result<Self, EvalError> {
        if named.is_empty() {
            return Err(EvalError::EmptyInput);
        }
        let datasets: Vec<DatasetEval> = named
            .iter()
            .map(|(name, auc, accuracy, samples)| DatasetEval {
                name: name.clone(),
                auc: *auc,
                accuracy: *accuracy,
                samples: *samples,
            })
            .collect();
        let n = datasets.len() as f64;
        let mean = datasets.iter().map(|d| d.auc).sum::<f64>() / n;
        let var = datasets.iter().map(|d| (d.auc - mean).powi(2)).sum::<f64>() / n;
        Ok(CrossReport {
            group: group.to_string(),
            train_sets: train_sets.to_string(),
            datasets,
            mean_auc: mean,
            std_auc: var.sqrt(),
        })
    }

    /// Flat CSV rows `group,train_sets,test_set,auc,accuracy,samples`
    /// followed by the mean/spread summary lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,train_sets,test_set,auc,accuracy,samples\n");
        for d in &self.datasets {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.group, self.train_sets, d.name, d.auc, d.accuracy, d.samples
            ));
        }
        out.push_str(&format!(
            "{0},{1},__mean__,{2},,\n{0},{1},__std__,{3},,\n",
            self.group, self.train_sets, self.mean_auc, self.std_auc
        ));
        out
    }
}

/// Evaluates one checkpointed model against several named test manifests.
pub fn cross_report(
    model: &mut Model,
    group: &str,
    train_sets: &str,
    tests: &[(String, Vec<PairRow>, SampleStore)],
    batch_size: usize,
) -> Result<(CrossReport, Vec<(String, EvalReport)>), EvalError> {
    if tests.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (name, pairs, store) in tests {
        let scored = embed_pairs(model, pairs, store, batch_size)?;
        let distances: Vec<f64> = scored.iter().map(|s| s.0).collect();
        let labels: Vec<u8> = scored.iter().map(|s| s.1).collect();
        let report = evaluate_distances(&distances, &labels)?;
        rows.push((name.clone(), report.auc, report.metrics.accuracy, report.samples));
        reports.push((name.clone(), report));
    }
    Ok((CrossReport::from_aucs(group, train_sets, &rows)?, reports))
}
