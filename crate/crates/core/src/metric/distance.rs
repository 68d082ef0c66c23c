//! Embedding-space distance and similarity measures.

use super::MetricError;

fn check_dims(h1: &[f64], h2: &[f64]) -> Result<(), MetricError> {
    if h1.len() != h2.len() {
        return Err(MetricError::DimMismatch(h1.len(), h2.len()));
    }
    Ok(())
}

/// Euclidean distance `sqrt(sum (h1 - h2)^2)`.
pub fn dist_euclidean(h1: &[f64], h2: &[f64]) -> Result<f64, MetricError> {
    check_dims(h1, h2)?;
    Ok(h1.iter().zip(h2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

/// Manhattan (L1) distance `sum |h1 - h2|`.
pub fn dist_manhattan(h1: &[f64], h2: &[f64]) -> Result<f64, MetricError> {
    check_dims(h1, h2)?;
    Ok(h1.iter().zip(h2).map(|(a, b)| (a - b).abs()).sum())
}

/// Cosine similarity in `[-1, 1]`; both vectors must have nonzero norm.
pub fn dist_cosine_sim(h1: &[f64], h2: &[f64]) -> Result<f64, MetricError> {
    check_dims(h1, h2)?;
    let dot: f64 = h1.iter().zip(h2).map(|(a, b)| a * b).sum();
    let n1 = h1.iter().map(|v| v * v).sum::<f64>().sqrt();
    let n2 = h2.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n1 == 0.0 || n2 == 0.0 {
        return Err(MetricError::ZeroVector);
    }
    Ok(dot / (n1 * n2))
}
