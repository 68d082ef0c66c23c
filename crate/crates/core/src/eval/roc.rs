//! ROC curve, AUC, and score histograms.

use super::EvalError;
use serde::Serialize;

/// ROC points ordered from (0,0) to (1,1), one per swept threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    /// (false-positive rate, true-positive rate) per threshold.
    pub points: Vec<(f64, f64)>,
    /// The threshold producing each point; the sentinels are +inf and -inf.
    pub thresholds: Vec<f64>,
}

/// Sweeps thresholds over the sorted unique distances (plus +/-inf
/// sentinels). The prediction rule matches the classifier: forged when
/// `distance >= threshold`.
pub fn roc_curve(distances: &[f64], labels: &[u8]) -> Result<RocCurve, EvalError> {
    if distances.is_empty() || distances.len() != labels.len() {
        return Err(EvalError::EmptyInput);
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.iter().filter(|&&y| y == 0).count();
    if pos + neg != labels.len() {
        return Err(EvalError::BadLabel(*labels.iter().find(|&&y| y > 1).unwrap()));
    }
    if pos == 0 || neg == 0 {
        return Err(EvalError::OneClassOnly { zeros: neg, ones: pos });
    }

    let mut uniques: Vec<f64> = distances.to_vec();
    uniques.sort_by(|a, b| b.partial_cmp(a).unwrap());
    uniques.dedup();

    let mut points = Vec::with_capacity(uniques.len() + 2);
    let mut thresholds = Vec::with_capacity(uniques.len() + 2);
    points.push((0.0, 0.0));
    thresholds.push(f64::INFINITY);
    for &t in &uniques {
        let (mut tp, mut fp) = (0usize, 0usize);
        for (&d, &y) in distances.iter().zip(labels) {
            if d >= t {
                if y == 1 {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        thresholds.push(t);
    }
    points.push((1.0, 1.0));
    thresholds.push(f64::NEG_INFINITY);
    Ok(RocCurve { points, thresholds })
}

/// Trapezoidal area under the ROC curve. Equals the rank statistic
/// `P(forged distance > genuine distance) + P(tie)/2`.
pub fn auc(curve: &RocCurve) -> f64 {
    let mut area = 0.0;
    for w in curve.points.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        area += (x1 - x0) * (y0 + y1) / 2.0;
    }
    area
}

/// Per-class counts over shared bin edges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub genuine: Vec<usize>,
    pub forged: Vec<usize>,
}

pub fn distance_histogram(
    distances: &[f64],
    labels: &[u8],
    bins: usize,
) -> Result<Histogram, EvalError> {
    assert!(bins >= 1, "bins must be >= 1");
    if distances.is_empty() || distances.len() != labels.len() {
        return Err(EvalError::EmptyInput);
    }
    let lo = distances.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = distances.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut genuine = vec![0usize; bins];
    let mut forged = vec![0usize; bins];
    for (&d, &y) in distances.iter().zip(labels) {
        let idx = (((d - lo) / width) as usize).min(bins - 1);
        if y == 1 {
            forged[idx] += 1;
        } else {
            genuine[idx] += 1;
        }
    }
    Ok(Histogram { edges, genuine, forged })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive ordered-pair counting oracle for the rank statistic.
    fn mann_whitney(distances: &[f64], labels: &[u8]) -> f64 {
        let forged: Vec<f64> = distances
            .iter()
            .zip(labels)
            .filter(|(_, &y)| y == 1)
            .map(|(&d, _)| d)
            .collect();
        let genuine: Vec<f64> = distances
            .iter()
            .zip(labels)
            .filter(|(_, &y)| y == 0)
            .map(|(&d, _)| d)
            .collect();
        let mut score = 0.0;
        for &f in &forged {
            for &g in &genuine {
                if f > g {
                    score += 1.0;
                } else if f == g {
                    score += 0.5;
                }
            }
        }
        score / (forged.len() * genuine.len()) as f64
    }

    #[test]
    fn perfect_separation_is_auc_one_and_passes_top_left() {
        let distances = [0.1, 0.2, 0.8, 0.9];
        let labels = [0, 0, 1, 1];
        let curve = roc_curve(&distances, &labels).unwrap();
        assert!(curve.points.contains(&(0.0, 1.0)));
        assert_eq!(auc(&curve), 1.0);
    }

    #[test]
    fn all_equal_distances_give_auc_half() {
        let distances = [0.4, 0.4, 0.4, 0.4];
        let labels = [0, 1, 0, 1];
        let curve = roc_curve(&distances, &labels).unwrap();
        assert!((auc(&curve) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn four_sample_case_matches_enumeration() {
        // genuine {0.1, 0.6}, forged {0.4, 0.9}.
        let distances = [0.1, 0.6, 0.4, 0.9];
        let labels = [0, 0, 1, 1];
        let curve = roc_curve(&distances, &labels).unwrap();
        // Thresholds inf, 0.9, 0.6, 0.4, 0.1, -inf.
        let expected = [(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0), (1.0, 1.0)];
        assert_eq!(curve.points, expected);
        assert!((auc(&curve) - 0.75).abs() < 1e-15);
        assert!((mann_whitney(&distances, &labels) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn endpoints_and_monotonicity_hold() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.random_range(4..40);
            let distances: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
            let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
            labels[0] = 0;
            labels[1] = 1;
            let curve = roc_curve(&distances, &labels).unwrap();
            assert_eq!(*curve.points.first().unwrap(), (0.0, 0.0));
            assert_eq!(*curve.points.last().unwrap(), (1.0, 1.0));
            for w in curve.points.windows(2) {
                assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1, "not monotone: {w:?}");
            }
        }
    }

    #[test]
    fn trapezoid_equals_rank_statistic_on_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.random_range(4..120);
            // Quantized distances force plenty of ties.
            let distances: Vec<f64> =
                (0..n).map(|_| (rng.random_range(0.0f64..1.0) * 8.0).round() / 8.0).collect();
            let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.4)).collect();
            labels[0] = 0;
            labels[1] = 1;
            let curve = roc_curve(&distances, &labels).unwrap();
            let expected = mann_whitney(&distances, &labels);
            assert!((auc(&curve) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn auc_is_invariant_under_increasing_transforms() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(23);
        let distances: Vec<f64> = (0..60).map(|_| rng.random_range(0.0..3.0)).collect();
        let mut labels: Vec<u8> = (0..60).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let base = auc(&roc_curve(&distances, &labels).unwrap());
        let transformed: Vec<f64> = distances.iter().map(|&d| (2.0 * d).exp() + d).collect();
        let mapped = auc(&roc_curve(&transformed, &labels).unwrap());
        assert!((base - mapped).abs() < 1e-12);
    }

    #[test]
    fn one_class_only_is_rejected() {
        assert!(matches!(
            roc_curve(&[0.1, 0.2], &[0, 0]),
            Err(EvalError::OneClassOnly { zeros: 2, ones: 0 })
        ));
    }

    #[test]
    fn histogram_counts_single_sample() {
        let h = distance_histogram(&[0.7], &[1], 4).unwrap();
        assert_eq!(h.forged.iter().sum::<usize>(), 1);
        assert_eq!(h.genuine.iter().sum::<usize>(), 0);
    }

    #[test]
    fn disjoint_class_ranges_do_not_overlap() {
        let distances = [0.1, 0.15, 0.2, 0.8, 0.85, 0.9];
        let labels = [0, 0, 0, 1, 1, 1];
        let h = distance_histogram(&distances, &labels, 6).unwrap();
        for i in 0..6 {
            assert_eq!(h.genuine[i] * h.forged[i], 0, "bin {i} has both classes");
        }
    }

    #[test]
    fn histogram_overlap_matches_direct_recount() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(31);
        let distances: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..1.0)).collect();
        let labels: Vec<u8> = (0..100).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
        let bins = 10;
        let h = distance_histogram(&distances, &labels, bins).unwrap();
        // Recount with explicit half-open bins, last bin closed.
        let (lo, hi) = (
            distances.iter().cloned().fold(f64::INFINITY, f64::min),
            distances.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
        let width = (hi - lo) / bins as f64;
        for i in 0..bins {
            let (a, b) = (lo + width * i as f64, lo + width * (i + 1) as f64);
            let in_bin = |d: f64| {
                if i == bins - 1 {
                    d >= a && d <= b
                } else {
                    d >= a && d < b
                }
            };
            let expect_g = distances
                .iter()
                .zip(&labels)
                .filter(|(&d, &y)| y == 0 && in_bin(d))
                .count();
            let expect_f = distances
                .iter()
                .zip(&labels)
                .filter(|(&d, &y)| y == 1 && in_bin(d))
                .count();
            assert_eq!((h.genuine[i], h.forged[i]), (expect_g, expect_f), "bin {i}");
        }
    }
}
