//! Writer-disjoint split assignment.

use super::{DataError, SignatureRecord};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeSet;

/// How writers are ordered before apportioning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// Writers sorted by id, assigned in order: first block trains, next
    /// validates, last tests (the published splits use explicit id ranges).
    Ordered,
    /// Writers shuffled deterministically by seed before assignment.
    Seeded(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WriterPartition {
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

/// Apportions `n` writers to the three fractions with the largest-remainder
/// method (sizes round to nearest while preserving the total; remainder ties
/// resolve in split order train, valid, test).
fn apportion(n: usize, fractions: (f64, f64, f64)) -> [usize; 3] {
    let fr = [fractions.0, fractions.1, fractions.2];
    let exact: Vec<f64> = fr.iter().map(|f| f * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|&e| e.floor() as usize).collect();
    let mut leftover = n - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if leftover == 0 {
            break;
        }
        sizes[i] += 1;
        leftover -= 1;
    }
    [sizes[0], sizes[1], sizes[2]]
}

/// Partitions the writers appearing in `records` into disjoint train/valid/
/// test sets sized by `fractions`.
pub fn split_writers(
    records: &[SignatureRecord],
    fractions: (f64, f64, f64),
    mode: SplitMode,
) -> Result<WriterPartition, DataError> {
    let sum = fractions.0 + fractions.1 + fractions.2;
    assert!((sum - 1.0).abs() < 1e-9, "fractions must sum to 1, got {sum}");

    let writers: BTreeSet<&str> = records.iter().map(|r| r.writer_id.as_str()).collect();
    let mut writers: Vec<String> = writers.into_iter().map(|s| s.to_string()).collect();
    if writers.len() < 3 {
        return Err(DataError::TooFewWriters { have: writers.len(), need: 3 });
    }
    if let SplitMode::Seeded(seed) = mode {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        writers.shuffle(&mut rng);
    }

    let [n_train, n_valid, _] = apportion(writers.len(), fractions);
    let valid = writers.split_off(n_train);
    let (valid, test) = {
        let mut v = valid;
        let t = v.split_off(n_valid);
        (v, t)
    };
    Ok(WriterPartition { train: writers, valid, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatasetTag, Kind};

    fn records_for(n_writers: usize) -> Vec<SignatureRecord> {
        (1..=n_writers)
            .map(|w| SignatureRecord {
                dataset: DatasetTag::Synth,
                writer_id: format!("{w:02}"),
                kind: Kind::Genuine,
                path: format!("writer_{w:02}/genuine_01.png"),
            })
            .collect()
    }

    const THIRDS: (f64, f64, f64) = (2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0);

    #[test]
    fn six_writers_split_four_one_one() {
        let part = split_writers(&records_for(6), THIRDS, SplitMode::Ordered).unwrap();
        assert_eq!((part.train.len(), part.valid.len(), part.test.len()), (4, 1, 1));
    }

    #[test]
    fn cedar_55_reproduces_published_ranges_in_ordered_mode() {
        let part = split_writers(&records_for(55), THIRDS, SplitMode::Ordered).unwrap();
        assert_eq!((part.train.len(), part.valid.len(), part.test.len()), (37, 9, 9));
        // Publication split: train 01-37, valid 38-46, test 47-55.
        assert_eq!(part.train.first().unwrap(), "01");
        assert_eq!(part.train.last().unwrap(), "37");
        assert_eq!(part.valid.first().unwrap(), "38");
        assert_eq!(part.valid.last().unwrap(), "46");
        assert_eq!(part.test.first().unwrap(), "47");
        assert_eq!(part.test.last().unwrap(), "55");
    }

    #[test]
    fn same_seed_gives_identical_partition() {
        let a = split_writers(&records_for(20), THIRDS, SplitMode::Seeded(42)).unwrap();
        let b = split_writers(&records_for(20), THIRDS, SplitMode::Seeded(42)).unwrap();
        assert_eq!(a, b);
        let c = split_writers(&records_for(20), THIRDS, SplitMode::Seeded(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn partitions_are_disjoint_and_cover_everyone() {
        let part = split_writers(&records_for(17), THIRDS, SplitMode::Seeded(7)).unwrap();
        let mut all: Vec<&String> =
            part.train.iter().chain(&part.valid).chain(&part.test).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 17);
    }

    #[test]
    fn too_few_writers_is_rejected() {
        assert!(matches!(
            split_writers(&records_for(2), THIRDS, SplitMode::Ordered),
            Err(DataError::TooFewWriters { have: 2, need: 3 })
        ));
    }
}
