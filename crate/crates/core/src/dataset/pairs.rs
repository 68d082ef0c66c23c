//! Pair and triplet generation.
//!
//! Label-0 pairs are ordered genuine-genuine pairs from one writer (the
//! reversed pair counts as a distinct sample). The label-1 quota of each
//! writer splits into genuine-forged same-writer pairs and cross-writer
//! genuine-genuine pairs at `(1 - f) : f`. Pools are sampled without
//! replacement until exhausted, then with replacement. Everything is a pure
//! function of (records, config, seed).

use super::{
    DataError, DatasetTag, Kind, PairSample, SignatureRecord, SplitManifest, TripletSample,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::collections::{BTreeMap, BTreeSet, HashMap};

#[derive(Debug, Clone, Copy)]
pub struct PairConfig {
    pub genuine_pairs_per_writer: usize,
    pub forged_pairs_per_writer: usize,
    /// Fraction of the label-1 quota drawn as cross-writer genuine pairs.
    pub cross_writer_fraction: f64,
    pub seed: u64,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self {
            genuine_pairs_per_writer: 100,
            forged_pairs_per_writer: 100,
            cross_writer_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Draws `k` pool indices: a partial Fisher-Yates permutation while the pool
/// lasts, uniform with replacement afterwards.
fn sample_indices<R: Rng>(pool: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let without = k.min(pool);
    let mut swapped: HashMap<usize, usize> = HashMap::new();
    let lookup = |map: &HashMap<usize, usize>, i: usize| *map.get(&i).unwrap_or(&i);
    for i in 0..without {
        let j = rng.random_range(i..pool);
        let vi = lookup(&swapped, i);
        let vj = lookup(&swapped, j);
        swapped.insert(j, vi);
        out.push(vj);
    }
    for _ in without..k {
        out.push(rng.random_range(0..pool));
    }
    out
}

/// Ordered pair (i, j) with i != j from the flat index of an n*(n-1) pool.
fn ordered_pair(n: usize, idx: usize) -> (usize, usize) {
    let i = idx / (n - 1);
    let jj = idx % (n - 1);
    let j = if jj >= i { jj + 1 } else { jj };
    (i, j)
}

struct WriterPools<'a> {
    genuine: Vec<&'a SignatureRecord>,
    forged: Vec<&'a SignatureRecord>,
}

fn group_by_writer<'a>(
    records: &'a [SignatureRecord],
    writer_set: &BTreeSet<String>,
) -> BTreeMap<String, WriterPools<'a>> {
    let mut map: BTreeMap<String, WriterPools<'a>> = BTreeMap::new();
    for r in records {
        if !writer_set.contains(&r.writer_id) {
            continue;
        }
        let pools = map
            .entry(r.writer_id.clone())
            .or_insert_with(|| WriterPools { genuine: Vec::new(), forged: Vec::new() });
        match r.kind {
            Kind::Genuine => pools.genuine.push(r),
            Kind::Forged => pools.forged.push(r),
        }
    }
    map
}

fn check_pools(pools: &BTreeMap<String, WriterPools>) -> Result<(), DataError> {
    for (writer, p) in pools {
        if p.genuine.len() < 2 || p.forged.is_empty() {
            return Err(DataError::InsufficientSignatures(format!(
                "writer {writer}: {} genuine / {} forged (need >= 2 / >= 1)",
                p.genuine.len(),
                p.forged.len()
            )));
        }
    }
    Ok(())
}

/// Number of cross-writer pairs in a label-1 quota.
fn cross_quota(total: usize, fraction: f64) -> usize {
    (total as f64 * fraction).round() as usize
}

/// Generates the pair manifest for the writers in `writer_set`.
pub fn generate_pairs(
    records: &[SignatureRecord],
    writer_set: &BTreeSet<String>,
    cfg: &PairConfig,
) -> Result<Vec<PairSample>, DataError> {
    let pools = group_by_writer(records, writer_set);
    if pools.is_empty() {
        return Err(DataError::InsufficientSignatures("writer set matched no records".into()));
    }
    check_pools(&pools)?;

    let n_cross = cross_quota(cfg.forged_pairs_per_writer, cfg.cross_writer_fraction);
    let n_gf = cfg.forged_pairs_per_writer - n_cross;
    if n_cross > 0 && pools.len() < 2 {
        return Err(DataError::InsufficientSignatures(
            "cross-writer pairs need at least two writers in the split".into(),
        ));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for (writer, p) in &pools {
        let ng = p.genuine.len();

        // Label 0: ordered genuine-genuine pairs.
        let pool = ng * (ng - 1);
        for idx in sample_indices(pool, cfg.genuine_pairs_per_writer, &mut rng) {
            let (i, j) = ordered_pair(ng, idx);
            out.push(PairSample { a: p.genuine[i].clone(), b: p.genuine[j].clone(), label: 0 });
        }

        // Label 1a: genuine-forged, same writer.
        let pool = ng * p.forged.len();
        for idx in sample_indices(pool, n_gf, &mut rng) {
            let (i, j) = (idx / p.forged.len(), idx % p.forged.len());
            out.push(PairSample { a: p.genuine[i].clone(), b: p.forged[j].clone(), label: 1 });
        }

        // Label 1b: genuine-genuine, different writer.
        if n_cross > 0 {
            let others: Vec<&SignatureRecord> = pools
                .iter()
                .filter(|(w, _)| *w != writer)
                .flat_map(|(_, op)| op.genuine.iter().copied())
                .collect();
            let pool = ng * others.len();
            for idx in sample_indices(pool, n_cross, &mut rng) {
                let (i, j) = (idx / others.len(), idx % others.len());
                out.push(PairSample { a: p.genuine[i].clone(), b: others[j].clone(), label: 1 });
            }
        }
    }
    Ok(out)
}

/// Generates the triplet manifest: anchors and positives are distinct
/// genuine samples of one writer; negatives split `(1 - f) : f` between
/// same-writer forgeries and other writers' genuines.
pub fn generate_triplets(
    records: &[SignatureRecord],
    writer_set: &BTreeSet<String>,
    triplets_per_writer: usize,
    cross_writer_fraction: f64,
    seed: u64,
) -> Result<Vec<TripletSample>, DataError> {
    let pools = group_by_writer(records, writer_set);
    if pools.is_empty() {
        return Err(DataError::InsufficientSignatures("writer set matched no records".into()));
    }
    check_pools(&pools)?;

    let n_cross = cross_quota(triplets_per_writer, cross_writer_fraction);
    let n_forged = triplets_per_writer - n_cross;
    if n_cross > 0 && pools.len() < 2 {
        return Err(DataError::InsufficientSignatures(
            "cross-writer negatives need at least two writers in the split".into(),
        ));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (writer, p) in &pools {
        let ng = p.genuine.len();
        let ap_pool = ng * (ng - 1);
        let anchors = sample_indices(ap_pool, triplets_per_writer, &mut rng);

        let forged_negs = sample_indices(p.forged.len(), n_forged, &mut rng);
        let others: Vec<&SignatureRecord> = pools
            .iter()
            .filter(|(w, _)| *w != writer)
            .flat_map(|(_, op)| op.genuine.iter().copied())
            .collect();
        let cross_negs = sample_indices(others.len().max(1), n_cross, &mut rng);

        for (t, &ap_idx) in anchors.iter().enumerate() {
            let (i, j) = ordered_pair(ng, ap_idx);
            let negative = if t < n_forged {
                p.forged[forged_negs[t]].clone()
            } else {
                others[cross_negs[t - n_forged]].clone()
            };
            out.push(TripletSample {
                anchor: p.genuine[i].clone(),
                positive: p.genuine[j].clone(),
                negative,
            });
        }
    }
    Ok(out)
}

/// Caps the number of pairs attributed to each writer (by the writer of the
/// pair's first element), keeping a seeded uniform sample.
pub fn downsample_writers(pairs: &[PairSample], target_per_writer: usize, seed: u64) -> Vec<PairSample> {
    let mut by_writer: BTreeMap<(DatasetTag, String), Vec<usize>> = BTreeMap::new();
    for (i, p) in pairs.iter().enumerate() {
        by_writer.entry((p.a.dataset, p.a.writer_id.clone())).or_default().push(i);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (_, indices) in by_writer {
        let keep = sample_indices(indices.len(), target_per_writer.min(indices.len()), &mut rng);
        let mut keep: Vec<usize> = keep.into_iter().map(|k| indices[k]).collect();
        keep.sort_unstable();
        out.extend(keep.into_iter().map(|i| pairs[i].clone()));
    }
    out
}

/// Dataset-group composition: concatenates member manifests split-wise with
/// no re-mixing across splits. Groups follow the CI / CG / IG / CIG naming.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Ci,
    Cg,
    Ig,
    Cig,
}

impl Group {
    pub fn members(&self) -> &'static [DatasetTag] {
        match self {
            Group::Ci => &[DatasetTag::Cedar, DatasetTag::Icdar],
            Group::Cg => &[DatasetTag::Cedar, DatasetTag::Gpds],
            Group::Ig => &[DatasetTag::Icdar, DatasetTag::Gpds],
            Group::Cig => &[DatasetTag::Cedar, DatasetTag::Icdar, DatasetTag::Gpds],
        }
    }
}

impl std::str::FromStr for Group {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, DataError> {
        match s.to_ascii_lowercase().as_str() {
            "ci" => Ok(Group::Ci),
            "cg" => Ok(Group::Cg),
            "ig" => Ok(Group::Ig),
            "cig" => Ok(Group::Cig),
            other => Err(DataError::UnknownLayout(format!("group '{other}'"))),
        }
    }
}

pub fn compose_groups(
    manifests: &BTreeMap<DatasetTag, SplitManifest>,
    group: Group,
) -> Result<SplitManifest, DataError> {
    let mut out = SplitManifest::default();
    for &tag in group.members() {
        let m = manifests.get(&tag).ok_or(DataError::MissingDataset(tag))?;
        for split in super::Split::ALL {
            let dst = out.part_mut(split);
            let src = m.part(split);
            dst.writers.extend(src.writers.iter().cloned());
            dst.pairs.extend(src.pairs.iter().cloned());
            dst.triplets.extend(src.triplets.iter().cloned());
        }
    }
    Ok(out)
}
