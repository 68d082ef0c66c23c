//! Dataset manifests: scanning directory layouts, writer-disjoint splits,
//! pair/triplet generation, group composition, and a synthetic signature
//! generator for desk-scale experiments.

mod manifest;
mod pairs;
mod scan;
mod split;
mod synth;

pub use manifest::{
    load_manifest_dir, read_pairs_csv, read_triplets_csv, LoadedManifest, PairRow, TripletRow,
};
pub use pairs::{
    compose_groups, downsample_writers, generate_pairs, generate_triplets, Group, PairConfig,
};
pub use scan::scan_dataset;
pub use split::{split_writers, SplitMode, WriterPartition};
pub use synth::{synth_generate, SynthConfig};

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("no signature records found under {0}")]
    EmptyDataset(PathBuf),
    #[error("unknown dataset layout '{0}' (expected cedar|icdar|gpds|synth)")]
    UnknownLayout(String),
    #[error("need at least {need} writers, found {have}")]
    TooFewWriters { have: usize, need: usize },
    #[error("insufficient signatures: {0}")]
    InsufficientSignatures(String),
    #[error("dataset group requires {0:?}, which is missing")]
    MissingDataset(DatasetTag),
    #[error("malformed file {0}: {1}")]
    Malformed(String, String),
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DatasetTag {
    Cedar,
    Icdar,
    Gpds,
    Synth,
}

impl DatasetTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetTag::Cedar => "CEDAR",
            DatasetTag::Icdar => "ICDAR",
            DatasetTag::Gpds => "GPDS",
            DatasetTag::Synth => "SYNTH",
        }
    }
}

impl std::str::FromStr for DatasetTag {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, DataError> {
        match s.to_ascii_lowercase().as_str() {
            "cedar" => Ok(DatasetTag::Cedar),
            "icdar" => Ok(DatasetTag::Icdar),
            "gpds" => Ok(DatasetTag::Gpds),
            "synth" => Ok(DatasetTag::Synth),
            other => Err(DataError::UnknownLayout(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Kind {
    Genuine,
    Forged,
}

/// One scanned signature file. `path` is relative to the dataset root so
/// manifests stay relocatable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SignatureRecord {
    pub dataset: DatasetTag,
    pub writer_id: String,
    pub kind: Kind,
    pub path: String,
}

/// A labeled training pair. Label 0 = same-writer genuine-genuine;
/// label 1 = same-writer genuine-forged or cross-writer genuine-genuine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSample {
    pub a: SignatureRecord,
    pub b: SignatureRecord,
    pub label: u8,
}

impl PairSample {
    /// Re-derives the label from the underlying records; `None` when the
    /// combination is not a legal pair under the formation rules.
    pub fn derived_label(&self) -> Option<u8> {
        let same_writer = self.a.writer_id == self.b.writer_id && self.a.dataset == self.b.dataset;
        match (same_writer, self.a.kind, self.b.kind) {
            (true, Kind::Genuine, Kind::Genuine) => Some(0),
            (true, Kind::Genuine, Kind::Forged) | (true, Kind::Forged, Kind::Genuine) => Some(1),
            (false, Kind::Genuine, Kind::Genuine) => Some(1),
            _ => None,
        }
    }
}

/// An anchor/positive/negative triple for triplet training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletSample {
    pub anchor: SignatureRecord,
    pub positive: SignatureRecord,
    pub negative: SignatureRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

/// One split's content.
#[derive(Debug, Clone, Default)]
pub struct SplitPart {
    pub writers: Vec<(DatasetTag, String)>,
    pub pairs: Vec<PairSample>,
    pub triplets: Vec<TripletSample>,
}

/// Train/valid/test manifests with their writer partitions.
#[derive(Debug, Clone, Default)]
pub struct SplitManifest {
    pub train: SplitPart,
    pub valid: SplitPart,
    pub test: SplitPart,
}

impl SplitManifest {
    pub fn part(&self, split: Split) -> &SplitPart {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn part_mut(&mut self, split: Split) -> &mut SplitPart {
        match split {
            Split::Train => &mut self.train,
            Split::Valid => &mut self.valid,
            Split::Test => &mut self.test,
        }
    }

    /// Writer sets of the three splits must be pairwise disjoint.
    pub fn writers_disjoint(&self) -> bool {
        let sets: Vec<BTreeSet<_>> = Split::ALL
            .iter()
            .map(|&s| self.part(s).writers.iter().cloned().collect::<BTreeSet<_>>())
            .collect();
        sets[0].is_disjoint(&sets[1]) && sets[0].is_disjoint(&sets[2]) && sets[1].is_disjoint(&sets[2])
    }

    pub fn save(&self, dir: &std::path::Path) -> Result<(), DataError> {
        manifest::save_manifest_dir(self, dir)
    }
}
