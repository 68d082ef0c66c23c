//! Split-file persistence.
//!
//! A manifest directory holds up to seven CSVs (header row, UTF-8,
//! relative paths):
//!
//! - `{train,valid,test}_pairs.csv`: `path_a,path_b,label`
//! - `{train,valid,test}_triplets.csv`: `path_a,path_p,path_n`
//!   (only written when triplets were generated)
//! - `writers.csv`: `split,dataset,writer_id`

use super::{DataError, Split, SplitManifest};
use std::fs;
use std::path::Path;

/// Pair row as persisted: paths relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRow {
    pub a: String,
    pub b: String,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletRow {
    pub a: String,
    pub p: String,
    pub n: String,
}

/// A manifest read back from disk (path-level view).
#[derive(Debug, Clone, Default)]
pub struct LoadedManifest {
    pub train_pairs: Vec<PairRow>,
    pub valid_pairs: Vec<PairRow>,
    pub test_pairs: Vec<PairRow>,
    pub train_triplets: Vec<TripletRow>,
    pub valid_triplets: Vec<TripletRow>,
    pub test_triplets: Vec<TripletRow>,
}

impl LoadedManifest {
    pub fn pairs(&self, split: Split) -> &[PairRow] {
        match split {
            Split::Train => &self.train_pairs,
            Split::Valid => &self.valid_pairs,
            Split::Test => &self.test_pairs,
        }
    }

    pub fn triplets(&self, split: Split) -> &[TripletRow] {
        match split {
            Split::Train => &self.train_triplets,
            Split::Valid => &self.valid_triplets,
            Split::Test => &self.test_triplets,
        }
    }
}

pub(super) fn save_manifest_dir(manifest: &SplitManifest, dir: &Path) -> Result<(), DataError> {
    fs::create_dir_all(dir)?;
    let mut writers = String::from("split,dataset,writer_id\n");
    for split in Split::ALL {
        let part = manifest.part(split);

        let mut out = String::from("path_a,path_b,label\n");
        for p in &part.pairs {
            out.push_str(&format!("{},{},{}\n", p.a.path, p.b.path, p.label));
        }
        fs::write(dir.join(format!("{}_pairs.csv", split.as_str())), out)?;

        if !part.triplets.is_empty() {
            let mut out = String::from("path_a,path_p,path_n\n");
            for t in &part.triplets {
                out.push_str(&format!("{},{},{}\n", t.anchor.path, t.positive.path, t.negative.path));
            }
            fs::write(dir.join(format!("{}_triplets.csv", split.as_str())), out)?;
        }

        for (dataset, writer) in &part.writers {
            writers.push_str(&format!("{},{},{}\n", split.as_str(), dataset.as_str(), writer));
        }
    }
    fs::write(dir.join("writers.csv"), writers)?;
    Ok(())
}

fn split_csv_line(line: &str, n: usize, path: &Path, lineno: usize) -> Result<Vec<String>, DataError> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != n {
        return Err(DataError::Malformed(
            path.display().to_string(),
            format!("line {lineno}: expected {n} fields, got {}", fields.len()),
        ));
    }
    Ok(fields.into_iter().map(|s| s.to_string()).collect())
}

pub fn read_pairs_csv(path: &Path) -> Result<Vec<PairRow>, DataError> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let f = split_csv_line(line, 3, path, i + 1)?;
        let label: u8 = f[2].parse().map_err(|_| {
            DataError::Malformed(path.display().to_string(), format!("line {}: bad label", i + 1))
        })?;
        if label > 1 {
            return Err(DataError::Malformed(
                path.display().to_string(),
                format!("line {}: label must be 0 or 1", i + 1),
            ));
        }
        rows.push(PairRow { a: f[0].clone(), b: f[1].clone(), label });
    }
    Ok(rows)
}

pub fn read_triplets_csv(path: &Path) -> Result<Vec<TripletRow>, DataError> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let f = split_csv_line(line, 3, path, i + 1)?;
        rows.push(TripletRow { a: f[0].clone(), p: f[1].clone(), n: f[2].clone() });
    }
    Ok(rows)
}

/// Loads whichever split files exist in a manifest directory.
pub fn load_manifest_dir(dir: &Path) -> Result<LoadedManifest, DataError> {
    let mut out = LoadedManifest::default();
    for split in Split::ALL {
        let pairs_path = dir.join(format!("{}_pairs.csv", split.as_str()));
        if pairs_path.exists() {
            let rows = read_pairs_csv(&pairs_path)?;
            match split {
                Split::Train => out.train_pairs = rows,
                Split::Valid => out.valid_pairs = rows,
                Split::Test => out.test_pairs = rows,
            }
        }
        let trip_path = dir.join(format!("{}_triplets.csv", split.as_str()));
        if trip_path.exists() {
            let rows = read_triplets_csv(&trip_path)?;
            match split {
                Split::Train => out.train_triplets = rows,
                Split::Valid => out.valid_triplets = rows,
                Split::Test => out.test_triplets = rows,
            }
        }
    }
    Ok(out)
}
