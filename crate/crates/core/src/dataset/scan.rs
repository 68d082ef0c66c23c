//! Directory-layout scanners for the supported datasets.
//!
//! Expected layouts (images are .png or .pgm):
//!
//! - SYNTH: `root/writer_<id>/genuine_<n>.png`, `root/writer_<id>/forged_<n>.png`
//! - CEDAR: `root/full_org/original_<writer>_<n>.png`,
//!          `root/full_forg/forgeries_<writer>_<n>.png`
//! - ICDAR: `root/genuine/<writer>_<n>.png`, `root/forged/<writer>_<n>.png`
//!   (writer ids may be missing from the numbering; that is tolerated)
//! - GPDS:  `root/<writer>/c-<writer>-<n>.png`, `root/<writer>/cf-<writer>-<n>.png`

use super::{DataError, DatasetTag, Kind, SignatureRecord};
use std::path::Path;

fn is_image(name: &str) -> bool {
    name.ends_with(".png") || name.ends_with(".pgm")
}

fn sorted_entries(dir: &Path) -> Result<Vec<(String, bool)>, std::io::Error> {
    let mut out = Vec::new();
    if !dir.exists() {
        return Ok(out);
    }
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        out.push((name, entry.file_type()?.is_dir()));
    }
    out.sort();
    Ok(out)
}

/// Enumerates signature records under `root` following `layout` conventions.
/// Records come back sorted by (writer, kind, path) so downstream sampling
/// is independent of directory-walk order.
pub fn scan_dataset(root: &Path, layout: DatasetTag) -> Result<Vec<SignatureRecord>, DataError> {
    let mut records = Vec::new();
    match layout {
        DatasetTag::Synth => {
            for (dir_name, is_dir) in sorted_entries(root)? {
                if !is_dir {
                    continue;
                }
                let Some(writer) = dir_name.strip_prefix("writer_") else { continue };
                for (file, _) in sorted_entries(&root.join(&dir_name))? {
                    if !is_image(&file) {
                        continue;
                    }
                    let kind = if file.starts_with("genuine_") {
                        Kind::Genuine
                    } else if file.starts_with("forged_") {
                        Kind::Forged
                    } else {
                        continue;
                    };
                    records.push(SignatureRecord {
                        dataset: layout,
                        writer_id: writer.to_string(),
                        kind,
                        path: format!("{dir_name}/{file}"),
                    });
                }
            }
        }
        DatasetTag::Cedar => {
            for (subdir, prefix, kind) in
                [("full_org", "original_", Kind::Genuine), ("full_forg", "forgeries_", Kind::Forged)]
            {
                for (file, _) in sorted_entries(&root.join(subdir))? {
                    if !is_image(&file) {
                        continue;
                    }
                    let Some(rest) = file.strip_prefix(prefix) else { continue };
                    // original_<writer>_<n>.png
                    let Some(writer) = rest.split('_').next() else { continue };
                    records.push(SignatureRecord {
                        dataset: layout,
                        writer_id: writer.to_string(),
                        kind,
                        path: format!("{subdir}/{file}"),
                    });
                }
            }
        }
        DatasetTag::Icdar => {
            for (subdir, kind) in [("genuine", Kind::Genuine), ("forged", Kind::Forged)] {
                for (file, _) in sorted_entries(&root.join(subdir))? {
                    if !is_image(&file) {
                        continue;
                    }
                    // <writer>_<n>.png; missing writer ids simply never appear.
                    let Some(writer) = file.split('_').next() else { continue };
                    records.push(SignatureRecord {
                        dataset: layout,
                        writer_id: writer.to_string(),
                        kind,
                        path: format!("{subdir}/{file}"),
                    });
                }
            }
        }
        DatasetTag::Gpds => {
            for (dir_name, is_dir) in sorted_entries(root)? {
                if !is_dir {
                    continue;
                }
                for (file, _) in sorted_entries(&root.join(&dir_name))? {
                    if !is_image(&file) {
                        continue;
                    }
                    let kind = if file.starts_with("cf-") {
                        Kind::Forged
                    } else if file.starts_with("c-") {
                        Kind::Genuine
                    } else {
                        continue;
                    };
                    records.push(SignatureRecord {
                        dataset: layout,
                        writer_id: dir_name.clone(),
                        kind,
                        path: format!("{dir_name}/{file}"),
                    });
                }
            }
        }
    }
    if records.is_empty() {
        return Err(DataError::EmptyDataset(root.to_path_buf()));
    }
    records.sort();
    Ok(records)
}
