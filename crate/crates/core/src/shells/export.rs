//! CSV export of shell records.
//!
//! A record directory holds four comma-separated integer matrices with no
//! header row:
//!
//! - `shells.csv`: 6 rows x width, contour order S1, I1, S2, I2, resS, resI
//! - `pressure.csv`: 66 rows x width, shell-major offset-minor
//! - `thickness.csv`: 2 rows x width (superior, inferior)
//! - `valid.csv`: 6 rows x width of {0,1}, the contour validity masks
//!
//! `valid.csv` is a sidecar so a re-imported record reproduces the original
//! exactly: the fill value 0 in `shells.csv` is otherwise ambiguous with a
//! genuine contour at row 0.

use super::{PressureMap, ShellError, ShellSet, ThicknessPair, PRESSURE_OFFSETS, SHELL_COUNT};
use std::fs;
use std::io::Write;
use std::path::Path;

pub const SHELLS_FILE: &str = "shells.csv";
pub const PRESSURE_FILE: &str = "pressure.csv";
pub const THICKNESS_FILE: &str = "thickness.csv";
pub const VALID_FILE: &str = "valid.csv";

/// One signature's exported feature set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShellRecord {
    pub shells: ShellSet,
    pub pressure: PressureMap,
    pub thickness: ThicknessPair,
}

fn write_matrix<I, R>(path: &Path, rows: I) -> Result<(), ShellError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = u32>,
{
    let mut out = String::new();
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            out.push_str(&v.to_string());
            first = false;
        }
        out.push('\n');
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

fn read_matrix(path: &Path) -> Result<Vec<Vec<u32>>, ShellError> {
    let text = fs::read_to_string(path)?;
    let name = path.display().to_string();
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<u32>, _> = line.split(',').map(|t| t.trim().parse::<u32>()).collect();
        rows.push(row.map_err(|e| ShellError::Malformed(name.clone(), format!("line {}: {e}", lineno + 1)))?);
    }
    Ok(rows)
}

/// Writes the three feature matrices plus the validity sidecar into `dir`.
pub fn write_record(record: &ShellRecord, dir: &Path) -> Result<(), ShellError> {
    fs::create_dir_all(dir)?;
    let w = record.shells.width();

    write_matrix(
        &dir.join(SHELLS_FILE),
        (0..SHELL_COUNT).map(|s| record.shells.rows(s).iter().map(|&v| v as u32).collect::<Vec<_>>()),
    )?;
    write_matrix(
        &dir.join(VALID_FILE),
        (0..SHELL_COUNT).map(|s| record.shells.valid(s).iter().map(|&v| u32::from(v)).collect::<Vec<_>>()),
    )?;
    write_matrix(&dir.join(PRESSURE_FILE), record.pressure.rows().map(|r| r.iter().map(|&v| v as u32).collect::<Vec<_>>()))?;
    debug_assert_eq!(record.thickness.sup.len(), w);
    write_matrix(
        &dir.join(THICKNESS_FILE),
        [
            record.thickness.sup.iter().map(|&v| v as u32).collect::<Vec<_>>(),
            record.thickness.inf.iter().map(|&v| v as u32).collect::<Vec<_>>(),
        ],
    )?;
    Ok(())
}

/// Reads a record directory written by [`write_record`].
pub fn read_record(dir: &Path) -> Result<ShellRecord, ShellError> {
    let shape_err = |file: &str, msg: String| ShellError::Malformed(dir.join(file).display().to_string(), msg);

    let shell_rows = read_matrix(&dir.join(SHELLS_FILE))?;
    if shell_rows.len() != SHELL_COUNT {
        return Err(shape_err(SHELLS_FILE, format!("expected {SHELL_COUNT} rows, got {}", shell_rows.len())));
    }
    let width = shell_rows[0].len();
    if width == 0 || shell_rows.iter().any(|r| r.len() != width) {
        return Err(shape_err(SHELLS_FILE, "ragged rows".into()));
    }

    let valid_rows = read_matrix(&dir.join(VALID_FILE))?;
    if valid_rows.len() != SHELL_COUNT || valid_rows.iter().any(|r| r.len() != width) {
        return Err(shape_err(VALID_FILE, "shape mismatch with shells.csv".into()));
    }

    let mut rows: [Vec<u16>; SHELL_COUNT] = Default::default();
    let mut valid: [Vec<bool>; SHELL_COUNT] = Default::default();
    for s in 0..SHELL_COUNT {
        rows[s] = shell_rows[s].iter().map(|&v| v as u16).collect();
        valid[s] = valid_rows[s].iter().map(|&v| v != 0).collect();
    }
    let shells = ShellSet::new(width, rows, valid);

    let pressure_rows = read_matrix(&dir.join(PRESSURE_FILE))?;
    if pressure_rows.len() != SHELL_COUNT * PRESSURE_OFFSETS
        || pressure_rows.iter().any(|r| r.len() != width)
    {
        return Err(shape_err(PRESSURE_FILE, "expected 66 rows matching shell width".into()));
    }
    let pressure = PressureMap::from_raw(
        width,
        pressure_rows.iter().flat_map(|r| r.iter().map(|&v| v as u8)).collect(),
    );

    let thick_rows = read_matrix(&dir.join(THICKNESS_FILE))?;
    if thick_rows.len() != 2 || thick_rows.iter().any(|r| r.len() != width) {
        return Err(shape_err(THICKNESS_FILE, "expected 2 rows matching shell width".into()));
    }
    let thickness = ThicknessPair {
        sup: thick_rows[0].iter().map(|&v| v as u16).collect(),
        inf: thick_rows[1].iter().map(|&v| v as u16).collect(),
    };

    Ok(ShellRecord { shells, pressure, thickness })
}
