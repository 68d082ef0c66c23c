//! Shell ribbon extraction and the 1D functional signature representation.
//!
//! A mask is decomposed per column into a superior ribbon (the contiguous
//! run hanging from the topmost ink pixel), an inferior ribbon (the run
//! rising from the bottommost pixel), and a residual (whatever ink remains
//! between them). Each ribbon is then flattened into 1D contour functions
//! giving, per column, the row index of its outer boundaries.
//!
//! Coordinate frames: the contour functions are stored in the vertically
//! flipped frame (row 0 = image bottom), which is how they are exported.
//! Pressure sampling converts back to raster coordinates.

mod export;
mod extract;
mod pressure;

pub use export::{read_record, write_record, ShellRecord};
pub use extract::{
    cleaned_mask, extract_shells, extract_shells_any, extract_shells_pruned, img_to_shell_func,
    prune, residual_mask, shell_i_binary, shell_s_binary, PruneOutput, DEFAULT_HOLE_AREA,
};
pub use pressure::{pressure_map, thickness, PressureMap, ThicknessPair, PRESSURE_OFFSETS};

use crate::raster::RasterError;
use thiserror::Error;

/// Number of contour functions per signature: S1, I1, S2, I2, resS, resI.
pub const SHELL_COUNT: usize = 6;

/// Fixed contour length at the public API (one value per image column).
pub const SHELL_WIDTH: usize = crate::raster::PREPROC_SIZE;

#[derive(Debug, Error)]
pub enum ShellError {
    #[error("mask has no ink after pruning")]
    NoInk,
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("expected a {expected}x{expected} input, got {got_h}x{got_w}")]
    WrongSize { expected: usize, got_h: usize, got_w: usize },
    #[error("malformed record file {0}: {1}")]
    Malformed(String, String),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// The six 1D contour functions of one signature, plus validity masks.
///
/// `rows[s][j]` is the flipped row index of contour `s` at column `j`;
/// columns without ink hold the fill value 0 and `valid[s][j] == false`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShellSet {
    width: usize,
    rows: [Vec<u16>; SHELL_COUNT],
    valid: [Vec<bool>; SHELL_COUNT],
}

/// Contour identifiers in storage/export order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShellKind {
    SuperiorOuter = 0,
    SuperiorInner = 1,
    InferiorOuter = 2,
    InferiorInner = 3,
    ResidualOuter = 4,
    ResidualInner = 5,
}

impl ShellSet {
    pub(crate) fn new(width: usize, rows: [Vec<u16>; SHELL_COUNT], valid: [Vec<bool>; SHELL_COUNT]) -> Self {
        for s in 0..SHELL_COUNT {
            debug_assert_eq!(rows[s].len(), width);
            debug_assert_eq!(valid[s].len(), width);
        }
        Self { width, rows, valid }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Flipped row indices of contour `s` (0 = image bottom).
    pub fn rows(&self, s: usize) -> &[u16] {
        &self.rows[s]
    }

    pub fn valid(&self, s: usize) -> &[bool] {
        &self.valid[s]
    }
}
