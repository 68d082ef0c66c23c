//! Pseudo-pressure sampling and stroke thickness.

use super::{ShellSet, SHELL_COUNT};
use crate::raster::{BinaryImage, GrayImage};

/// Number of vertical offsets sampled around each shell point.
pub const PRESSURE_OFFSETS: usize = 11;

/// Intensity used outside the image and on columns without ink
/// (white background).
const PAD: u8 = 255;

/// Grayscale samples in an 11-row vertical window around each shell point:
/// `values[s][i][j] = gray(y + i - 5, j)` with `y` the shell row in raster
/// coordinates. Shape is always 6 x 11 x width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PressureMap {
    width: usize,
    values: Vec<u8>,
}

impl PressureMap {
    pub(crate) fn from_raw(width: usize, values: Vec<u8>) -> Self {
        assert_eq!(values.len(), SHELL_COUNT * PRESSURE_OFFSETS * width);
        Self { width, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, shell: usize, offset: usize, col: usize) -> u8 {
        self.values[(shell * PRESSURE_OFFSETS + offset) * self.width + col]
    }

    /// Flattened rows in shell-major, offset-minor order (66 x width).
    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.values.chunks(self.width)
    }
}

/// Samples the pseudo-pressure window for every shell point.
///
/// Contours store flipped row indices; sampling converts back to raster
/// coordinates. Rows outside the image and columns without ink read as 255.
pub fn pressure_map(gray: &GrayImage, shells: &ShellSet) -> PressureMap {
    let width = shells.width();
    debug_assert_eq!(gray.width(), width);
    let h = gray.height() as isize;
    let mut values = vec![PAD; SHELL_COUNT * PRESSURE_OFFSETS * width];
    for s in 0..SHELL_COUNT {
        let rows = shells.rows(s);
        let valid = shells.valid(s);
        for j in 0..width {
            if !valid[j] {
                continue;
            }
            let y = h - 1 - rows[j] as isize;
            for i in 0..PRESSURE_OFFSETS {
                let r = y + i as isize - 5;
                if r >= 0 && r < h {
                    values[(s * PRESSURE_OFFSETS + i) * width + j] = gray.get(r as usize, j);
                }
            }
        }
    }
    PressureMap::from_raw(width, values)
}

/// Per-column run lengths: `sup[j]` counts contiguous foreground downward
/// from the topmost ink pixel, `inf[j]` upward from the bottommost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThicknessPair {
    pub sup: Vec<u16>,
    pub inf: Vec<u16>,
}

pub fn thickness(mask: &BinaryImage) -> ThicknessPair {
    let (h, w) = (mask.height(), mask.width());
    let mut sup = vec![0u16; w];
    let mut inf = vec![0u16; w];
    for c in 0..w {
        if let Some(top) = (0..h).find(|&r| mask.get(r, c) == 1) {
            let mut r = top;
            while r < h && mask.get(r, c) == 1 {
                sup[c] += 1;
                r += 1;
            }
        }
        if let Some(bottom) = (0..h).rev().find(|&r| mask.get(r, c) == 1) {
            let mut r = bottom as isize;
            while r >= 0 && mask.get(r as usize, c) == 1 {
                inf[c] += 1;
                r -= 1;
            }
        }
    }
    ThicknessPair { sup, inf }
}
