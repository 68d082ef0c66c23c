//! Raster carriers and the deterministic pre-processing chain.
//!
//! Images are value types: row-major `u8` buffers with explicit dimensions.
//! `GrayImage` holds intensities in `[0, 255]`; `BinaryImage` holds `{0, 1}`
//! with 1 meaning ink (foreground). All operations here are pure functions,
//! safe to run per-image in parallel.

mod geometry;
mod io;
mod morphology;
mod otsu;
mod preprocess;

pub use geometry::{bounding_box, crop, resize_binary, resize_gray};
pub use io::{load_gray, load_mask, save_binary_png, save_gray_png};
pub use morphology::{morph_open, remove_small_holes, skeletonize};
pub use otsu::otsu_binarize;
pub use preprocess::{preprocess_signature, PREPROC_SIZE};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("constant image: no intensity separation for thresholding")]
    ConstantImage,
    #[error("image contains no ink pixels")]
    NoInk,
    #[error("box ({0}) exceeds image bounds {1}x{2}")]
    OutOfBounds(BoundingBox, usize, usize),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Grayscale raster, row-major, intensities in `[0, 255]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl GrayImage {
    /// Builds an image from a row-major buffer. Panics if the buffer length
    /// does not equal `height * width` or either dimension is zero.
    pub fn from_raw(height: usize, width: usize, data: Vec<u8>) -> Self {
        assert!(height >= 1 && width >= 1, "image dimensions must be >= 1");
        assert_eq!(data.len(), height * width, "buffer length mismatch");
        Self { height, width, data }
    }

    pub fn filled(height: usize, width: usize, value: u8) -> Self {
        Self::from_raw(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.data[row * self.width + col] = value;
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.data[row * self.width..(row + 1) * self.width]
    }
}

/// Binary raster, row-major, values in `{0, 1}` with 1 = ink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl BinaryImage {
    /// Builds a mask from a row-major buffer of `{0, 1}` values.
    pub fn from_raw(height: usize, width: usize, data: Vec<u8>) -> Self {
        assert!(height >= 1 && width >= 1, "image dimensions must be >= 1");
        assert_eq!(data.len(), height * width, "buffer length mismatch");
        assert!(data.iter().all(|&v| v <= 1), "binary image values must be 0 or 1");
        Self { height, width, data }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::from_raw(height, width, vec![0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        debug_assert!(value <= 1);
        self.data[row * self.width + col] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn is_empty_mask(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }
}

/// Inclusive pixel-index rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub row_min: usize,
    pub row_max: usize,
    pub col_min: usize,
    pub col_max: usize,
}

impl BoundingBox {
    pub fn height(&self) -> usize {
        self.row_max - self.row_min + 1
    }

    pub fn width(&self) -> usize {
        self.col_max - self.col_min + 1
    }
}

impl std::fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "rows {}..={}, cols {}..={}",
            self.row_min, self.row_max, self.col_min, self.col_max
        )
    }
}
