//! Bounding box, crop, and resize.

use super::{BinaryImage, BoundingBox, GrayImage, RasterError};

/// Tightest rectangle containing every foreground pixel.
pub fn bounding_box(img: &BinaryImage) -> Result<BoundingBox, RasterError> {
    let mut row_min = usize::MAX;
    let mut row_max = 0usize;
    let mut col_min = usize::MAX;
    let mut col_max = 0usize;
    let mut found = false;
    for row in 0..img.height() {
        for col in 0..img.width() {
            if img.get(row, col) == 1 {
                found = true;
                row_min = row_min.min(row);
                row_max = row_max.max(row);
                col_min = col_min.min(col);
                col_max = col_max.max(col);
            }
        }
    }
    if !found {
        return Err(RasterError::NoInk);
    }
    Ok(BoundingBox { row_min, row_max, col_min, col_max })
}

/// Extracts the sub-image covered by `bbox` (inclusive bounds).
pub fn crop(img: &GrayImage, bbox: &BoundingBox) -> Result<GrayImage, RasterError> {
    if bbox.row_min > bbox.row_max
        || bbox.col_min > bbox.col_max
        || bbox.row_max >= img.height()
        || bbox.col_max >= img.width()
    {
        return Err(RasterError::OutOfBounds(*bbox, img.height(), img.width()));
    }
    let mut data = Vec::with_capacity(bbox.height() * bbox.width());
    for row in bbox.row_min..=bbox.row_max {
        data.extend_from_slice(&img.row(row)[bbox.col_min..=bbox.col_max]);
    }
    Ok(GrayImage::from_raw(bbox.height(), bbox.width(), data))
}

/// Source coordinate for output index `i`, half-pixel-center convention,
/// clamped into the valid range.
fn src_coord(i: usize, out_len: usize, in_len: usize) -> f64 {
    let x = (i as f64 + 0.5) * in_len as f64 / out_len as f64 - 0.5;
    x.clamp(0.0, (in_len - 1) as f64)
}

/// Bilinear resize for grayscale images.
pub fn resize_gray(img: &GrayImage, out_h: usize, out_w: usize) -> GrayImage {
    assert!(out_h >= 1 && out_w >= 1);
    let mut data = Vec::with_capacity(out_h * out_w);
    for i in 0..out_h {
        let y = src_coord(i, out_h, img.height());
        let y0 = y.floor() as usize;
        let y1 = (y0 + 1).min(img.height() - 1);
        let fy = y - y0 as f64;
        for j in 0..out_w {
            let x = src_coord(j, out_w, img.width());
            let x0 = x.floor() as usize;
            let x1 = (x0 + 1).min(img.width() - 1);
            let fx = x - x0 as f64;
            let v = (1.0 - fy) * (1.0 - fx) * img.get(y0, x0) as f64
                + (1.0 - fy) * fx * img.get(y0, x1) as f64
                + fy * (1.0 - fx) * img.get(y1, x0) as f64
                + fy * fx * img.get(y1, x1) as f64;
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::from_raw(out_h, out_w, data)
}

/// Nearest-neighbor resize for binary masks; output stays in `{0, 1}` and
/// resizing to the input size is the identity.
pub fn resize_binary(img: &BinaryImage, out_h: usize, out_w: usize) -> BinaryImage {
    assert!(out_h >= 1 && out_w >= 1);
    let mut data = Vec::with_capacity(out_h * out_w);
    for i in 0..out_h {
        let y = src_coord(i, out_h, img.height()).round() as usize;
        for j in 0..out_w {
            let x = src_coord(j, out_w, img.width()).round() as usize;
            data.push(img.get(y.min(img.height() - 1), x.min(img.width() - 1)));
        }
    }
    BinaryImage::from_raw(out_h, out_w, data)
}
