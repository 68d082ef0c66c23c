//! The signature pre-processing chain: binarize, locate, crop, resize.

use super::{bounding_box, crop, otsu_binarize, resize_gray, BinaryImage, GrayImage, RasterError};

/// Fixed output resolution of the pre-processing chain.
pub const PREPROC_SIZE: usize = 512;

/// Runs the full chain on a raw grayscale scan:
/// OTSU -> bounding box -> crop of the original gray -> bilinear resize to
/// 512x512. The returned mask is recomputed with OTSU on the resized gray
/// rather than resampling the binary mask, which would smear its edges.
pub fn preprocess_signature(img: &GrayImage) -> Result<(GrayImage, BinaryImage), RasterError> {
    // A constant page carries no ink trace at all.
    let (mask, _) = match otsu_binarize(img) {
        Ok(out) => out,
        Err(RasterError::ConstantImage) => return Err(RasterError::NoInk),
        Err(e) => return Err(e),
    };
    if mask.is_empty_mask() {
        return Err(RasterError::NoInk);
    }
    let bbox = bounding_box(&mask)?;
    let cropped = crop(img, &bbox)?;
    let resized = resize_gray(&cropped, PREPROC_SIZE, PREPROC_SIZE);
    let mask = match otsu_binarize(&resized) {
        Ok((mask, _)) => mask,
        // The crop is tight around ink; a constant crop means solid ink.
        Err(RasterError::ConstantImage) => {
            BinaryImage::from_raw(PREPROC_SIZE, PREPROC_SIZE, vec![1; PREPROC_SIZE * PREPROC_SIZE])
        }
        Err(e) => return Err(e),
    };
    Ok((resized, mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn already_cropped_bimodal_image_is_unchanged() {
        // Dark frame spanning the full canvas: the bounding box covers
        // everything, so crop + resize is the identity.
        let mut img = GrayImage::filled(PREPROC_SIZE, PREPROC_SIZE, 230);
        for r in 0..PREPROC_SIZE {
            img.set(r, 0, 20);
            img.set(r, PREPROC_SIZE - 1, 20);
        }
        for c in 0..PREPROC_SIZE {
            img.set(0, c, 20);
            img.set(PREPROC_SIZE - 1, c, 20);
        }
        let (gray, mask) = preprocess_signature(&img).unwrap();
        assert_eq!(gray, img);
        for r in 0..PREPROC_SIZE {
            for c in 0..PREPROC_SIZE {
                assert_eq!(mask.get(r, c), u8::from(img.get(r, c) == 20));
            }
        }
    }

    #[test]
    fn quadrant_ink_spans_full_width_after_crop() {
        // Ink only in the top-left quadrant; after crop + resize the
        // foreground must span the full 512 output width.
        let mut img = GrayImage::filled(256, 256, 240);
        for r in 10..60 {
            for c in 10..100 {
                img.set(r, c, 30);
            }
        }
        let (_, mask) = preprocess_signature(&img).unwrap();
        let first_col_has_ink = (0..PREPROC_SIZE).any(|r| mask.get(r, 0) == 1);
        let last_col_has_ink = (0..PREPROC_SIZE).any(|r| mask.get(r, PREPROC_SIZE - 1) == 1);
        assert!(first_col_has_ink && last_col_has_ink);
    }

    #[test]
    fn blank_page_is_rejected() {
        let img = GrayImage::filled(64, 64, 255);
        assert!(matches!(preprocess_signature(&img), Err(RasterError::NoInk)));
    }
}
