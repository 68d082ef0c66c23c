//! Shell ribbon isolation and the functional 1D mapping.

use super::{ShellError, ShellSet, SHELL_WIDTH};
use crate::raster::{morph_open, remove_small_holes, skeletonize, BinaryImage};

/// Default cap (in pixels) for hole filling during pruning.
pub const DEFAULT_HOLE_AREA: usize = 64;

/// Result of the pruning step: the cleaned mask that feeds shell extraction
/// and its skeleton, kept for export and inspection.
pub struct PruneOutput {
    pub skeleton: BinaryImage,
    pub mask: BinaryImage,
}

/// Morphological pruning: opening, hole removal, and skeletonization of the
/// cleaned mask.
pub fn prune(img: &BinaryImage, hole_area: usize) -> PruneOutput {
    let mask = cleaned_mask(img, hole_area);
    let skeleton = skeletonize(&mask);
    PruneOutput { skeleton, mask }
}

/// The cleanup step shared by the whole pipeline: opening then hole
/// filling. Opening erases degenerate strokes (single-pixel lines)
/// entirely; cleanup must not delete the whole signature, so when it does,
/// the hole-filled original is used instead.
pub fn cleaned_mask(img: &BinaryImage, hole_area: usize) -> BinaryImage {
    let cleaned = remove_small_holes(&morph_open(img), hole_area);
    if cleaned.is_empty_mask() && !img.is_empty_mask() {
        remove_small_holes(img, hole_area)
    } else {
        cleaned
    }
}

/// Superior ribbon: per column, the contiguous run of foreground starting at
/// the topmost ink pixel and stopping at the first background pixel.
pub fn shell_s_binary(img: &BinaryImage) -> BinaryImage {
    let (h, w) = (img.height(), img.width());
    let mut out = BinaryImage::zeros(h, w);
    for c in 0..w {
        let Some(top) = (0..h).find(|&r| img.get(r, c) == 1) else {
            continue;
        };
        let mut r = top;
        while r < h && img.get(r, c) == 1 {
            out.set(r, c, 1);
            r += 1;
        }
    }
    out
}

/// Inferior ribbon: mirror of [`shell_s_binary`], the run rising from the
/// bottommost ink pixel. Columns are independent, so the scan order carries
/// no meaning.
pub fn shell_i_binary(img: &BinaryImage) -> BinaryImage {
    let (h, w) = (img.height(), img.width());
    let mut out = BinaryImage::zeros(h, w);
    for c in (0..w).rev() {
        let Some(bottom) = (0..h).rev().find(|&r| img.get(r, c) == 1) else {
            continue;
        };
        let mut r = bottom as isize;
        while r >= 0 && img.get(r as usize, c) == 1 {
            out.set(r as usize, c, 1);
            r -= 1;
        }
    }
    out
}

/// Residual ink: `img AND NOT(sup OR inf)`.
pub fn residual_mask(
    img: &BinaryImage,
    sup: &BinaryImage,
    inf: &BinaryImage,
) -> Result<BinaryImage, ShellError> {
    for other in [sup, inf] {
        if other.height() != img.height() || other.width() != img.width() {
            return Err(ShellError::DimensionMismatch(
                img.height(),
                img.width(),
                other.height(),
                other.width(),
            ));
        }
    }
    let data = img
        .data()
        .iter()
        .zip(sup.data().iter().zip(inf.data()))
        .map(|(&m, (&s, &i))| m & !(s | i) & 1)
        .collect();
    Ok(BinaryImage::from_raw(img.height(), img.width(), data))
}

/// Maps a binary shell image to 1D contour functions.
///
/// The image is flipped vertically first, so row index 0 is the image
/// bottom. Per column, `shell_s` is the bottommost foreground index of the
/// flipped image (the visual top) and `shell_i` the topmost (the visual
/// bottom). Columns without foreground hold the fill value 0 with
/// `valid == false`.
pub fn img_to_shell_func(img: &BinaryImage) -> (Vec<u16>, Vec<u16>, Vec<bool>) {
    let (h, w) = (img.height(), img.width());
    let mut shell_s = vec![0u16; w];
    let mut shell_i = vec![0u16; w];
    let mut valid = vec![false; w];
    for c in 0..w {
        // In the flipped frame, raster row r lands at h-1-r; scanning raster
        // rows bottom-up yields flipped rows in increasing order.
        let mut top_flipped: Option<usize> = None;
        let mut bottom_flipped: Option<usize> = None;
        for r in 0..h {
            if img.get(r, c) == 1 {
                let flipped = h - 1 - r;
                bottom_flipped = bottom_flipped.max(Some(flipped));
                top_flipped = Some(match top_flipped {
                    Some(t) => t.min(flipped),
                    None => flipped,
                });
            }
        }
        if let (Some(t), Some(b)) = (top_flipped, bottom_flipped) {
            shell_i[c] = t as u16;
            shell_s[c] = b as u16;
            valid[c] = true;
        }
    }
    (shell_s, shell_i, valid)
}

/// Ribbon isolation, residual, and the three functional mappings on an
/// already-cleaned mask.
pub fn extract_shells_pruned(cleaned: &BinaryImage) -> Result<ShellSet, ShellError> {
    if cleaned.is_empty_mask() {
        return Err(ShellError::NoInk);
    }
    let sup_bin = shell_s_binary(cleaned);
    let inf_bin = shell_i_binary(cleaned);
    let res_bin = residual_mask(cleaned, &sup_bin, &inf_bin)?;

    let (s1, i1, v_sup) = img_to_shell_func(&sup_bin);
    let (s2, i2, v_inf) = img_to_shell_func(&inf_bin);
    let (rs, ri, v_res) = img_to_shell_func(&res_bin);
    Ok(ShellSet::new(
        cleaned.width(),
        [s1, i1, s2, i2, rs, ri],
        [v_sup.clone(), v_sup, v_inf.clone(), v_inf, v_res.clone(), v_res],
    ))
}

/// Full shell extraction on an arbitrary-size mask: pruning, ribbon
/// isolation, residual, and the three functional mappings.
pub fn extract_shells_any(mask: &BinaryImage, hole_area: usize) -> Result<ShellSet, ShellError> {
    extract_shells_pruned(&cleaned_mask(mask, hole_area))
}

/// Shell extraction at the pipeline's fixed 512x512 resolution.
pub fn extract_shells(mask: &BinaryImage) -> Result<ShellSet, ShellError> {
    if mask.height() != SHELL_WIDTH || mask.width() != SHELL_WIDTH {
        return Err(ShellError::WrongSize {
            expected: SHELL_WIDTH,
            got_h: mask.height(),
            got_w: mask.width(),
        });
    }
    extract_shells_any(mask, DEFAULT_HOLE_AREA)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column_mask(h: usize, fg_rows: &[usize]) -> BinaryImage {
        let mut img = BinaryImage::zeros(h, 3);
        for &r in fg_rows {
            img.set(r, 1, 1);
        }
        img
    }

    #[test]
    fn superior_ribbon_keeps_top_run_only() {
        let img = column_mask(16, &[2, 3, 4, 7, 8]);
        let sup = shell_s_binary(&img);
        for r in 0..16 {
            assert_eq!(sup.get(r, 1), u8::from([2, 3, 4].contains(&r)), "row {r}");
        }
    }

    #[test]
    fn superior_ribbon_of_full_column_is_full() {
        let img = column_mask(8, &(0..8).collect::<Vec<_>>());
        assert_eq!(shell_s_binary(&img), img);
    }

    #[test]
    fn superior_ribbon_of_empty_is_empty() {
        assert!(shell_s_binary(&BinaryImage::zeros(8, 8)).is_empty_mask());
    }

    #[test]
    fn inferior_ribbon_keeps_bottom_run_only() {
        let img = column_mask(16, &[2, 3, 4, 7, 8]);
        let inf = shell_i_binary(&img);
        for r in 0..16 {
            assert_eq!(inf.get(r, 1), u8::from([7, 8].contains(&r)), "row {r}");
        }
    }

    #[test]
    fn inferior_ribbon_of_full_column_is_full() {
        let img = column_mask(8, &(0..8).collect::<Vec<_>>());
        assert_eq!(shell_i_binary(&img), img);
    }

    #[test]
    fn residual_is_set_difference() {
        let img = column_mask(16, &[2, 3, 4, 7, 8, 12, 13]);
        let sup = shell_s_binary(&img);
        let inf = shell_i_binary(&img);
        let res = residual_mask(&img, &sup, &inf).unwrap();
        for r in 0..16 {
            assert_eq!(res.get(r, 1), u8::from([7, 8].contains(&r)), "row {r}");
        }
    }

    #[test]
    fn residual_when_ribbons_cover_everything_is_empty() {
        let img = column_mask(16, &[3, 4, 9]);
        let sup = shell_s_binary(&img);
        let inf = shell_i_binary(&img);
        let res = residual_mask(&img, &sup, &inf).unwrap();
        assert!(res.is_empty_mask());
    }

    #[test]
    fn residual_with_empty_ribbons_is_input() {
        let img = column_mask(16, &[3, 4, 9]);
        let empty = BinaryImage::zeros(16, 3);
        assert_eq!(residual_mask(&img, &empty, &empty).unwrap(), img);
    }

    #[test]
    fn residual_rejects_mismatched_dims() {
        let img = BinaryImage::zeros(4, 4);
        let other = BinaryImage::zeros(5, 4);
        assert!(matches!(
            residual_mask(&img, &other, &img),
            Err(ShellError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn shell_func_flip_arithmetic_single_pixel() {
        let mut img = BinaryImage::zeros(512, 512);
        img.set(100, 37, 1);
        let (s, i, valid) = img_to_shell_func(&img);
        assert_eq!(s[37], 511 - 100);
        assert_eq!(i[37], 511 - 100);
        assert!(valid[37]);
        assert!(!valid[0]);
        assert_eq!(s[0], 0);
    }

    #[test]
    fn shell_func_two_runs_takes_extremes_after_flip() {
        let mut img = BinaryImage::zeros(512, 1);
        for r in [2, 3, 4, 7, 8] {
            img.set(r, 0, 1);
        }
        let (s, i, valid) = img_to_shell_func(&img);
        assert!(valid[0]);
        assert_eq!(i[0], 511 - 8);
        assert_eq!(s[0], 511 - 2);
    }

    #[test]
    fn single_line_mask_degenerates_to_equal_contours() {
        let mut mask = BinaryImage::zeros(SHELL_WIDTH, SHELL_WIDTH);
        let row = 200;
        for c in 0..SHELL_WIDTH {
            mask.set(row, c, 1);
        }
        let shells = extract_shells(&mask).unwrap();
        let expected = (SHELL_WIDTH - 1 - row) as u16;
        for s in 0..4 {
            for c in 2..SHELL_WIDTH - 2 {
                assert!(shells.valid(s)[c], "shell {s} col {c}");
                assert_eq!(shells.rows(s)[c], expected, "shell {s} col {c}");
            }
        }
        // Residual contours are invalid everywhere.
        for c in 0..SHELL_WIDTH {
            assert!(!shells.valid(4)[c]);
            assert!(!shells.valid(5)[c]);
        }
    }

    #[test]
    fn two_disjoint_bars_split_into_superior_and_inferior() {
        // Bars thick enough to survive opening.
        let mut mask = BinaryImage::zeros(SHELL_WIDTH, SHELL_WIDTH);
        for r in 100..104 {
            for c in 0..SHELL_WIDTH {
                mask.set(r, c, 1);
            }
        }
        for r in 300..304 {
            for c in 0..SHELL_WIDTH {
                mask.set(r, c, 1);
            }
        }
        let shells = extract_shells(&mask).unwrap();
        let c = SHELL_WIDTH / 2;
        // Superior ribbon = upper bar: S1 is its visual top.
        assert_eq!(shells.rows(0)[c], (SHELL_WIDTH - 1 - 100) as u16);
        assert_eq!(shells.rows(1)[c], (SHELL_WIDTH - 1 - 103) as u16);
        // Inferior ribbon = lower bar.
        assert_eq!(shells.rows(2)[c], (SHELL_WIDTH - 1 - 300) as u16);
        assert_eq!(shells.rows(3)[c], (SHELL_WIDTH - 1 - 303) as u16);
        // Nothing left over.
        assert!(!shells.valid(4)[c]);
    }

    #[test]
    fn empty_mask_is_no_ink() {
        let mask = BinaryImage::zeros(SHELL_WIDTH, SHELL_WIDTH);
        assert!(matches!(extract_shells(&mask), Err(ShellError::NoInk)));
    }

    #[test]
    fn wrong_size_is_rejected() {
        let mask = BinaryImage::zeros(64, 64);
        assert!(matches!(extract_shells(&mask), Err(ShellError::WrongSize { .. })));
    }

    #[test]
    fn superior_contour_dominates_inner_wherever_valid() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(17);
        for _ in 0..50 {
            let data: Vec<u8> = (0..32 * 32).map(|_| u8::from(rng.random::<f64>() < 0.35)).collect();
            let mask = BinaryImage::from_raw(32, 32, data);
            let Ok(shells) = extract_shells_any(&mask, 4) else {
                continue;
            };
            for c in 0..32 {
                if shells.valid(0)[c] {
                    assert!(shells.rows(0)[c] >= shells.rows(1)[c]);
                }
                if shells.valid(2)[c] {
                    assert!(shells.rows(2)[c] >= shells.rows(3)[c]);
                }
            }
        }
    }

    #[test]
    fn ribbons_partition_the_pruned_mask() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(23);
        for _ in 0..30 {
            let data: Vec<u8> = (0..32 * 32).map(|_| u8::from(rng.random::<f64>() < 0.45)).collect();
            let mask = BinaryImage::from_raw(32, 32, data);
            let cleaned = cleaned_mask(&mask, 4);
            let sup = shell_s_binary(&cleaned);
            let inf = shell_i_binary(&cleaned);
            let res = residual_mask(&cleaned, &sup, &inf).unwrap();
            for idx in 0..32 * 32 {
                let m = cleaned.data()[idx];
                let union = sup.data()[idx] | inf.data()[idx] | res.data()[idx];
                // The three parts reconstruct the mask exactly...
                assert_eq!(union, m);
                // ...and the residual never overlaps a ribbon.
                assert_eq!(res.data()[idx] & (sup.data()[idx] | inf.data()[idx]), 0);
            }
        }
    }
}
