//! Binary morphology: opening, hole removal, and Zhang-Suen thinning.

use super::BinaryImage;

/// 3x3 cross structuring element offsets (center, N, S, W, E).
const CROSS: [(isize, isize); 5] = [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)];

fn erode_cross(img: &BinaryImage) -> BinaryImage {
    let (h, w) = (img.height(), img.width());
    let mut out = BinaryImage::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            // Pixels outside the image count as background, so border pixels
            // only survive erosion when the element fits inside the mask.
            let keep = CROSS.iter().all(|&(dr, dc)| {
                let rr = r as isize + dr;
                let cc = c as isize + dc;
                rr >= 0
                    && cc >= 0
                    && (rr as usize) < h
                    && (cc as usize) < w
                    && img.get(rr as usize, cc as usize) == 1
            });
            if keep {
                out.set(r, c, 1);
            }
        }
    }
    out
}

fn dilate_cross(img: &BinaryImage) -> BinaryImage {
    let (h, w) = (img.height(), img.width());
    let mut out = BinaryImage::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            if img.get(r, c) == 0 {
                continue;
            }
            for &(dr, dc) in &CROSS {
                let rr = r as isize + dr;
                let cc = c as isize + dc;
                if rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < w {
                    out.set(rr as usize, cc as usize, 1);
                }
            }
        }
    }
    out
}

/// Morphological opening (erosion then dilation) with a 3x3 cross element.
pub fn morph_open(img: &BinaryImage) -> BinaryImage {
    dilate_cross(&erode_cross(img))
}

/// Fills background connected components (4-connectivity) that do not touch
/// the image border and whose area is at most `max_area`.
pub fn remove_small_holes(img: &BinaryImage, max_area: usize) -> BinaryImage {
    let (h, w) = (img.height(), img.width());
    let mut out = img.clone();
    let mut visited = vec![false; h * w];
    let mut component = Vec::new();
    let mut stack = Vec::new();

    for start in 0..h * w {
        if visited[start] || img.data()[start] != 0 {
            continue;
        }
        component.clear();
        stack.clear();
        stack.push(start);
        visited[start] = true;
        let mut touches_border = false;
        while let Some(idx) = stack.pop() {
            component.push(idx);
            let (r, c) = (idx / w, idx % w);
            if r == 0 || c == 0 || r == h - 1 || c == w - 1 {
                touches_border = true;
            }
            let mut push = |rr: usize, cc: usize| {
                let nidx = rr * w + cc;
                if !visited[nidx] && img.data()[nidx] == 0 {
                    visited[nidx] = true;
                    stack.push(nidx);
                }
            };
            if r > 0 {
                push(r - 1, c);
            }
            if r + 1 < h {
                push(r + 1, c);
            }
            if c > 0 {
                push(r, c - 1);
            }
            if c + 1 < w {
                push(r, c + 1);
            }
        }
        if !touches_border && component.len() <= max_area {
            for &idx in &component {
                out.set(idx / w, idx % w, 1);
            }
        }
    }
    out
}

/// Number of foreground neighbors of `(r, c)` in 8-connectivity.
fn neighbors(img: &BinaryImage, r: usize, c: usize) -> [u8; 8] {
    let (h, w) = (img.height() as isize, img.width() as isize);
    // Clockwise from north: p2, p3, p4, p5, p6, p7, p8, p9.
    let offsets = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)];
    let mut n = [0u8; 8];
    for (k, &(dr, dc)) in offsets.iter().enumerate() {
        let rr = r as isize + dr;
        let cc = c as isize + dc;
        if rr >= 0 && cc >= 0 && rr < h && cc < w {
            n[k] = img.get(rr as usize, cc as usize);
        }
    }
    n
}

/// Zhang-Suen thinning. The output skeleton is a subset of the input
/// foreground and the operation is idempotent on its own output.
pub fn skeletonize(img: &BinaryImage) -> BinaryImage {
    let mut cur = img.clone();
    let (h, w) = (cur.height(), cur.width());
    let mut to_clear: Vec<usize> = Vec::new();
    loop {
        let mut changed = false;
        for step in 0..2 {
            to_clear.clear();
            for r in 0..h {
                for c in 0..w {
                    if cur.get(r, c) != 1 {
                        continue;
                    }
                    let n = neighbors(&cur, r, c);
                    let b: u8 = n.iter().sum();
                    if !(2..=6).contains(&b) {
                        continue;
                    }
                    // A(p): 0->1 transitions in the circular sequence p2..p9.
                    let a = (0..8).filter(|&k| n[k] == 0 && n[(k + 1) % 8] == 1).count();
                    if a != 1 {
                        continue;
                    }
                    let (p2, p4, p6, p8) = (n[0], n[2], n[4], n[6]);
                    let ok = if step == 0 {
                        p2 * p4 * p6 == 0 && p4 * p6 * p8 == 0
                    } else {
                        p2 * p4 * p8 == 0 && p2 * p6 * p8 == 0
                    };
                    if ok {
                        to_clear.push(r * w + c);
                    }
                }
            }
            if !to_clear.is_empty() {
                changed = true;
                for &idx in &to_clear {
                    cur.set(idx / w, idx % w, 0);
                }
            }
        }
        if !changed {
            return cur;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_rows(rows: &[&[u8]]) -> BinaryImage {
        let h = rows.len();
        let w = rows[0].len();
        BinaryImage::from_raw(h, w, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    #[test]
    fn opening_removes_isolated_pixel() {
        let mut img = BinaryImage::zeros(5, 5);
        img.set(2, 2, 1);
        assert!(morph_open(&img).is_empty_mask());
    }

    #[test]
    fn opening_of_empty_is_empty() {
        assert!(morph_open(&BinaryImage::zeros(4, 4)).is_empty_mask());
    }

    #[test]
    fn opening_solid_block_matches_manual_morphology() {
        // 4x4 solid block at rows/cols 2..=5 inside an 8x8 field.
        let mut img = BinaryImage::zeros(8, 8);
        for r in 2..6 {
            for c in 2..6 {
                img.set(r, c, 1);
            }
        }
        // Manual oracle: erosion keeps pixels whose full cross lies in the
        // block (the inner 2x2), dilation grows that back by one cross step.
        let mut eroded = BinaryImage::zeros(8, 8);
        for r in 3..5 {
            for c in 3..5 {
                eroded.set(r, c, 1);
            }
        }
        let mut expected = BinaryImage::zeros(8, 8);
        for r in 3..5 {
            for c in 3..5 {
                for &(dr, dc) in &CROSS {
                    expected.set((r as isize + dr) as usize, (c as isize + dc) as usize, 1);
                }
            }
        }
        assert_eq!(erode_cross(&img), eroded);
        assert_eq!(morph_open(&img), expected);
    }

    #[test]
    fn opening_is_anti_extensive() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(5);
        for _ in 0..20 {
            let data: Vec<u8> = (0..144).map(|_| u8::from(rng.random::<f64>() < 0.6)).collect();
            let img = BinaryImage::from_raw(12, 12, data);
            let opened = morph_open(&img);
            for i in 0..144 {
                assert!(opened.data()[i] <= img.data()[i]);
            }
        }
    }

    #[test]
    fn interior_hole_is_filled() {
        let mut img = BinaryImage::zeros(5, 5);
        for r in 0..5 {
            for c in 0..5 {
                img.set(r, c, 1);
            }
        }
        img.set(2, 2, 0);
        let out = remove_small_holes(&img, 4);
        assert_eq!(out.count_ones(), 25);
    }

    #[test]
    fn holes_empty_input_stays_empty() {
        let img = BinaryImage::zeros(4, 4);
        assert!(remove_small_holes(&img, 10).is_empty_mask());
    }

    #[test]
    fn hole_filling_respects_area_cap() {
        // Solid 9x9 block with a 2-pixel hole and a 9-pixel hole; cap 4 fills
        // only the small one. Flood-fill oracle: recount by hand.
        let mut img = BinaryImage::zeros(11, 11);
        for r in 1..10 {
            for c in 1..10 {
                img.set(r, c, 1);
            }
        }
        img.set(2, 2, 0);
        img.set(2, 3, 0);
        for r in 5..8 {
            for c in 5..8 {
                img.set(r, c, 0);
            }
        }
        let out = remove_small_holes(&img, 4);
        assert_eq!(out.get(2, 2), 1);
        assert_eq!(out.get(2, 3), 1);
        for r in 5..8 {
            for c in 5..8 {
                assert_eq!(out.get(r, c), 0);
            }
        }
    }

    #[test]
    fn hole_filling_is_extensive() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(9);
        for _ in 0..20 {
            let data: Vec<u8> = (0..144).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
            let img = BinaryImage::from_raw(12, 12, data);
            let filled = remove_small_holes(&img, 6);
            for i in 0..144 {
                assert!(filled.data()[i] >= img.data()[i]);
            }
        }
    }

    #[test]
    fn skeleton_of_empty_is_empty() {
        assert!(skeletonize(&BinaryImage::zeros(6, 6)).is_empty_mask());
    }

    #[test]
    fn skeleton_of_single_pixel_is_single_pixel() {
        let mut img = BinaryImage::zeros(5, 5);
        img.set(2, 2, 1);
        assert_eq!(skeletonize(&img), img);
    }

    #[test]
    fn thick_bar_thins_to_single_line() {
        let img = from_rows(&[
            &[0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
            &[0, 1, 1, 1, 1, 1, 1, 1, 1, 0],
            &[0, 1, 1, 1, 1, 1, 1, 1, 1, 0],
            &[0, 1, 1, 1, 1, 1, 1, 1, 1, 0],
            &[0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
        ]);
        let skel = skeletonize(&img);
        // Every column of the bar keeps at most one pixel.
        for c in 1..9 {
            let count: u8 = (0..5).map(|r| skel.get(r, c)).sum();
            assert!(count <= 1, "column {c} kept {count} pixels");
        }
        assert!(!skel.is_empty_mask());
    }

    #[test]
    fn skeletonize_is_idempotent_and_subset() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(21);
        for _ in 0..10 {
            let data: Vec<u8> = (0..400).map(|_| u8::from(rng.random::<f64>() < 0.55)).collect();
            let img = BinaryImage::from_raw(20, 20, data);
            let once = skeletonize(&img);
            for i in 0..400 {
                assert!(once.data()[i] <= img.data()[i]);
            }
            assert_eq!(skeletonize(&once), once);
        }
    }
}
