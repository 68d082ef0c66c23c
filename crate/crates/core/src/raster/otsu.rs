//! OTSU global thresholding.

use super::{BinaryImage, GrayImage, RasterError};

/// Binarizes a grayscale image with OTSU's method.
///
/// The threshold maximizes the between-class variance over all integer
/// thresholds `0..=255`, with the split `background > t`, `foreground <= t`
/// (signature ink is dark on light paper). Ties are broken toward the lowest
/// maximizing threshold. The comparison runs in exact integer arithmetic so
/// the argmax never depends on floating-point rounding.
pub fn otsu_binarize(img: &GrayImage) -> Result<(BinaryImage, u8), RasterError> {
    let mut hist = [0u64; 256];
    for &v in img.data() {
        hist[v as usize] += 1;
    }

    let total: u64 = img.data().len() as u64;
    let total_sum: u64 = hist
        .iter()
        .enumerate()
        .map(|(v, &n)| v as u64 * n)
        .sum();

    // Between-class variance at threshold t is proportional to
    // (s0*n1 - s1*n0)^2 / (n0*n1) where class 0 is `<= t`. Both the numerator
    // and denominator fit u128 for images up to 512x512, so candidates are
    // compared as exact rationals: a/b > c/d  <=>  a*d > c*b.
    let mut best: Option<(u8, u128, u128)> = None;
    let mut n0: u64 = 0;
    let mut s0: u64 = 0;
    for t in 0u16..=255 {
        n0 += hist[t as usize];
        s0 += t as u64 * hist[t as usize];
        let n1 = total - n0;
        if n0 == 0 {
            continue;
        }
        if n1 == 0 {
            break;
        }
        let s1 = total_sum - s0;
        let diff = (s0 as i128) * (n1 as i128) - (s1 as i128) * (n0 as i128);
        let num = (diff * diff) as u128;
        let den = (n0 as u128) * (n1 as u128);
        let better = match &best {
            None => true,
            Some((_, bn, bd)) => num * bd > *bn * den,
        };
        if better {
            best = Some((t as u8, num, den));
        }
    }

    let (threshold, _, _) = best.ok_or(RasterError::ConstantImage)?;
    let data = img.data().iter().map(|&v| u8::from(v <= threshold)).collect();
    Ok((BinaryImage::from_raw(img.height(), img.width(), data), threshold))
}
