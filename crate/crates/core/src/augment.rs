//! Training-time image augmentations for the raw-image path.
//!
//! The train pipeline applies, in order: random horizontal flip, random
//! affine (translate / rotate / shear / scale about the image center),
//! random sharpen, random brightness/contrast, then normalization to zero
//! mean and unit variance. Eval applies the resize guard and normalization
//! only. Everything is a pure function of the supplied RNG state.

use crate::raster::{resize_gray, GrayImage};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Real-valued image produced by the augmentation pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub flip_p: f64,
    pub affine_p: f64,
    /// Maximum translation as a fraction of the image size.
    pub translate_max: f64,
    /// Shear range in degrees, symmetric about zero.
    pub shear_deg: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Rotation range in degrees, symmetric about zero (the affine step's
    /// rotation component; an interpretation knob, see module docs).
    pub rotate_deg: f64,
    pub sharpen_p: f64,
    pub brightness_contrast_limit: f64,
    pub brightness_contrast_p: f64,
    /// Normalize to mean 0 / std 1 (applied in both train and eval).
    pub normalize: bool,
    /// Optional 1D jitter on shell inputs; off by default (the published
    /// transform table augments images only).
    pub shell_jitter: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            flip_p: 0.5,
            affine_p: 0.5,
            translate_max: 0.05,
            shear_deg: 2.0,
            scale_min: 0.7,
            scale_max: 1.3,
            rotate_deg: 5.0,
            sharpen_p: 0.5,
            brightness_contrast_limit: 0.01,
            brightness_contrast_p: 0.5,
            normalize: true,
            shell_jitter: 0.0,
        }
    }
}

pub const AUG_SIZE: usize = crate::raster::PREPROC_SIZE;

/// Horizontal mirror. Applying it twice recovers the input exactly.
pub fn flip_horizontal(img: &GrayImage) -> GrayImage {
    let (h, w) = (img.height(), img.width());
    let mut data = Vec::with_capacity(h * w);
    for r in 0..h {
        let row = img.row(r);
        data.extend(row.iter().rev().copied());
    }
    GrayImage::from_raw(h, w, data)
}

/// Affine warp about the image center with bilinear sampling; out-of-frame
/// samples read as white background (255).
pub fn affine_warp(
    img: &GrayImage,
    translate: (f64, f64),
    rotate_rad: f64,
    shear_rad: f64,
    scale: f64,
) -> GrayImage {
    let (h, w) = (img.height() as f64, img.width() as f64);
    let (cy, cx) = ((h - 1.0) / 2.0, (w - 1.0) / 2.0);
    // Forward map: translate(center) . rotate . shear . scale. Pixels are
    // pulled through the inverse.
    let (sin, cos) = rotate_rad.sin_cos();
    let tan = shear_rad.tan();
    // M = R * Sh * S  (2x2), then inverse.
    let m00 = scale * (cos + sin * 0.0);
    let m01 = scale * (cos * tan - sin);
    let m10 = scale * (sin + cos * 0.0);
    let m11 = scale * (sin * tan + cos);
    let det = m00 * m11 - m01 * m10;
    let (i00, i01, i10, i11) = (m11 / det, -m01 / det, -m10 / det, m00 / det);
    let (tx, ty) = (translate.0 * w, translate.1 * h);

    let mut data = Vec::with_capacity(img.height() * img.width());
    for r in 0..img.height() {
        for c in 0..img.width() {
            let dx = c as f64 - cx - tx;
            let dy = r as f64 - cy - ty;
            let sx = i00 * dx + i01 * dy + cx;
            let sy = i10 * dx + i11 * dy + cy;
            data.push(bilinear_or_white(img, sy, sx));
        }
    }
    GrayImage::from_raw(img.height(), img.width(), data)
}

fn bilinear_or_white(img: &GrayImage, y: f64, x: f64) -> u8 {
    let (h, w) = (img.height() as f64, img.width() as f64);
    if y < 0.0 || x < 0.0 || y > h - 1.0 || x > w - 1.0 {
        return 255;
    }
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(img.height() - 1), (x0 + 1).min(img.width() - 1));
    let (fy, fx) = (y - y0 as f64, x - x0 as f64);
    let v = (1.0 - fy) * (1.0 - fx) * img.get(y0, x0) as f64
        + (1.0 - fy) * fx * img.get(y0, x1) as f64
        + fy * (1.0 - fx) * img.get(y1, x0) as f64
        + fy * fx * img.get(y1, x1) as f64;
    v.round().clamp(0.0, 255.0) as u8
}

/// 3x3 unsharp kernel, strength 1.
fn sharpen(img: &GrayImage) -> GrayImage {
    let (h, w) = (img.height() as isize, img.width() as isize);
    let mut data = Vec::with_capacity(img.height() * img.width());
    for r in 0..h {
        for c in 0..w {
            let at = |rr: isize, cc: isize| -> f64 {
                let rr = rr.clamp(0, h - 1) as usize;
                let cc = cc.clamp(0, w - 1) as usize;
                img.get(rr, cc) as f64
            };
            let v = 5.0 * at(r, c) - at(r - 1, c) - at(r + 1, c) - at(r, c - 1) - at(r, c + 1);
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::from_raw(img.height(), img.width(), data)
}

fn brightness_contrast(img: &GrayImage, brightness: f64, contrast: f64) -> GrayImage {
    let data = img
        .data()
        .iter()
        .map(|&v| ((v as f64 - 127.5) * (1.0 + contrast) + 127.5 + brightness * 255.0)
            .round()
            .clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::from_raw(img.height(), img.width(), data)
}

/// Zero-mean unit-variance normalization; a constant image maps to zeros
/// (the standard deviation is clamped at 1e-6).
pub fn normalize_field(img: &GrayImage) -> RealField {
    let n = img.data().len() as f64;
    let mean = img.data().iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = img.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-6);
    RealField {
        height: img.height(),
        width: img.width(),
        data: img.data().iter().map(|&v| (v as f64 - mean) / std).collect(),
    }
}

fn resize_guard(img: &GrayImage) -> GrayImage {
    if img.height() == AUG_SIZE && img.width() == AUG_SIZE {
        img.clone()
    } else {
        resize_gray(img, AUG_SIZE, AUG_SIZE)
    }
}

/// Full training-time augmentation. Deterministic given `rng` state.
pub fn augment_train<R: Rng>(img: &GrayImage, cfg: &AugmentConfig, rng: &mut R) -> RealField {
    let mut img = resize_guard(img);
    if rng.random::<f64>() < cfg.flip_p {
        img = flip_horizontal(&img);
    }
    if rng.random::<f64>() < cfg.affine_p {
        let tx = rng.random_range(-cfg.translate_max..=cfg.translate_max);
        let ty = rng.random_range(-cfg.translate_max..=cfg.translate_max);
        let rot = rng.random_range(-cfg.rotate_deg..=cfg.rotate_deg).to_radians();
        let shear = rng.random_range(-cfg.shear_deg..=cfg.shear_deg).to_radians();
        let scale = rng.random_range(cfg.scale_min..=cfg.scale_max);
        img = affine_warp(&img, (tx, ty), rot, shear, scale);
    }
    if rng.random::<f64>() < cfg.sharpen_p {
        img = sharpen(&img);
    }
    if rng.random::<f64>() < cfg.brightness_contrast_p {
        let limit = cfg.brightness_contrast_limit;
        let brightness = rng.random_range(-limit..=limit);
        let contrast = rng.random_range(-limit..=limit);
        img = brightness_contrast(&img, brightness, contrast);
    }
    if cfg.normalize {
        normalize_field(&img)
    } else {
        RealField {
            height: img.height(),
            width: img.width(),
            data: img.data().iter().map(|&v| v as f64 / 255.0).collect(),
        }
    }
}

/// Evaluation-time transform: resize guard + normalization, no randomness.
pub fn augment_eval(img: &GrayImage, cfg: &AugmentConfig) -> RealField {
    let img = resize_guard(img);
    if cfg.normalize {
        normalize_field(&img)
    } else {
        RealField {
            height: img.height(),
            width: img.width(),
            data: img.data().iter().map(|&v| v as f64 / 255.0).collect(),
        }
    }
}
