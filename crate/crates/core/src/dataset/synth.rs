//! Synthetic signature generator for desk-scale experiments.
//!
//! Each writer is a seeded set of stroke parameters (waveform amplitudes,
//! frequencies, phases, baseline, slant, pen width). Genuine samples jitter
//! those parameters slightly; forged samples imitate the target writer from
//! another writer's hand: the target parameters blended toward the imitator
//! and jittered much harder. Output images are dark strokes on white.

use super::{DataError, DatasetTag, Kind, SignatureRecord};
use crate::raster::{save_gray_png, GrayImage};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::path::Path;

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub writers: usize,
    pub genuine_per_writer: usize,
    pub forged_per_writer: usize,
    pub canvas: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { writers: 8, genuine_per_writer: 12, forged_per_writer: 12, canvas: 512, seed: 0 }
    }
}

const HARMONICS: usize = 3;

#[derive(Debug, Clone)]
struct StrokeParams {
    baseline: f64,
    amp: [f64; HARMONICS],
    freq: [f64; HARMONICS],
    phase: [f64; HARMONICS],
    x_start: f64,
    x_end: f64,
}

#[derive(Debug, Clone)]
struct WriterStyle {
    strokes: Vec<StrokeParams>,
    slant: f64,
    pen_width: f64,
    ink: f64,
}

fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 over a composed key.
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn writer_style(seed: u64, writer: usize) -> WriterStyle {
    let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(seed, 1, writer as u64));
    let n_strokes = rng.random_range(2..=3);
    let mut strokes = Vec::new();
    for s in 0..n_strokes {
        let band = 0.25 + 0.5 * (s as f64 + 0.5) / n_strokes as f64;
        strokes.push(StrokeParams {
            baseline: band + rng.random_range(-0.06..0.06),
            amp: [
                rng.random_range(0.05..0.16),
                rng.random_range(0.02..0.08),
                rng.random_range(0.01..0.04),
            ],
            freq: [
                rng.random_range(1.5..4.0),
                rng.random_range(4.0..9.0),
                rng.random_range(9.0..16.0),
            ],
            phase: [
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
            ],
            x_start: rng.random_range(0.06..0.14),
            x_end: rng.random_range(0.86..0.94),
        });
    }
    WriterStyle {
        strokes,
        slant: rng.random_range(-0.12..0.12),
        pen_width: rng.random_range(2.2..3.4),
        ink: rng.random_range(30.0..70.0),
    }
}

/// Perturb a style in place. `scale` controls deviation: small for genuine
/// re-signings, large for forgeries.
fn jitter_style<R: Rng>(style: &mut WriterStyle, scale: f64, rng: &mut R) {
    for s in &mut style.strokes {
        s.baseline += rng.random_range(-0.01..0.01) * scale;
        for h in 0..HARMONICS {
            s.amp[h] *= 1.0 + rng.random_range(-0.05..0.05) * scale;
            s.freq[h] *= 1.0 + rng.random_range(-0.02..0.02) * scale;
            s.phase[h] += rng.random_range(-0.06..0.06) * scale;
        }
        s.x_start += rng.random_range(-0.01..0.01) * scale;
        s.x_end += rng.random_range(-0.01..0.01) * scale;
    }
    style.slant += rng.random_range(-0.015..0.015) * scale;
    style.pen_width = (style.pen_width + rng.random_range(-0.12..0.12) * scale).max(1.2);
    style.ink = (style.ink + rng.random_range(-4.0..4.0) * scale).clamp(10.0, 110.0);
}

/// Blend the target style toward an imitator's hand.
fn imitate(target: &WriterStyle, imitator: &WriterStyle, alpha: f64) -> WriterStyle {
    let mut out = target.clone();
    for (s, imit) in out.strokes.iter_mut().zip(imitator.strokes.iter().cycle()) {
        s.baseline = (1.0 - alpha) * s.baseline + alpha * imit.baseline;
        for h in 0..HARMONICS {
            s.amp[h] = (1.0 - alpha) * s.amp[h] + alpha * imit.amp[h];
            s.freq[h] = (1.0 - alpha) * s.freq[h] + alpha * imit.freq[h];
            s.phase[h] = (1.0 - alpha) * s.phase[h] + alpha * imit.phase[h];
        }
    }
    out.slant = (1.0 - alpha) * out.slant + alpha * imitator.slant;
    out.pen_width = (1.0 - alpha) * out.pen_width + alpha * imitator.pen_width;
    out
}

fn render(style: &WriterStyle, canvas: usize) -> GrayImage {
    let mut img = GrayImage::filled(canvas, canvas, 255);
    let size = canvas as f64;
    let radius = style.pen_width * size / 512.0;
    for stroke in &style.strokes {
        let x0 = stroke.x_start.clamp(0.02, 0.4);
        let x1 = stroke.x_end.clamp(0.6, 0.98);
        let steps = ((x1 - x0) * size * 2.0) as usize;
        for t in 0..=steps {
            let xn = x0 + (x1 - x0) * t as f64 / steps as f64;
            let mut yn = stroke.baseline;
            for h in 0..HARMONICS {
                yn += stroke.amp[h] * (stroke.freq[h] * xn * std::f64::consts::TAU + stroke.phase[h]).sin();
            }
            yn += style.slant * (xn - 0.5);
            let cx = xn * size;
            let cy = yn.clamp(0.05, 0.95) * size;
            // Pen pressure varies smoothly along the stroke.
            let ink = (style.ink + 25.0 * (xn * 9.0).sin()).clamp(5.0, 140.0);
            stamp(&mut img, cx, cy, radius, ink as u8);
        }
    }
    img
}

fn stamp(img: &mut GrayImage, cx: f64, cy: f64, radius: f64, ink: u8) {
    let r = radius.ceil() as isize;
    let (h, w) = (img.height() as isize, img.width() as isize);
    for dy in -r..=r {
        for dx in -r..=r {
            let x = cx as isize + dx;
            let y = cy as isize + dy;
            if x < 0 || y < 0 || x >= w || y >= h {
                continue;
            }
            let dist2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            if dist2 <= radius * radius {
                let cur = img.get(y as usize, x as usize);
                img.set(y as usize, x as usize, cur.min(ink));
            }
        }
    }
}

/// Generates the dataset tree under `root` and returns the records
/// (paths relative to `root`).
pub fn synth_generate(root: &Path, cfg: &SynthConfig) -> Result<Vec<SignatureRecord>, DataError> {
    assert!(cfg.writers >= 1 && cfg.genuine_per_writer >= 1 && cfg.forged_per_writer >= 1);
    let styles: Vec<WriterStyle> = (0..cfg.writers).map(|w| writer_style(cfg.seed, w)).collect();
    let mut records = Vec::new();

    for w in 0..cfg.writers {
        let writer_id = format!("{:02}", w + 1);
        let dir = root.join(format!("writer_{writer_id}"));
        std::fs::create_dir_all(&dir)?;

        for n in 0..cfg.genuine_per_writer {
            let mut style = styles[w].clone();
            let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(cfg.seed, 2 + w as u64, n as u64));
            jitter_style(&mut style, 1.0, &mut rng);
            let img = render(&style, cfg.canvas);
            let rel = format!("writer_{writer_id}/genuine_{:02}.png", n + 1);
            save_gray_png(&img, &root.join(&rel))?;
            records.push(SignatureRecord {
                dataset: DatasetTag::Synth,
                writer_id: writer_id.clone(),
                kind: Kind::Genuine,
                path: rel,
            });
        }

        for n in 0..cfg.forged_per_writer {
            let imitator = (w + 1 + n % (cfg.writers.max(2) - 1)) % cfg.writers;
            let imitator = if imitator == w { (w + 1) % cfg.writers.max(2) } else { imitator };
            let mut style = if cfg.writers > 1 {
                imitate(&styles[w], &styles[imitator], 0.35)
            } else {
                styles[w].clone()
            };
            let mut rng =
                ChaCha20Rng::seed_from_u64(mix_seed(cfg.seed, 1000 + w as u64, n as u64));
            jitter_style(&mut style, 5.0, &mut rng);
            let img = render(&style, cfg.canvas);
            let rel = format!("writer_{writer_id}/forged_{:02}.png", n + 1);
            save_gray_png(&img, &root.join(&rel))?;
            records.push(SignatureRecord {
                dataset: DatasetTag::Synth,
                writer_id: writer_id.clone(),
                kind: Kind::Forged,
                path: rel,
            });
        }
    }
    records.sort();
    Ok(records)
}
