//! Sample loading and batch assembly for training and evaluation.

use super::model::{Arch, BatchInput, INPUT_LEN, PRESSURE_CHANNELS, SHELL_CHANNELS};
use super::MetricError;
use crate::augment::{augment_eval, augment_train, AugmentConfig};
use crate::nn::{Mode, Tensor};
use crate::raster::{load_gray, GrayImage};
use crate::shells::{read_record, PRESSURE_OFFSETS, SHELL_COUNT};
use rand::Rng;
use std::collections::BTreeMap;
use std::path::Path;

/// One signature's loaded input features.
#[derive(Debug, Clone)]
pub enum RawSample {
    /// Shell contours scaled by 1/511 and pressure samples scaled by 1/255.
    Shells { shells: Vec<f64>, pressure: Vec<f64> },
    /// Pre-processed grayscale image (augmented at batch time).
    Image(GrayImage),
}

/// In-memory store of every sample a manifest references, keyed by the
/// manifest's relative path.
#[derive(Debug, Clone)]
pub struct SampleStore {
    samples: BTreeMap<String, RawSample>,
}

/// Maps a signature image path to its shell record directory
/// (`writer_01/genuine_01.png` -> `writer_01/genuine_01`).
pub fn record_dir_for(path: &str) -> String {
    match path.rsplit_once('.') {
        Some((stem, _)) => stem.to_string(),
        None => path.to_string(),
    }
}

impl SampleStore {
    /// Loads every unique path for the given architecture. Shell-based
    /// architectures read record directories; the image path reads
    /// pre-processed PNGs.
    pub fn load<'a>(
        arch: Arch,
        paths: impl IntoIterator<Item = &'a str>,
        data_root: &Path,
    ) -> Result<Self, MetricError> {
        let mut samples = BTreeMap::new();
        for path in paths {
            if samples.contains_key(path) {
                continue;
            }
            let sample = match arch {
                Arch::PsNet | Arch::ResNet1d => {
                    let dir = data_root.join(record_dir_for(path));
                    if !dir.is_dir() {
                        return Err(MetricError::MissingSample(dir.display().to_string()));
                    }
                    let record = read_record(&dir)?;
                    if record.shells.width() != INPUT_LEN {
                        return Err(MetricError::ArchMismatch(format!(
                            "record {} has width {}, expected {INPUT_LEN}",
                            dir.display(),
                            record.shells.width()
                        )));
                    }
                    let mut shells = Vec::with_capacity(SHELL_COUNT * INPUT_LEN);
                    for s in 0..SHELL_COUNT {
                        shells.extend(record.shells.rows(s).iter().map(|&v| v as f64 / 511.0));
                    }
                    let mut pressure = Vec::with_capacity(SHELL_COUNT * PRESSURE_OFFSETS * INPUT_LEN);
                    for row in record.pressure.rows() {
                        pressure.extend(row.iter().map(|&v| v as f64 / 255.0));
                    }
                    RawSample::Shells { shells, pressure }
                }
                Arch::SmallCnn2d => {
                    let file = data_root.join(path);
                    if !file.is_file() {
                        return Err(MetricError::MissingSample(file.display().to_string()));
                    }
                    RawSample::Image(load_gray(&file)?)
                }
            };
            samples.insert(path.to_string(), sample);
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn get(&self, path: &str) -> Result<&RawSample, MetricError> {
        self.samples.get(path).ok_or_else(|| MetricError::MissingSample(path.to_string()))
    }

    /// Stacks the samples at `paths` into one batch input.
    pub fn assemble<R: Rng>(
        &self,
        paths: &[&str],
        mode: Mode,
        aug: &AugmentConfig,
        rng: &mut R,
    ) -> Result<BatchInput, MetricError> {
        let batch = paths.len();
        match self.get(paths[0])? {
            RawSample::Shells { .. } => {
                let mut shells = Vec::with_capacity(batch * SHELL_CHANNELS * INPUT_LEN);
                let mut pressure = Vec::with_capacity(batch * PRESSURE_CHANNELS * INPUT_LEN);
                for &p in paths {
                    let RawSample::Shells { shells: s, pressure: pr } = self.get(p)? else {
                        return Err(MetricError::ArchMismatch(format!("{p} is not a shell record")));
                    };
                    if mode == Mode::Train && aug.shell_jitter > 0.0 {
                        let j = aug.shell_jitter;
                        shells.extend(s.iter().map(|&v| v + rng.random_range(-j..=j)));
                        pressure.extend_from_slice(pr);
                    } else {
                        shells.extend_from_slice(s);
                        pressure.extend_from_slice(pr);
                    }
                }
                Ok(BatchInput::Shells {
                    shells: Tensor::new(vec![batch, SHELL_CHANNELS, INPUT_LEN], shells),
                    pressure: Tensor::new(vec![batch, PRESSURE_CHANNELS, INPUT_LEN], pressure),
                })
            }
            RawSample::Image(_) => {
                let mut pixels = Vec::with_capacity(batch * INPUT_LEN * INPUT_LEN);
                let mut dims = None;
                for &p in paths {
                    let RawSample::Image(img) = self.get(p)? else {
                        return Err(MetricError::ArchMismatch(format!("{p} is not an image sample")));
                    };
                    let field = match mode {
                        Mode::Train => augment_train(img, aug, rng),
                        Mode::Eval => augment_eval(img, aug),
                    };
                    match dims {
                        None => dims = Some((field.height, field.width)),
                        Some(d) => {
                            if d != (field.height, field.width) {
                                return Err(MetricError::ArchMismatch(
                                    "mixed image sizes in one batch".into(),
                                ));
                            }
                        }
                    }
                    pixels.extend(field.data);
                }
                let (h, w) = dims.expect("non-empty batch");
                Ok(BatchInput::Image { pixels: Tensor::new(vec![batch, 1, h, w], pixels) })
            }
        }
    }
}
