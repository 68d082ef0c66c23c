//! Siamese training loop with shared-weight twin (or triple) forward passes,
//! per-epoch loss logging, early stopping on validation loss, and
//! best-checkpoint retention. Fully deterministic under the config seed.

use super::data::SampleStore;
use super::model::{BatchInput, Model, ModelConfig};
use super::MetricError;
use crate::augment::AugmentConfig;
use crate::dataset::{LoadedManifest, PairRow, Split, TripletRow};
use crate::nn::{Mode, Optimizer, OptimizerKind, Tape};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

pub const PAPER_LEARNING_RATE: f64 = 0.001;
pub const PAPER_BATCH_SIZE: usize = 32;
pub const PAPER_EPOCHS: usize = 20;
pub const PAPER_MARGIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Contrastive,
    Triplet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub margin: f64,
    pub loss: LossKind,
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
    pub augment: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Sgd,
            learning_rate: PAPER_LEARNING_RATE,
            batch_size: PAPER_BATCH_SIZE,
            epochs: PAPER_EPOCHS,
            margin: PAPER_MARGIN,
            loss: LossKind::Contrastive,
            patience: 5,
            min_delta: 0.0,
            seed: 0,
            augment: AugmentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_valid_loss: f64,
}

impl TrainOutcome {
    /// History as CSV: `epoch,train_loss,valid_loss`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,valid_loss\n");
        for s in &self.history {
            out.push_str(&format!("{},{},{}\n", s.epoch, s.train_loss, s.valid_loss));
        }
        out
    }
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

enum BatchPlan<'a> {
    Pairs(Vec<&'a PairRow>),
    Triplets(Vec<&'a TripletRow>),
}

/// One optimizer step (train) or loss evaluation (eval) over a batch.
/// Returns the batch loss.
#[allow(clippy::too_many_arguments)]
fn run_batch(
    model: &mut Model,
    store: &SampleStore,
    aug: &AugmentConfig,
    plan: &BatchPlan,
    margin: f64,
    mode: Mode,
    rng: &mut ChaCha20Rng,
    optimizer: Option<&mut Optimizer>,
) -> Result<f64, MetricError> {
    let (inputs, labels): (Vec<BatchInput>, Vec<u8>) = match plan {
        BatchPlan::Pairs(rows) => {
            let a: Vec<&str> = rows.iter().map(|r| r.a.as_str()).collect();
            let b: Vec<&str> = rows.iter().map(|r| r.b.as_str()).collect();
            let labels = rows.iter().map(|r| r.label).collect();
            (
                vec![store.assemble(&a, mode, aug, rng)?, store.assemble(&b, mode, aug, rng)?],
                labels,
            )
        }
        BatchPlan::Triplets(rows) => {
            let a: Vec<&str> = rows.iter().map(|r| r.a.as_str()).collect();
            let p: Vec<&str> = rows.iter().map(|r| r.p.as_str()).collect();
            let n: Vec<&str> = rows.iter().map(|r| r.n.as_str()).collect();
            (
                vec![
                    store.assemble(&a, mode, aug, rng)?,
                    store.assemble(&p, mode, aug, rng)?,
                    store.assemble(&n, mode, aug, rng)?,
                ],
                Vec::new(),
            )
        }
    };

    if mode == Mode::Train {
        model.store_mut().zero_grads();
    }
    let (loss_value, grads, bound) = {
        let (store_ref, bn, desc, cfg) = model.split();
        let mut tape = Tape::new(store_ref);
        let bound = tape.bind_params();
        let mut embeds = Vec::with_capacity(inputs.len());
        for input in inputs {
            embeds.push(desc.forward(&mut tape, &bound, cfg, bn, input, mode, rng)?);
        }
        let loss = match plan {
            BatchPlan::Pairs(_) => tape.contrastive_loss(embeds[0], embeds[1], &labels, margin)?,
            BatchPlan::Triplets(_) => tape.triplet_loss(embeds[0], embeds[1], embeds[2], margin)?,
        };
        let loss_value = tape.val(loss).item();
        if mode == Mode::Train {
            let grads = tape.backward(loss)?;
            (loss_value, Some(grads), bound)
        } else {
            (loss_value, None, bound)
        }
    };
    if let (Some(grads), Some(opt)) = (grads, optimizer) {
        grads.accumulate_into(model.store_mut(), &bound);
        opt.step(model.store_mut())?;
    }
    Ok(loss_value)
}

fn batch_plans<'a>(
    manifest: &'a LoadedManifest,
    split: Split,
    loss: LossKind,
    order: &[usize],
    batch_size: usize,
    train_mode: bool,
) -> Vec<BatchPlan<'a>> {
    let mut plans = Vec::new();
    match loss {
        LossKind::Contrastive => {
            let rows = manifest.pairs(split);
            for chunk in order.chunks(batch_size) {
                // Train-mode batch norm needs at least two samples.
                if train_mode && chunk.len() < 2 {
                    continue;
                }
                plans.push(BatchPlan::Pairs(chunk.iter().map(|&i| &rows[i]).collect()));
            }
        }
        LossKind::Triplet => {
            let rows = manifest.triplets(split);
            for chunk in order.chunks(batch_size) {
                if train_mode && chunk.len() < 2 {
                    continue;
                }
                plans.push(BatchPlan::Triplets(chunk.iter().map(|&i| &rows[i]).collect()));
            }
        }
    }
    plans
}

fn split_len(manifest: &LoadedManifest, split: Split, loss: LossKind) -> usize {
    match loss {
        LossKind::Contrastive => manifest.pairs(split).len(),
        LossKind::Triplet => manifest.triplets(split).len(),
    }
}

/// Trains a fresh model on the manifest's train split, early-stopping on the
/// validation split, and returns the best-validation model plus the full
/// loss history.
pub fn train(
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    manifest: &LoadedManifest,
    store: &SampleStore,
) -> Result<TrainOutcome, MetricError> {
    let n_train = split_len(manifest, Split::Train, cfg.loss);
    if n_train == 0 {
        return Err(MetricError::EmptyManifest);
    }
    let n_valid = split_len(manifest, Split::Valid, cfg.loss);

    let mut model = Model::new(model_cfg, cfg.seed)?;
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, model.store());

    let mut history = Vec::new();
    let mut best: Option<(usize, f64, (crate::nn::ParamStore, Vec<crate::nn::BnRunning>))> = None;
    let mut epochs_without_improvement = 0usize;

    for epoch in 0..cfg.epochs {
        // Deterministic per-epoch order and augmentation stream.
        let mut order: Vec<usize> = (0..n_train).collect();
        let mut shuffle_rng = ChaCha20Rng::seed_from_u64(mix(cfg.seed, 0xA11CE, epoch as u64));
        order.shuffle(&mut shuffle_rng);

        let mut train_loss_sum = 0.0;
        let mut train_count = 0usize;
        let plans = batch_plans(manifest, Split::Train, cfg.loss, &order, cfg.batch_size, true);
        for (bi, plan) in plans.iter().enumerate() {
            let mut rng =
                ChaCha20Rng::seed_from_u64(mix(cfg.seed, 0xBA7C4, (epoch * 1_000_000 + bi) as u64));
            let loss = run_batch(
                &mut model,
                store,
                &cfg.augment,
                plan,
                cfg.margin,
                Mode::Train,
                &mut rng,
                Some(&mut optimizer),
            )?;
            if !loss.is_finite() {
                return Err(MetricError::DivergedLoss { epoch, batch: bi });
            }
            let n = match plan {
                BatchPlan::Pairs(rows) => rows.len(),
                BatchPlan::Triplets(rows) => rows.len(),
            };
            train_loss_sum += loss * n as f64;
            train_count += n;
        }
        let train_loss = train_loss_sum / train_count.max(1) as f64;

        // Validation loss in eval mode; falls back to the train loss when
        // the manifest carries no validation split.
        let valid_loss = if n_valid > 0 {
            let order: Vec<usize> = (0..n_valid).collect();
            let plans = batch_plans(manifest, Split::Valid, cfg.loss, &order, cfg.batch_size, false);
            let mut sum = 0.0;
            let mut count = 0usize;
            for plan in &plans {
                let mut rng = ChaCha20Rng::seed_from_u64(0);
                let loss = run_batch(
                    &mut model,
                    store,
                    &cfg.augment,
                    plan,
                    cfg.margin,
                    Mode::Eval,
                    &mut rng,
                    None,
                )?;
                let n = match plan {
                    BatchPlan::Pairs(rows) => rows.len(),
                    BatchPlan::Triplets(rows) => rows.len(),
                };
                sum += loss * n as f64;
                count += n;
            }
            sum / count.max(1) as f64
        } else {
            train_loss
        };
        if !valid_loss.is_finite() {
            return Err(MetricError::DivergedLoss { epoch, batch: usize::MAX });
        }

        history.push(EpochStats { epoch, train_loss, valid_loss });

        let improved = match &best {
            None => true,
            Some((_, best_loss, _)) => valid_loss < best_loss - cfg.min_delta,
        };
        if improved {
            best = Some((epoch, valid_loss, model.state_snapshot()));
            epochs_without_improvement = 0;
        } else {
            epochs_without_improvement += 1;
            if epochs_without_improvement >= cfg.patience {
                break;
            }
        }
    }

    let (best_epoch, best_valid_loss, state) = best.expect("at least one epoch ran");
    model.restore_state(state);
    Ok(TrainOutcome { model, history, best_epoch, best_valid_loss })
}

/// Eval-mode twin forward over a pair manifest: Euclidean distance per pair,
/// input order preserved.
pub fn embed_pairs(
    model: &mut Model,
    pairs: &[PairRow],
    store: &SampleStore,
    batch_size: usize,
) -> Result<Vec<(f64, u8)>, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyManifest);
    }
    let aug = AugmentConfig::default();
    let mut out = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(batch_size.max(1)) {
        let a: Vec<&str> = chunk.iter().map(|r| r.a.as_str()).collect();
        let b: Vec<&str> = chunk.iter().map(|r| r.b.as_str()).collect();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let input_a = store.assemble(&a, Mode::Eval, &aug, &mut rng)?;
        let input_b = store.assemble(&b, Mode::Eval, &aug, &mut rng)?;

        let (store_ref, bn, desc, cfg) = model.split();
        let mut tape = Tape::new(store_ref);
        let bound = tape.bind_params();
        let ha = desc.forward(&mut tape, &bound, cfg, bn, input_a, Mode::Eval, &mut rng)?;
        let hb = desc.forward(&mut tape, &bound, cfg, bn, input_b, Mode::Eval, &mut rng)?;
        let (va, vb) = (tape.val(ha), tape.val(hb));
        let dim = va.shape()[1];
        for (i, row) in chunk.iter().enumerate() {
            let da = &va.data()[i * dim..(i + 1) * dim];
            let db = &vb.data()[i * dim..(i + 1) * dim];
            let dist = super::dist_euclidean(da, db)?;
            out.push((dist, row.label));
        }
    }
    Ok(out)
}

/// Embeds a single already-assembled input (used by the C API).
pub fn embed_single(model: &mut Model, input: BatchInput) -> Result<Vec<f64>, MetricError> {
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let (store_ref, bn, desc, cfg) = model.split();
    let mut tape = Tape::new(store_ref);
    let bound = tape.bind_params();
    let h = desc.forward(&mut tape, &bound, cfg, bn, input, Mode::Eval, &mut rng)?;
    Ok(tape.val(h).data().to_vec())
}
