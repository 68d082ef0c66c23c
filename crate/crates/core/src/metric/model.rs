//! Embedding architectures: the PS-layer shell/pressure network, the 1D
//! residual variant, and a small 2D CNN for the raw-image path.
//!
//! All architectures share the same contract: a forward pass maps one batch
//! of inputs to `[B, embedding_dim]` embeddings that are NOT normalized
//! (projecting onto the unit hypersphere destabilized training; the
//! `normalize_embedding` flag exists for that ablation).

use super::MetricError;
use crate::nn::{
    kaiming_uniform, BnRunning, Bound, Checkpoint, CheckpointEntry, EntryKind, Mode, NnError,
    ParamStore, Tape, Tensor, VarId,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const SHELL_CHANNELS: usize = 6;
pub const PRESSURE_CHANNELS: usize = 66;
pub const INPUT_LEN: usize = 512;

const BN_MOMENTUM: f64 = 0.1;
const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    PsNet,
    ResNet1d,
    SmallCnn2d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub arch: Arch,
    pub embedding_dim: usize,
    pub width_multiplier: f64,
    /// Hypersphere-normalization ablation: project embeddings to unit norm.
    pub normalize_embedding: bool,
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            arch: Arch::PsNet,
            embedding_dim: 512,
            width_multiplier: 1.0,
            normalize_embedding: false,
            dropout: 0.5,
        }
    }
}

/// One batch of model inputs.
#[derive(Debug, Clone)]
pub enum BatchInput {
    /// `shells: [B, 6, 512]` scaled to `[0,1]` by `1/511`;
    /// `pressure: [B, 66, 512]` scaled by `1/255`.
    Shells { shells: Tensor, pressure: Tensor },
    /// `pixels: [B, 1, H, W]`, normalized fields.
    Image { pixels: Tensor },
}

impl BatchInput {
    pub fn batch_len(&self) -> usize {
        match self {
            BatchInput::Shells { shells, .. } => shells.shape()[0],
            BatchInput::Image { pixels } => pixels.shape()[0],
        }
    }
}

/// One line of the architecture audit (shape trace).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerAudit {
    pub name: String,
    pub in_ch: usize,
    pub out_ch: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Copy)]
struct ConvIds {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct DenseIds {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct BnIds {
    gamma: usize,
    beta: usize,
    state: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct PsStage {
    conv: ConvIds,
    bn: BnIds,
    pad: usize,
    pool: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct PsNetDesc {
    shell_conv: ConvIds,
    shell_bn: BnIds,
    press_conv: ConvIds,
    press_bn: BnIds,
    stages: Vec<PsStage>,
    /// Hidden dense layers with their batch norms, then the final linear map.
    head: Vec<(DenseIds, Option<BnIds>)>,
}

#[derive(Debug, Clone)]
pub(crate) struct ResBlockDesc {
    conv1: ConvIds,
    bn1: BnIds,
    conv2: ConvIds,
    bn2: BnIds,
    proj: Option<(ConvIds, BnIds)>,
    stride: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct ResNetDesc {
    stem_conv: ConvIds,
    stem_bn: BnIds,
    stages: Vec<Vec<ResBlockDesc>>,
    fc: DenseIds,
}

#[derive(Debug, Clone)]
pub(crate) struct SmallCnnDesc {
    convs: Vec<ConvIds>,
    fc: DenseIds,
}

#[derive(Debug, Clone)]
pub(crate) enum ArchDesc {
    PsNet(PsNetDesc),
    ResNet1d(ResNetDesc),
    SmallCnn(SmallCnnDesc),
}

/// A constructed network: config, parameters, and batch-norm state.
#[derive(Debug, Clone)]
pub struct Model {
    cfg: ModelConfig,
    store: ParamStore,
    bn: Vec<BnRunning>,
    desc: ArchDesc,
    audit: Vec<LayerAudit>,
}

fn scaled(base: usize, w: f64) -> usize {
    ((base as f64 * w).round() as usize).max(1)
}

/// Builder that's only alive during construction.
struct Builder<'r> {
    store: ParamStore,
    bn: Vec<BnRunning>,
    audit: Vec<LayerAudit>,
    rng: &'r mut ChaCha20Rng,
}

impl<'r> Builder<'r> {
    fn conv1d(&mut self, name: &str, out_ch: usize, in_ch: usize, k: usize) -> ConvIds {
        let w = kaiming_uniform(vec![out_ch, in_ch, k], in_ch * k, self.rng);
        let wid = self.store.push(format!("{name}.w"), w);
        let bid = self.store.push(format!("{name}.b"), Tensor::zeros(vec![out_ch]));
        ConvIds { w: wid, b: bid }
    }

    fn conv2d(&mut self, name: &str, out_ch: usize, in_ch: usize, k: usize) -> ConvIds {
        let w = kaiming_uniform(vec![out_ch, in_ch, k, k], in_ch * k * k, self.rng);
        let wid = self.store.push(format!("{name}.w"), w);
        let bid = self.store.push(format!("{name}.b"), Tensor::zeros(vec![out_ch]));
        ConvIds { w: wid, b: bid }
    }

    fn dense(&mut self, name: &str, fout: usize, fin: usize) -> DenseIds {
        let w = kaiming_uniform(vec![fout, fin], fin, self.rng);
        let wid = self.store.push(format!("{name}.w"), w);
        let bid = self.store.push(format!("{name}.b"), Tensor::zeros(vec![fout]));
        DenseIds { w: wid, b: bid }
    }

    fn bn(&mut self, name: &str, ch: usize) -> BnIds {
        let gamma = self.store.push(format!("{name}.gamma"), Tensor::new(vec![ch], vec![1.0; ch]));
        let beta = self.store.push(format!("{name}.beta"), Tensor::zeros(vec![ch]));
        self.bn.push(BnRunning::new(ch));
        BnIds { gamma, beta, state: self.bn.len() - 1 }
    }

    fn note(&mut self, name: &str, in_ch: usize, out_ch: usize, detail: &str) {
        self.audit.push(LayerAudit {
            name: name.to_string(),
            in_ch,
            out_ch,
            detail: detail.to_string(),
        });
    }
}

impl Model {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Self, MetricError> {
        if cfg.embedding_dim == 0 || cfg.width_multiplier <= 0.0 {
            return Err(MetricError::Nn(NnError::ShapeMismatch(
                "embedding_dim must be >= 1 and width_multiplier > 0".into(),
            )));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut b = Builder { store: ParamStore::new(), bn: Vec::new(), audit: Vec::new(), rng: &mut rng };
        let desc = match cfg.arch {
            Arch::PsNet => ArchDesc::PsNet(Self::build_psnet(cfg, &mut b)),
            Arch::ResNet1d => ArchDesc::ResNet1d(Self::build_resnet(cfg, &mut b)),
            Arch::SmallCnn2d => ArchDesc::SmallCnn(Self::build_smallcnn(cfg, &mut b)),
        };
        Ok(Model { cfg: cfg.clone(), store: b.store, bn: b.bn, desc, audit: b.audit })
    }

    fn build_psnet(cfg: &ModelConfig, b: &mut Builder) -> PsNetDesc {
        let w = cfg.width_multiplier;
        let branch = scaled(96, w);
        let shell_conv = b.conv1d("shell_conv", branch, SHELL_CHANNELS, 7);
        let shell_bn = b.bn("shell_bn", branch);
        b.note("shell_conv", SHELL_CHANNELS, branch, "k7 s1 p3 + bn + relu");
        let press_conv = b.conv1d("press_conv", branch, PRESSURE_CHANNELS, 7);
        let press_bn = b.bn("press_bn", branch);
        b.note("press_conv", PRESSURE_CHANNELS, branch, "k7 s1 p3 + bn + relu");
        b.note("concat", branch, 2 * branch, "channel concatenation, length 512");

        // Four stride-2 stages take the 192x512 map down to 512x32:
        // lengths 512 -> 256 -> 128 -> 64 -> 32.
        let stage_ch = [scaled(256, w), scaled(256, w), scaled(512, w), scaled(512, w)];
        let kernels = [5usize, 3, 3, 3];
        let pads = [2usize, 1, 1, 1];
        let pools = [false, true, true, false];
        let mut in_ch = 2 * branch;
        let mut stages = Vec::new();
        for i in 0..4 {
            let name = format!("stage{}", i + 1);
            let conv = b.conv1d(&name, stage_ch[i], in_ch, kernels[i]);
            let bn = b.bn(&format!("{name}_bn"), stage_ch[i]);
            let pool_note = if pools[i] { " + maxpool(k3 s1 p1)" } else { "" };
            b.note(&name, in_ch, stage_ch[i], &format!("k{} s2 p{} + bn + relu{pool_note}", kernels[i], pads[i]));
            stages.push(PsStage { conv, bn, pad: pads[i], pool: pools[i] });
            in_ch = stage_ch[i];
        }

        let flat = in_ch * 32;
        let head_dims = [scaled(16384, w), scaled(8192, w), scaled(2048, w)];
        let mut head = Vec::new();
        let mut fin = flat;
        for (i, &fout) in head_dims.iter().enumerate() {
            let name = format!("fc{}", i + 1);
            let dense = b.dense(&name, fout, fin);
            let bn = b.bn(&format!("{name}_bn"), fout);
            b.note(&name, fin, fout, "dense + bn + relu");
            head.push((dense, Some(bn)));
            fin = fout;
        }
        let out = b.dense("embed", cfg.embedding_dim, fin);
        b.note("embed", fin, cfg.embedding_dim, "dense (linear output, no normalization)");
        head.push((out, None));

        PsNetDesc { shell_conv, shell_bn, press_conv, press_bn, stages, head }
    }

    fn build_resnet(cfg: &ModelConfig, b: &mut Builder) -> ResNetDesc {
        let w = cfg.width_multiplier;
        let widths = [scaled(64, w), scaled(128, w), scaled(256, w), scaled(512, w)];
        let blocks = [3usize, 4, 6, 3];
        let in_ch = SHELL_CHANNELS + PRESSURE_CHANNELS;

        let stem_conv = b.conv1d("stem", widths[0], in_ch, 7);
        let stem_bn = b.bn("stem_bn", widths[0]);
        b.note("stem", in_ch, widths[0], "k7 s2 p3 + bn + relu + maxpool(k3 s2 p1)");

        let mut stages = Vec::new();
        let mut prev = widths[0];
        for (s, (&ch, &nblocks)) in widths.iter().zip(&blocks).enumerate() {
            let mut stage = Vec::new();
            for blk in 0..nblocks {
                let stride = if s > 0 && blk == 0 { 2 } else { 1 };
                let name = format!("stage{}.block{}", s + 1, blk + 1);
                let conv1 = b.conv1d(&format!("{name}.conv1"), ch, prev, 3);
                let bn1 = b.bn(&format!("{name}.bn1"), ch);
                let conv2 = b.conv1d(&format!("{name}.conv2"), ch, ch, 3);
                let bn2 = b.bn(&format!("{name}.bn2"), ch);
                let proj = if stride != 1 || prev != ch {
                    let pconv = b.conv1d(&format!("{name}.proj"), ch, prev, 1);
                    let pbn = b.bn(&format!("{name}.proj_bn"), ch);
                    Some((pconv, pbn))
                } else {
                    None
                };
                b.note(&name, prev, ch, &format!("residual block, stride {stride}"));
                stage.push(ResBlockDesc { conv1, bn1, conv2, bn2, proj, stride });
                prev = ch;
            }
            stages.push(stage);
        }

        let fc = b.dense("embed", cfg.embedding_dim, prev);
        b.note("embed", prev, cfg.embedding_dim, "global average pool + dense");
        ResNetDesc { stem_conv, stem_bn, stages, fc }
    }

    fn build_smallcnn(cfg: &ModelConfig, b: &mut Builder) -> SmallCnnDesc {
        let w = cfg.width_multiplier;
        let widths = [scaled(8, w), scaled(16, w), scaled(32, w), scaled(64, w)];
        let mut prev = 1;
        let mut convs = Vec::new();
        for (i, &ch) in widths.iter().enumerate() {
            let name = format!("conv{}", i + 1);
            let conv = b.conv2d(&name, ch, prev, 3);
            b.note(&name, prev, ch, "k3 s1 p1 + relu + maxpool(2,2)");
            convs.push(conv);
            prev = ch;
        }
        let fc = b.dense("embed", cfg.embedding_dim, prev);
        b.note("embed", prev, cfg.embedding_dim, "global average pool + dense");
        SmallCnnDesc { convs, fc }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Architecture shape trace, one entry per layer (and per residual block).
    pub fn audit(&self) -> &[LayerAudit] {
        &self.audit
    }

    /// Splits the model into the pieces a forward pass needs: an immutable
    /// parameter store (for the tape) and mutable batch-norm state.
    pub(crate) fn split(&mut self) -> (&ParamStore, &mut Vec<BnRunning>, &ArchDesc, &ModelConfig) {
        (&self.store, &mut self.bn, &self.desc, &self.cfg)
    }

    /// Snapshot of all mutable state (parameters + running stats).
    pub fn state_snapshot(&self) -> (ParamStore, Vec<BnRunning>) {
        (self.store.clone_detached(), self.bn.clone())
    }

    pub fn restore_state(&mut self, state: (ParamStore, Vec<BnRunning>)) {
        self.store = state.0;
        self.bn = state.1;
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let config_json = serde_json::to_string(&self.cfg).expect("config serializes");
        let mut entries = Vec::new();
        for p in self.store.iter() {
            entries.push(CheckpointEntry {
                name: p.name.clone(),
                kind: EntryKind::Parameter,
                shape: p.value.shape().to_vec(),
                data: p.value.data().to_vec(),
            });
        }
        for (i, s) in self.bn.iter().enumerate() {
            entries.push(CheckpointEntry {
                name: format!("bn{i}.running_mean"),
                kind: EntryKind::RunningStat,
                shape: vec![s.mean.len()],
                data: s.mean.clone(),
            });
            entries.push(CheckpointEntry {
                name: format!("bn{i}.running_var"),
                kind: EntryKind::RunningStat,
                shape: vec![s.var.len()],
                data: s.var.clone(),
            });
        }
        Checkpoint { config_json, entries }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, MetricError> {
        let cfg: ModelConfig = serde_json::from_str(&ckpt.config_json)
            .map_err(|e| MetricError::Nn(NnError::MalformedCheckpoint(format!("config: {e}"))))?;
        let mut model = Model::new(&cfg, 0)?;
        let by_name: BTreeMap<&str, &CheckpointEntry> =
            ckpt.entries.iter().map(|e| (e.name.as_str(), e)).collect();

        for p in model.store.iter_mut() {
            let e = by_name.get(p.name.as_str()).ok_or_else(|| {
                MetricError::Nn(NnError::MalformedCheckpoint(format!("missing parameter '{}'", p.name)))
            })?;
            if e.shape != p.value.shape() {
                return Err(MetricError::Nn(NnError::MalformedCheckpoint(format!(
                    "parameter '{}' shape {:?} != expected {:?}",
                    p.name, e.shape, p.value.shape()
                ))));
            }
            p.value = Tensor::new(e.shape.clone(), e.data.clone());
        }
        for (i, s) in model.bn.iter_mut().enumerate() {
            for (field, buf) in [("running_mean", &mut s.mean), ("running_var", &mut s.var)] {
                let name = format!("bn{i}.{field}");
                let e = by_name.get(name.as_str()).ok_or_else(|| {
                    MetricError::Nn(NnError::MalformedCheckpoint(format!("missing stat '{name}'")))
                })?;
                if e.data.len() != buf.len() {
                    return Err(MetricError::Nn(NnError::MalformedCheckpoint(format!(
                        "stat '{name}' length {} != expected {}",
                        e.data.len(),
                        buf.len()
                    ))));
                }
                buf.copy_from_slice(&e.data);
            }
        }
        Ok(model)
    }
}

impl ArchDesc {
    /// Runs one batch through the network, recording onto `tape`.
    #[allow(clippy::too_many_arguments)]
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        cfg: &ModelConfig,
        bn_states: &mut [BnRunning],
        input: BatchInput,
        mode: Mode,
        rng: &mut ChaCha20Rng,
    ) -> Result<VarId, MetricError> {
        let embed = match (self, input) {
            (ArchDesc::PsNet(desc), BatchInput::Shells { shells, pressure }) => {
                desc.forward(tape, bound, cfg, bn_states, shells, pressure, mode, rng)?
            }
            (ArchDesc::ResNet1d(desc), BatchInput::Shells { shells, pressure }) => {
                desc.forward(tape, bound, cfg, bn_states, shells, pressure, mode)?
            }
            (ArchDesc::SmallCnn(desc), BatchInput::Image { pixels }) => {
                desc.forward(tape, bound, cfg, pixels)?
            }
            (arch, input) => {
                let name = match arch {
                    ArchDesc::PsNet(_) => "psnet",
                    ArchDesc::ResNet1d(_) => "resnet1d",
                    ArchDesc::SmallCnn(_) => "smallcnn2d",
                };
                let got = match input {
                    BatchInput::Shells { .. } => "shell/pressure",
                    BatchInput::Image { .. } => "image",
                };
                return Err(MetricError::ArchMismatch(format!("{name} cannot consume {got} input")));
            }
        };
        if cfg.normalize_embedding {
            Ok(tape.l2_normalize(embed)?)
        } else {
            Ok(embed)
        }
    }
}

fn bn_op(
    tape: &mut Tape,
    bound: &Bound,
    ids: BnIds,
    states: &mut [BnRunning],
    x: VarId,
    mode: Mode,
) -> Result<VarId, NnError> {
    tape.batchnorm1d(
        x,
        bound.ids[ids.gamma],
        bound.ids[ids.beta],
        &mut states[ids.state],
        BN_MOMENTUM,
        BN_EPS,
        mode,
    )
}

impl PsNetDesc {
    #[allow(clippy::too_many_arguments)]
    fn forward(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        cfg: &ModelConfig,
        bn_states: &mut [BnRunning],
        shells: Tensor,
        pressure: Tensor,
        mode: Mode,
        rng: &mut ChaCha20Rng,
    ) -> Result<VarId, MetricError> {
        check_1d_input(&shells, SHELL_CHANNELS, "shells")?;
        check_1d_input(&pressure, PRESSURE_CHANNELS, "pressure")?;

        let sx = tape.input(shells);
        let px = tape.input(pressure);

        let mut s = tape.conv1d(sx, bound.ids[self.shell_conv.w], bound.ids[self.shell_conv.b], 1, 3)?;
        s = bn_op(tape, bound, self.shell_bn, bn_states, s, mode)?;
        s = tape.relu(s);

        let mut p = tape.conv1d(px, bound.ids[self.press_conv.w], bound.ids[self.press_conv.b], 1, 3)?;
        p = bn_op(tape, bound, self.press_bn, bn_states, p, mode)?;
        p = tape.relu(p);

        let mut x = tape.concat_channels(s, p)?;
        for stage in &self.stages {
            x = tape.conv1d(x, bound.ids[stage.conv.w], bound.ids[stage.conv.b], 2, stage.pad)?;
            x = bn_op(tape, bound, stage.bn, bn_states, x, mode)?;
            x = tape.relu(x);
            if stage.pool {
                x = tape.maxpool1d(x, 3, 1, 1)?;
            }
        }
        x = tape.dropout(x, cfg.dropout, mode, rng);
        x = tape.flatten(x);
        for (dense, bn) in &self.head {
            x = tape.dense(x, bound.ids[dense.w], bound.ids[dense.b])?;
            if let Some(ids) = bn {
                x = bn_op(tape, bound, *ids, bn_states, x, mode)?;
                x = tape.relu(x);
            }
        }
        Ok(x)
    }
}

impl ResNetDesc {
    #[allow(clippy::too_many_arguments)]
    fn forward(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        _cfg: &ModelConfig,
        bn_states: &mut [BnRunning],
        shells: Tensor,
        pressure: Tensor,
        mode: Mode,
    ) -> Result<VarId, MetricError> {
        check_1d_input(&shells, SHELL_CHANNELS, "shells")?;
        check_1d_input(&pressure, PRESSURE_CHANNELS, "pressure")?;

        let sx = tape.input(shells);
        let px = tape.input(pressure);
        let stacked = tape.concat_channels(sx, px)?;

        let mut x =
            tape.conv1d(stacked, bound.ids[self.stem_conv.w], bound.ids[self.stem_conv.b], 2, 3)?;
        x = bn_op(tape, bound, self.stem_bn, bn_states, x, mode)?;
        x = tape.relu(x);
        x = tape.maxpool1d(x, 3, 2, 1)?;

        for stage in &self.stages {
            for block in stage {
                let mut branch = tape.conv1d(
                    x,
                    bound.ids[block.conv1.w],
                    bound.ids[block.conv1.b],
                    block.stride,
                    1,
                )?;
                branch = bn_op(tape, bound, block.bn1, bn_states, branch, mode)?;
                branch = tape.relu(branch);
                branch = tape.conv1d(branch, bound.ids[block.conv2.w], bound.ids[block.conv2.b], 1, 1)?;
                branch = bn_op(tape, bound, block.bn2, bn_states, branch, mode)?;

                let skip = match &block.proj {
                    Some((conv, bn)) => {
                        let s = tape.conv1d(x, bound.ids[conv.w], bound.ids[conv.b], block.stride, 0)?;
                        bn_op(tape, bound, *bn, bn_states, s, mode)?
                    }
                    None => x,
                };
                x = tape.add(branch, skip)?;
                x = tape.relu(x);
            }
        }
        let pooled = tape.global_avg_pool(x)?;
        Ok(tape.dense(pooled, bound.ids[self.fc.w], bound.ids[self.fc.b])?)
    }
}

impl SmallCnnDesc {
    fn forward(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        _cfg: &ModelConfig,
        pixels: Tensor,
    ) -> Result<VarId, MetricError> {
        if pixels.shape().len() != 4 || pixels.shape()[1] != 1 {
            return Err(MetricError::Nn(NnError::ShapeMismatch(format!(
                "image input must be [B,1,H,W], got {:?}",
                pixels.shape()
            ))));
        }
        let mut x = tape.input(pixels);
        for conv in &self.convs {
            x = tape.conv2d(x, bound.ids[conv.w], bound.ids[conv.b], 1, 1)?;
            x = tape.relu(x);
            x = tape.maxpool2d(x, 2, 2)?;
        }
        let pooled = tape.global_avg_pool(x)?;
        Ok(tape.dense(pooled, bound.ids[self.fc.w], bound.ids[self.fc.b])?)
    }
}

fn check_1d_input(t: &Tensor, channels: usize, what: &str) -> Result<(), MetricError> {
    if t.shape().len() != 3 || t.shape()[1] != channels || t.shape()[2] != INPUT_LEN {
        return Err(MetricError::Nn(NnError::ShapeMismatch(format!(
            "{what} input must be [B,{channels},{INPUT_LEN}], got {:?}",
            t.shape()
        ))));
    }
    Ok(())
}
