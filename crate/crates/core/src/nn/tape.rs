//! Recording tape: forward operations capture what the exact reverse-mode
//! pass needs, and `backward` replays the graph in reverse, accumulating
//! gradients additively. Parameters are referenced by store index, so a
//! parameter bound once and used by several branches (siamese twins)
//! receives the sum of all branch gradients.

use super::{NnError, ParamStore, Tensor};
use rand::Rng;
use rayon::prelude::*;

/// Unrolled dot product: four independent accumulators break the FP
/// dependency chain so the loop vectorizes. Summation order is fixed, so
/// results stay bit-reproducible across runs.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for j in chunks * 4..a.len() {
        sum += a[j] * b[j];
    }
    sum
}

/// `y += alpha * x` over equal-length slices.
#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Valid output range `[lo, hi)` such that `l * stride + shift` stays in
/// `[0, len)` for every `l` in the range.
#[inline]
fn conv_span(out_len: usize, stride: usize, shift: isize, len: usize) -> (usize, usize) {
    let lo = if shift >= 0 { 0 } else { ((-shift) as usize).div_ceil(stride) };
    let hi_src = len as isize - 1 - shift;
    if hi_src < 0 {
        return (0, 0);
    }
    let hi = (hi_src as usize / stride + 1).min(out_len);
    (lo.min(hi), hi)
}

/// Handle to a value recorded on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(usize);

#[cfg(test)]
impl VarId {
    pub(crate) fn dangling() -> Self {
        VarId(0)
    }
}

/// Train/eval switch for batch norm and dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Parameter bindings for one tape: `ids[pid]` is the tape variable of
/// store parameter `pid`.
pub struct Bound {
    pub ids: Vec<VarId>,
}

enum Slot {
    Owned(Tensor),
    Param(usize),
}

enum Node {
    Leaf,
    Conv1d { x: VarId, w: VarId, b: VarId, stride: usize, pad: usize },
    Conv2d { x: VarId, w: VarId, b: VarId, stride: usize, pad: usize },
    MaxPool1d { x: VarId, argmax: Vec<usize> },
    MaxPool2d { x: VarId, argmax: Vec<usize> },
    BatchNorm1d {
        x: VarId,
        gamma: VarId,
        beta: VarId,
        mean: Vec<f64>,
        var: Vec<f64>,
        eps: f64,
        batch_stats: bool,
    },
    Relu { x: VarId },
    Dropout { x: VarId, mask: Vec<f64> },
    Dense { x: VarId, w: VarId, b: VarId },
    Add { a: VarId, b: VarId },
    ConcatChannels { a: VarId, b: VarId },
    Reshape { x: VarId },
    GlobalAvgPool { x: VarId },
    L2Normalize { x: VarId, norms: Vec<f64> },
    Contrastive { h1: VarId, h2: VarId, labels: Vec<u8>, margin: f64, dists: Vec<f64> },
    Triplet { a: VarId, p: VarId, n: VarId, margin: f64, dap: Vec<f64>, dan: Vec<f64> },
}

/// Per-variable gradients produced by a backward pass.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: VarId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    /// Writes parameter gradients back into the store's grad slots.
    pub fn accumulate_into(&self, store: &mut ParamStore, bound: &Bound) {
        for (pid, vid) in bound.ids.iter().enumerate() {
            if let Some(g) = &self.grads[vid.0] {
                store.get_mut(pid).value.accumulate_grad(g.data());
            }
        }
    }
}

pub struct Tape<'s> {
    store: &'s ParamStore,
    slots: Vec<Slot>,
    nodes: Vec<Node>,
    consumed: bool,
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Self { store, slots: Vec::new(), nodes: Vec::new(), consumed: false }
    }

    /// Value of a recorded variable.
    pub fn val(&self, id: VarId) -> &Tensor {
        match &self.slots[id.0] {
            Slot::Owned(t) => t,
            Slot::Param(pid) => &self.store.get(*pid).value,
        }
    }

    fn push(&mut self, value: Tensor, node: Node) -> VarId {
        self.slots.push(Slot::Owned(value));
        self.nodes.push(node);
        VarId(self.slots.len() - 1)
    }

    /// Records a constant input leaf.
    pub fn input(&mut self, t: Tensor) -> VarId {
        self.push(t, Node::Leaf)
    }

    /// Binds every store parameter as a leaf, in store order.
    pub fn bind_params(&mut self) -> Bound {
        let ids = (0..self.store.len())
            .map(|pid| {
                self.slots.push(Slot::Param(pid));
                self.nodes.push(Node::Leaf);
                VarId(self.slots.len() - 1)
            })
            .collect();
        Bound { ids }
    }

    // ---- forward operations -------------------------------------------

    /// 1D cross-correlation over `[batch, channels, length]` input with a
    /// `[out_ch, in_ch, k]` kernel. Output length is
    /// `(length + 2*pad - k) / stride + 1`.
    pub fn conv1d(
        &mut self,
        x: VarId,
        w: VarId,
        b: VarId,
        stride: usize,
        pad: usize,
    ) -> Result<VarId, NnError> {
        let (xs, ws, bs) = (self.val(x).shape(), self.val(w).shape(), self.val(b).shape());
        if xs.len() != 3 || ws.len() != 3 || bs.len() != 1 {
            return Err(NnError::ShapeMismatch(format!(
                "conv1d expects x[B,C,L], w[O,C,K], b[O]; got {xs:?}, {ws:?}, {bs:?}"
            )));
        }
        let (batch, in_ch, len) = (xs[0], xs[1], xs[2]);
        let (out_ch, w_in_ch, k) = (ws[0], ws[1], ws[2]);
        if in_ch != w_in_ch || bs[0] != out_ch || len + 2 * pad < k || stride == 0 {
            return Err(NnError::ShapeMismatch(format!(
                "conv1d mismatch: x{xs:?} w{ws:?} b{bs:?} stride {stride} pad {pad}"
            )));
        }
        let out_len = (len + 2 * pad - k) / stride + 1;

        let xv = self.val(x).data();
        let wv = self.val(w).data();
        let bv = self.val(b).data();
        let mut out = vec![0.0; batch * out_ch * out_len];
        out.par_chunks_mut(out_ch * out_len).enumerate().for_each(|(bi, obuf)| {
            let xrow = &xv[bi * in_ch * len..(bi + 1) * in_ch * len];
            for oc in 0..out_ch {
                let orow = &mut obuf[oc * out_len..(oc + 1) * out_len];
                orow.iter_mut().for_each(|v| *v = bv[oc]);
                for ic in 0..in_ch {
                    let xi = &xrow[ic * len..(ic + 1) * len];
                    for kk in 0..k {
                        let wgt = wv[(oc * in_ch + ic) * k + kk];
                        let shift = kk as isize - pad as isize;
                        let (lo, hi) = conv_span(out_len, stride, shift, len);
                        if lo >= hi {
                            continue;
                        }
                        if stride == 1 {
                            let src = (lo as isize + shift) as usize;
                            axpy(wgt, &xi[src..src + (hi - lo)], &mut orow[lo..hi]);
                        } else {
                            for (l, ov) in orow[lo..hi].iter_mut().enumerate() {
                                let src = ((lo + l) * stride) as isize + shift;
                                *ov += wgt * xi[src as usize];
                            }
                        }
                    }
                }
            }
        });
        Ok(self.push(
            Tensor::new(vec![batch, out_ch, out_len], out),
            Node::Conv1d { x, w, b, stride, pad },
        ))
    }

    /// 2D cross-correlation over `[batch, channels, h, w]` input.
    pub fn conv2d(
        &mut self,
        x: VarId,
        w: VarId,
        b: VarId,
        stride: usize,
        pad: usize,
    ) -> Result<VarId, NnError> {
        let (xs, ws, bs) = (self.val(x).shape(), self.val(w).shape(), self.val(b).shape());
        if xs.len() != 4 || ws.len() != 4 || bs.len() != 1 {
            return Err(NnError::ShapeMismatch(format!(
                "conv2d expects x[B,C,H,W], w[O,C,KH,KW], b[O]; got {xs:?}, {ws:?}, {bs:?}"
            )));
        }
        let (batch, in_ch, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
        let (out_ch, w_in_ch, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
        if in_ch != w_in_ch || bs[0] != out_ch || h + 2 * pad < kh || wd + 2 * pad < kw || stride == 0 {
            return Err(NnError::ShapeMismatch(format!(
                "conv2d mismatch: x{xs:?} w{ws:?} stride {stride} pad {pad}"
            )));
        }
        let oh = (h + 2 * pad - kh) / stride + 1;
        let ow = (wd + 2 * pad - kw) / stride + 1;

        let xv = self.val(x).data();
        let wv = self.val(w).data();
        let bv = self.val(b).data();
        let mut out = vec![0.0; batch * out_ch * oh * ow];
        out.par_chunks_mut(out_ch * oh * ow).enumerate().for_each(|(bi, obuf)| {
            let xrow = &xv[bi * in_ch * h * wd..(bi + 1) * in_ch * h * wd];
            for oc in 0..out_ch {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = bv[oc];
                        for ic in 0..in_ch {
                            for ky in 0..kh {
                                let sy = (oy * stride + ky) as isize - pad as isize;
                                if sy < 0 || sy as usize >= h {
                                    continue;
                                }
                                for kx in 0..kw {
                                    let sx = (ox * stride + kx) as isize - pad as isize;
                                    if sx < 0 || sx as usize >= wd {
                                        continue;
                                    }
                                    acc += xrow[(ic * h + sy as usize) * wd + sx as usize]
                                        * wv[((oc * in_ch + ic) * kh + ky) * kw + kx];
                                }
                            }
                        }
                        obuf[(oc * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        });
        Ok(self.push(
            Tensor::new(vec![batch, out_ch, oh, ow], out),
            Node::Conv2d { x, w, b, stride, pad },
        ))
    }

    /// Per-window maximum over the length axis; argmax indices are retained
    /// for the backward pass. Padded positions never win.
    pub fn maxpool1d(
        &mut self,
        x: VarId,
        window: usize,
        stride: usize,
        pad: usize,
    ) -> Result<VarId, NnError> {
        let xs = self.val(x).shape();
        if xs.len() != 3 || window == 0 || stride == 0 || xs[2] + 2 * pad < window {
            return Err(NnError::ShapeMismatch(format!(
                "maxpool1d mismatch: x{xs:?} window {window} stride {stride} pad {pad}"
            )));
        }
        let (batch, ch, len) = (xs[0], xs[1], xs[2]);
        let out_len = (len + 2 * pad - window) / stride + 1;
        let xv = self.val(x).data();
        let mut out = vec![0.0; batch * ch * out_len];
        let mut argmax = vec![0usize; batch * ch * out_len];
        for bi in 0..batch {
            for c in 0..ch {
                let base = (bi * ch + c) * len;
                for l in 0..out_len {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = usize::MAX;
                    for kk in 0..window {
                        let src = (l * stride + kk) as isize - pad as isize;
                        if src < 0 || src as usize >= len {
                            continue;
                        }
                        let v = xv[base + src as usize];
                        if v > best {
                            best = v;
                            best_idx = base + src as usize;
                        }
                    }
                    debug_assert_ne!(best_idx, usize::MAX, "window fully padded");
                    out[(bi * ch + c) * out_len + l] = best;
                    argmax[(bi * ch + c) * out_len + l] = best_idx;
                }
            }
        }
        Ok(self.push(Tensor::new(vec![batch, ch, out_len], out), Node::MaxPool1d { x, argmax }))
    }

    /// 2D max pooling with a square window, no padding.
    pub fn maxpool2d(&mut self, x: VarId, window: usize, stride: usize) -> Result<VarId, NnError> {
        let xs = self.val(x).shape();
        if xs.len() != 4 || window == 0 || stride == 0 || xs[2] < window || xs[3] < window {
            return Err(NnError::ShapeMismatch(format!(
                "maxpool2d mismatch: x{xs:?} window {window} stride {stride}"
            )));
        }
        let (batch, ch, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let oh = (h - window) / stride + 1;
        let ow = (w - window) / stride + 1;
        let xv = self.val(x).data();
        let mut out = vec![0.0; batch * ch * oh * ow];
        let mut argmax = vec![0usize; batch * ch * oh * ow];
        for bc in 0..batch * ch {
            let base = bc * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0;
                    for ky in 0..window {
                        for kx in 0..window {
                            let idx = base + (oy * stride + ky) * w + ox * stride + kx;
                            if xv[idx] > best {
                                best = xv[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out[bc * oh * ow + oy * ow + ox] = best;
                    argmax[bc * oh * ow + oy * ow + ox] = best_idx;
                }
            }
        }
        Ok(self.push(Tensor::new(vec![batch, ch, oh, ow], out), Node::MaxPool2d { x, argmax }))
    }

    /// Batch normalization per channel over `[B, C, L]` (or `[B, C]`) input.
    ///
    /// Train mode normalizes with batch statistics (population variance) and
    /// updates the running stats in place; eval mode uses the running stats,
    /// making the op a fixed affine function of its input.
    #[allow(clippy::too_many_arguments)]
    pub fn batchnorm1d(
        &mut self,
        x: VarId,
        gamma: VarId,
        beta: VarId,
        running: &mut super::BnRunning,
        momentum: f64,
        eps: f64,
        mode: Mode,
    ) -> Result<VarId, NnError> {
        let xs = self.val(x).shape().to_vec();
        if !(xs.len() == 2 || xs.len() == 3) {
            return Err(NnError::ShapeMismatch(format!("batchnorm1d expects rank 2 or 3, got {xs:?}")));
        }
        let (batch, ch) = (xs[0], xs[1]);
        let inner: usize = xs[2..].iter().product();
        if self.val(gamma).len() != ch || self.val(beta).len() != ch || running.mean.len() != ch {
            return Err(NnError::ShapeMismatch("batchnorm1d affine/state channel mismatch".into()));
        }
        if mode == Mode::Train && batch < 2 {
            return Err(NnError::BatchTooSmall(batch));
        }

        let xv = self.val(x).data();
        let n = (batch * inner) as f64;
        let (mean, var) = match mode {
            Mode::Train => {
                let mut mean = vec![0.0; ch];
                let mut var = vec![0.0; ch];
                for c in 0..ch {
                    let mut sum = 0.0;
                    for b in 0..batch {
                        let base = (b * ch + c) * inner;
                        for i in 0..inner {
                            sum += xv[base + i];
                        }
                    }
                    let m = sum / n;
                    let mut sq = 0.0;
                    for b in 0..batch {
                        let base = (b * ch + c) * inner;
                        for i in 0..inner {
                            let d = xv[base + i] - m;
                            sq += d * d;
                        }
                    }
                    mean[c] = m;
                    var[c] = sq / n;
                    running.mean[c] = (1.0 - momentum) * running.mean[c] + momentum * m;
                    running.var[c] = (1.0 - momentum) * running.var[c] + momentum * var[c];
                }
                (mean, var)
            }
            Mode::Eval => (running.mean.clone(), running.var.clone()),
        };

        let gv = self.val(gamma).data();
        let bv = self.val(beta).data();
        let mut out = vec![0.0; xv.len()];
        for b in 0..batch {
            for c in 0..ch {
                let base = (b * ch + c) * inner;
                let inv = 1.0 / (var[c] + eps).sqrt();
                for i in 0..inner {
                    out[base + i] = gv[c] * (xv[base + i] - mean[c]) * inv + bv[c];
                }
            }
        }
        Ok(self.push(
            Tensor::new(xs, out),
            Node::BatchNorm1d { x, gamma, beta, mean, var, eps, batch_stats: mode == Mode::Train },
        ))
    }

    pub fn relu(&mut self, x: VarId) -> VarId {
        let t = self.val(x);
        let out = Tensor::new(t.shape().to_vec(), t.data().iter().map(|&v| v.max(0.0)).collect());
        self.push(out, Node::Relu { x })
    }

    /// Inverted dropout: keeps elements with probability `1 - p` scaled by
    /// `1/(1-p)`, so eval mode (identity) needs no rescaling. The mask is a
    /// pure function of the supplied RNG state.
    pub fn dropout<R: Rng>(&mut self, x: VarId, p: f64, mode: Mode, rng: &mut R) -> VarId {
        if mode == Mode::Eval || p == 0.0 {
            let t = self.val(x);
            let out = Tensor::new(t.shape().to_vec(), t.data().to_vec());
            return self.push(out, Node::Reshape { x });
        }
        let t = self.val(x);
        let scale = 1.0 / (1.0 - p);
        let mask: Vec<f64> =
            (0..t.len()).map(|_| if rng.random::<f64>() < p { 0.0 } else { scale }).collect();
        let data = t.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let out = Tensor::new(t.shape().to_vec(), data);
        self.push(out, Node::Dropout { x, mask })
    }

    /// Affine map: `x[B,Fin] . w[Fout,Fin]^T + b[Fout]`.
    pub fn dense(&mut self, x: VarId, w: VarId, b: VarId) -> Result<VarId, NnError> {
        let (xs, ws, bs) = (self.val(x).shape(), self.val(w).shape(), self.val(b).shape());
        if xs.len() != 2 || ws.len() != 2 || bs.len() != 1 || xs[1] != ws[1] || ws[0] != bs[0] {
            return Err(NnError::ShapeMismatch(format!(
                "dense expects x[B,Fin], w[Fout,Fin], b[Fout]; got {xs:?}, {ws:?}, {bs:?}"
            )));
        }
        let (batch, fin, fout) = (xs[0], xs[1], ws[0]);
        let xv = self.val(x).data();
        let wv = self.val(w).data();
        let bv = self.val(b).data();
        // Feature-major loop so each weight row streams through memory once;
        // the batch rows stay cache-resident across the sweep. The transposed
        // scratch is tiny next to the weight matrix.
        let mut out_t = vec![0.0; fout * batch];
        out_t.par_chunks_mut(batch).enumerate().for_each(|(of, col)| {
            let wrow = &wv[of * fin..(of + 1) * fin];
            for (bi, ov) in col.iter_mut().enumerate() {
                *ov = bv[of] + dot(&xv[bi * fin..(bi + 1) * fin], wrow);
            }
        });
        let mut out = vec![0.0; batch * fout];
        for bi in 0..batch {
            for of in 0..fout {
                out[bi * fout + of] = out_t[of * batch + bi];
            }
        }
        Ok(self.push(Tensor::new(vec![batch, fout], out), Node::Dense { x, w, b }))
    }

    /// Elementwise sum of two same-shape values (residual connections).
    pub fn add(&mut self, a: VarId, b: VarId) -> Result<VarId, NnError> {
        if self.val(a).shape() != self.val(b).shape() {
            return Err(NnError::ShapeMismatch(format!(
                "add shapes differ: {:?} vs {:?}",
                self.val(a).shape(),
                self.val(b).shape()
            )));
        }
        let data = self
            .val(a)
            .data()
            .iter()
            .zip(self.val(b).data())
            .map(|(&x, &y)| x + y)
            .collect();
        let out = Tensor::new(self.val(a).shape().to_vec(), data);
        Ok(self.push(out, Node::Add { a, b }))
    }

    /// Concatenates two `[B, C, L]` maps along the channel axis.
    pub fn concat_channels(&mut self, a: VarId, b: VarId) -> Result<VarId, NnError> {
        let (sa, sb) = (self.val(a).shape().to_vec(), self.val(b).shape().to_vec());
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] || sa[2] != sb[2] {
            return Err(NnError::ShapeMismatch(format!("concat shapes: {sa:?} vs {sb:?}")));
        }
        let (batch, ca, cb, len) = (sa[0], sa[1], sb[1], sa[2]);
        let av = self.val(a).data();
        let bv = self.val(b).data();
        let mut out = Vec::with_capacity(batch * (ca + cb) * len);
        for bi in 0..batch {
            out.extend_from_slice(&av[bi * ca * len..(bi + 1) * ca * len]);
            out.extend_from_slice(&bv[bi * cb * len..(bi + 1) * cb * len]);
        }
        Ok(self.push(
            Tensor::new(vec![batch, ca + cb, len], out),
            Node::ConcatChannels { a, b },
        ))
    }

    /// Reshapes to `[B, prod(rest)]` keeping the batch axis.
    pub fn flatten(&mut self, x: VarId) -> VarId {
        let t = self.val(x);
        let batch = t.shape()[0];
        let rest: usize = t.shape()[1..].iter().product();
        let out = Tensor::new(vec![batch, rest], t.data().to_vec());
        self.push(out, Node::Reshape { x })
    }

    /// Mean over all trailing axes after the channel: `[B, C, ...] -> [B, C]`.
    pub fn global_avg_pool(&mut self, x: VarId) -> Result<VarId, NnError> {
        let xs = self.val(x).shape().to_vec();
        if xs.len() < 3 {
            return Err(NnError::ShapeMismatch(format!("global_avg_pool expects rank >= 3, got {xs:?}")));
        }
        let (batch, ch) = (xs[0], xs[1]);
        let inner: usize = xs[2..].iter().product();
        let xv = self.val(x).data();
        let mut out = vec![0.0; batch * ch];
        for bc in 0..batch * ch {
            let base = bc * inner;
            out[bc] = xv[base..base + inner].iter().sum::<f64>() / inner as f64;
        }
        Ok(self.push(Tensor::new(vec![batch, ch], out), Node::GlobalAvgPool { x }))
    }

    /// Projects each row of `[B, E]` onto the unit hypersphere. Kept behind
    /// a config flag; the default training path does not normalize.
    pub fn l2_normalize(&mut self, x: VarId) -> Result<VarId, NnError> {
        let xs = self.val(x).shape().to_vec();
        if xs.len() != 2 {
            return Err(NnError::ShapeMismatch(format!("l2_normalize expects [B,E], got {xs:?}")));
        }
        let (batch, dim) = (xs[0], xs[1]);
        let xv = self.val(x).data();
        let mut out = vec![0.0; batch * dim];
        let mut norms = vec![0.0; batch];
        for b in 0..batch {
            let row = &xv[b * dim..(b + 1) * dim];
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            norms[b] = norm;
            for (o, &v) in out[b * dim..(b + 1) * dim].iter_mut().zip(row) {
                *o = v / norm;
            }
        }
        Ok(self.push(Tensor::new(xs, out), Node::L2Normalize { x, norms }))
    }

    /// Mean contrastive loss over a batch of embedding pairs:
    /// `(1-y) D^2 + y max(0, m - D)^2` with Euclidean `D`.
    pub fn contrastive_loss(
        &mut self,
        h1: VarId,
        h2: VarId,
        labels: &[u8],
        margin: f64,
    ) -> Result<VarId, NnError> {
        let (s1, s2) = (self.val(h1).shape().to_vec(), self.val(h2).shape().to_vec());
        if s1.len() != 2 || s1 != s2 || s1[0] != labels.len() {
            return Err(NnError::ShapeMismatch(format!(
                "contrastive_loss: h1{s1:?} h2{s2:?} labels {}",
                labels.len()
            )));
        }
        let (batch, dim) = (s1[0], s1[1]);
        let av = self.val(h1).data();
        let bv = self.val(h2).data();
        let mut dists = vec![0.0; batch];
        let mut loss = 0.0;
        for i in 0..batch {
            let mut sq = 0.0;
            for d in 0..dim {
                let diff = av[i * dim + d] - bv[i * dim + d];
                sq += diff * diff;
            }
            let dist = sq.sqrt();
            dists[i] = dist;
            loss += if labels[i] == 0 { sq } else { (margin - dist).max(0.0).powi(2) };
        }
        loss /= batch as f64;
        Ok(self.push(
            Tensor::scalar(loss),
            Node::Contrastive { h1, h2, labels: labels.to_vec(), margin, dists },
        ))
    }

    /// Mean triplet hinge over a batch: `max(0, d(a,p) - d(a,n) + m)`.
    pub fn triplet_loss(
        &mut self,
        a: VarId,
        p: VarId,
        n: VarId,
        margin: f64,
    ) -> Result<VarId, NnError> {
        let (sa, sp, sn) =
            (self.val(a).shape().to_vec(), self.val(p).shape().to_vec(), self.val(n).shape().to_vec());
        if sa.len() != 2 || sa != sp || sa != sn {
            return Err(NnError::ShapeMismatch(format!("triplet_loss: a{sa:?} p{sp:?} n{sn:?}")));
        }
        let (batch, dim) = (sa[0], sa[1]);
        let (av, pv, nv) = (self.val(a).data(), self.val(p).data(), self.val(n).data());
        let dist = |u: &[f64], v: &[f64], i: usize| -> f64 {
            let mut sq = 0.0;
            for d in 0..dim {
                let diff = u[i * dim + d] - v[i * dim + d];
                sq += diff * diff;
            }
            sq.sqrt()
        };
        let mut dap = vec![0.0; batch];
        let mut dan = vec![0.0; batch];
        let mut loss = 0.0;
        for i in 0..batch {
            dap[i] = dist(av, pv, i);
            dan[i] = dist(av, nv, i);
            loss += (dap[i] - dan[i] + margin).max(0.0);
        }
        loss /= batch as f64;
        Ok(self.push(Tensor::scalar(loss), Node::Triplet { a, p, n, margin, dap, dan }))
    }

    // ---- backward ------------------------------------------------------

    /// Reverse-mode pass from a scalar root (seed gradient 1).
    pub fn backward(&mut self, root: VarId) -> Result<Gradients, NnError> {
        if self.consumed || self.nodes.is_empty() || root.0 >= self.nodes.len() {
            return Err(NnError::GraphNotRecorded);
        }
        let seed = Tensor::new(self.val(root).shape().to_vec(), vec![1.0; self.val(root).len()]);
        self.backward_with(root, seed)
    }

    /// Reverse-mode pass seeded with explicit upstream gradients at `root`.
    pub fn backward_with(&mut self, root: VarId, seed: Tensor) -> Result<Gradients, NnError> {
        if self.consumed || self.nodes.is_empty() || root.0 >= self.nodes.len() {
            return Err(NnError::GraphNotRecorded);
        }
        if seed.shape() != self.val(root).shape() {
            return Err(NnError::ShapeMismatch("backward seed shape mismatch".into()));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(seed);

        for idx in (0..self.nodes.len()).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], target: VarId, delta: Vec<f64>) {
        let shape = self.val(target).shape().to_vec();
        match &mut grads[target.0] {
            Some(t) => {
                for (a, d) in t.data_mut().iter_mut().zip(&delta) {
                    *a += d;
                }
            }
            slot @ None => *slot = Some(Tensor::new(shape, delta)),
        }
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &self.nodes[idx] {
            Node::Leaf => {}
            Node::Reshape { x } => {
                self.accumulate(grads, *x, g.data().to_vec());
            }
            Node::Relu { x } => {
                let xv = self.val(*x).data();
                let delta = g.data().iter().zip(xv).map(|(&gi, &xi)| if xi > 0.0 { gi } else { 0.0 }).collect();
                self.accumulate(grads, *x, delta);
            }
            Node::Dropout { x, mask } => {
                let delta = g.data().iter().zip(mask).map(|(&gi, &m)| gi * m).collect();
                self.accumulate(grads, *x, delta);
            }
            Node::Add { a, b } => {
                self.accumulate(grads, *a, g.data().to_vec());
                self.accumulate(grads, *b, g.data().to_vec());
            }
            Node::GlobalAvgPool { x } => {
                let xs = self.val(*x).shape();
                let (batch, ch) = (xs[0], xs[1]);
                let inner: usize = xs[2..].iter().product();
                let mut delta = vec![0.0; self.val(*x).len()];
                for bc in 0..batch * ch {
                    let gv = g.data()[bc] / inner as f64;
                    for i in 0..inner {
                        delta[bc * inner + i] = gv;
                    }
                }
                self.accumulate(grads, *x, delta);
            }
            Node::MaxPool1d { x, argmax } | Node::MaxPool2d { x, argmax } => {
                let mut delta = vec![0.0; self.val(*x).len()];
                for (o, &src) in argmax.iter().enumerate() {
                    delta[src] += g.data()[o];
                }
                self.accumulate(grads, *x, delta);
            }
            Node::ConcatChannels { a, b } => {
                let (sa, sb) = (self.val(*a).shape(), self.val(*b).shape());
                let (batch, ca, cb, len) = (sa[0], sa[1], sb[1], sa[2]);
                let mut da = vec![0.0; batch * ca * len];
                let mut db = vec![0.0; batch * cb * len];
                let row = (ca + cb) * len;
                for bi in 0..batch {
                    da[bi * ca * len..(bi + 1) * ca * len]
                        .copy_from_slice(&g.data()[bi * row..bi * row + ca * len]);
                    db[bi * cb * len..(bi + 1) * cb * len]
                        .copy_from_slice(&g.data()[bi * row + ca * len..(bi + 1) * row]);
                }
                self.accumulate(grads, *a, da);
                self.accumulate(grads, *b, db);
            }
            Node::Dense { x, w, b } => {
                let xs = self.val(*x).shape();
                let ws = self.val(*w).shape();
                let (batch, fin, fout) = (xs[0], xs[1], ws[0]);
                let xv = self.val(*x).data();
                let wv = self.val(*w).data();
                let gv = g.data();

                // Batch rows are split into slabs so each thread streams the
                // weight matrix once; per-element accumulation order stays
                // feature-ascending no matter how the slabs are scheduled.
                let slab_rows = batch.div_ceil(rayon::current_num_threads().max(1)).max(1);
                let mut dx = vec![0.0; batch * fin];
                dx.par_chunks_mut(slab_rows * fin).enumerate().for_each(|(ci, slab)| {
                    let b0 = ci * slab_rows;
                    let rows = slab.len() / fin;
                    for of in 0..fout {
                        let wrow = &wv[of * fin..(of + 1) * fin];
                        for r in 0..rows {
                            let gi = gv[(b0 + r) * fout + of];
                            if gi != 0.0 {
                                axpy(gi, wrow, &mut slab[r * fin..(r + 1) * fin]);
                            }
                        }
                    }
                });
                let mut dw = vec![0.0; fout * fin];
                dw.par_chunks_mut(fin).enumerate().for_each(|(of, dwrow)| {
                    for bi in 0..batch {
                        let gi = gv[bi * fout + of];
                        if gi != 0.0 {
                            axpy(gi, &xv[bi * fin..(bi + 1) * fin], dwrow);
                        }
                    }
                });
                let mut db = vec![0.0; fout];
                for of in 0..fout {
                    for bi in 0..batch {
                        db[of] += gv[bi * fout + of];
                    }
                }
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *w, dw);
                self.accumulate(grads, *b, db);
            }
            Node::Conv1d { x, w, b, stride, pad } => {
                let xs = self.val(*x).shape();
                let ws = self.val(*w).shape();
                let (batch, in_ch, len) = (xs[0], xs[1], xs[2]);
                let (out_ch, _, k) = (ws[0], ws[1], ws[2]);
                let out_len = (len + 2 * pad - k) / stride + 1;
                let xv = self.val(*x).data();
                let wv = self.val(*w).data();
                let gv = g.data();

                let mut dx = vec![0.0; batch * in_ch * len];
                dx.par_chunks_mut(in_ch * len).enumerate().for_each(|(bi, dxrow)| {
                    for oc in 0..out_ch {
                        let grow = &gv[(bi * out_ch + oc) * out_len..(bi * out_ch + oc + 1) * out_len];
                        for ic in 0..in_ch {
                            let dxi = &mut dxrow[ic * len..(ic + 1) * len];
                            for kk in 0..k {
                                let wgt = wv[(oc * in_ch + ic) * k + kk];
                                if wgt == 0.0 {
                                    continue;
                                }
                                let shift = kk as isize - *pad as isize;
                                let (lo, hi) = conv_span(out_len, *stride, shift, len);
                                if lo >= hi {
                                    continue;
                                }
                                if *stride == 1 {
                                    let src = (lo as isize + shift) as usize;
                                    axpy(wgt, &grow[lo..hi], &mut dxi[src..src + (hi - lo)]);
                                } else {
                                    for (l, &gl) in grow[lo..hi].iter().enumerate() {
                                        let src = ((lo + l) * stride) as isize + shift;
                                        dxi[src as usize] += wgt * gl;
                                    }
                                }
                            }
                        }
                    }
                });
                let mut dw = vec![0.0; out_ch * in_ch * k];
                dw.par_chunks_mut(in_ch * k).enumerate().for_each(|(oc, dwrow)| {
                    for bi in 0..batch {
                        let grow = &gv[(bi * out_ch + oc) * out_len..(bi * out_ch + oc + 1) * out_len];
                        for ic in 0..in_ch {
                            let xi = &xv[(bi * in_ch + ic) * len..(bi * in_ch + ic + 1) * len];
                            for kk in 0..k {
                                let shift = kk as isize - *pad as isize;
                                let (lo, hi) = conv_span(out_len, *stride, shift, len);
                                if lo >= hi {
                                    continue;
                                }
                                let acc = if *stride == 1 {
                                    let src = (lo as isize + shift) as usize;
                                    dot(&grow[lo..hi], &xi[src..src + (hi - lo)])
                                } else {
                                    let mut acc = 0.0;
                                    for (l, &gl) in grow[lo..hi].iter().enumerate() {
                                        let src = ((lo + l) * stride) as isize + shift;
                                        acc += gl * xi[src as usize];
                                    }
                                    acc
                                };
                                dwrow[ic * k + kk] += acc;
                            }
                        }
                    }
                });
                let mut db = vec![0.0; out_ch];
                for oc in 0..out_ch {
                    for bi in 0..batch {
                        let grow = &gv[(bi * out_ch + oc) * out_len..(bi * out_ch + oc + 1) * out_len];
                        db[oc] += grow.iter().sum::<f64>();
                    }
                }
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *w, dw);
                self.accumulate(grads, *b, db);
            }
            Node::Conv2d { x, w, b, stride, pad } => {
                let xs = self.val(*x).shape();
                let ws = self.val(*w).shape();
                let (batch, in_ch, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
                let (out_ch, _, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
                let oh = (h + 2 * pad - kh) / stride + 1;
                let ow = (wd + 2 * pad - kw) / stride + 1;
                let xv = self.val(*x).data();
                let wv = self.val(*w).data();
                let gv = g.data();

                let mut dx = vec![0.0; batch * in_ch * h * wd];
                let mut dw = vec![0.0; out_ch * in_ch * kh * kw];
                let mut db = vec![0.0; out_ch];
                for bi in 0..batch {
                    for oc in 0..out_ch {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let gl = gv[((bi * out_ch + oc) * oh + oy) * ow + ox];
                                if gl == 0.0 {
                                    continue;
                                }
                                db[oc] += gl;
                                for ic in 0..in_ch {
                                    for ky in 0..kh {
                                        let sy = (oy * stride + ky) as isize - *pad as isize;
                                        if sy < 0 || sy as usize >= h {
                                            continue;
                                        }
                                        for kx in 0..kw {
                                            let sx = (ox * stride + kx) as isize - *pad as isize;
                                            if sx < 0 || sx as usize >= wd {
                                                continue;
                                            }
                                            let xidx = ((bi * in_ch + ic) * h + sy as usize) * wd + sx as usize;
                                            let widx = ((oc * in_ch + ic) * kh + ky) * kw + kx;
                                            dx[xidx] += gl * wv[widx];
                                            dw[widx] += gl * xv[xidx];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *w, dw);
                self.accumulate(grads, *b, db);
            }
            Node::BatchNorm1d { x, gamma, beta, mean, var, eps, batch_stats } => {
                let xs = self.val(*x).shape();
                let (batch, ch) = (xs[0], xs[1]);
                let inner: usize = xs[2..].iter().product();
                let n = (batch * inner) as f64;
                let xv = self.val(*x).data();
                let gam = self.val(*gamma).data();
                let gv = g.data();

                let mut dgamma = vec![0.0; ch];
                let mut dbeta = vec![0.0; ch];
                let mut dx = vec![0.0; xv.len()];
                for c in 0..ch {
                    let inv = 1.0 / (var[c] + eps).sqrt();
                    // Channel-wise reductions of g and g*x_hat.
                    let mut sum_g = 0.0;
                    let mut sum_gx = 0.0;
                    for b in 0..batch {
                        let base = (b * ch + c) * inner;
                        for i in 0..inner {
                            let xhat = (xv[base + i] - mean[c]) * inv;
                            sum_g += gv[base + i];
                            sum_gx += gv[base + i] * xhat;
                        }
                    }
                    dgamma[c] = sum_gx;
                    dbeta[c] = sum_g;
                    // With batch statistics the mean/variance depend on x;
                    // with running statistics the op is a fixed affine map.
                    let (mg, mgx) = if *batch_stats { (sum_g / n, sum_gx / n) } else { (0.0, 0.0) };
                    for b in 0..batch {
                        let base = (b * ch + c) * inner;
                        for i in 0..inner {
                            let xhat = (xv[base + i] - mean[c]) * inv;
                            dx[base + i] = gam[c] * inv * (gv[base + i] - mg - xhat * mgx);
                        }
                    }
                }
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *gamma, dgamma);
                self.accumulate(grads, *beta, dbeta);
            }
            Node::L2Normalize { x, norms } => {
                // y = x / |x|, so dL/dx = (g - y (g . y)) / |x|.
                let xs = self.val(*x).shape();
                let (batch, dim) = (xs[0], xs[1]);
                let xv = self.val(*x).data();
                let gv = g.data();
                let mut dx = vec![0.0; xv.len()];
                for b in 0..batch {
                    let row = &xv[b * dim..(b + 1) * dim];
                    let grow = &gv[b * dim..(b + 1) * dim];
                    let norm = norms[b];
                    let gy: f64 =
                        row.iter().zip(grow).map(|(&xd, &gd)| xd * gd).sum::<f64>() / norm;
                    for d in 0..dim {
                        let y = row[d] / norm;
                        dx[b * dim + d] = (grow[d] - y * gy) / norm;
                    }
                }
                self.accumulate(grads, *x, dx);
            }
            Node::Contrastive { h1, h2, labels, margin, dists } => {
                let xs = self.val(*h1).shape();
                let (batch, dim) = (xs[0], xs[1]);
                let av = self.val(*h1).data();
                let bv = self.val(*h2).data();
                let gs = g.data()[0];
                let scale = gs / batch as f64;
                let mut d1 = vec![0.0; batch * dim];
                let mut d2 = vec![0.0; batch * dim];
                for i in 0..batch {
                    let dist = dists[i];
                    if labels[i] == 0 {
                        for d in 0..dim {
                            let diff = av[i * dim + d] - bv[i * dim + d];
                            d1[i * dim + d] = 2.0 * diff * scale;
                            d2[i * dim + d] = -2.0 * diff * scale;
                        }
                    } else if dist < *margin && dist > 0.0 {
                        // d/dh1 of (m - D)^2 = -2 (m - D) (h1 - h2) / D;
                        // the kink at D = m and the cusp at D = 0 take
                        // subgradient 0.
                        let coef = -2.0 * (margin - dist) / dist * scale;
                        for d in 0..dim {
                            let diff = av[i * dim + d] - bv[i * dim + d];
                            d1[i * dim + d] = coef * diff;
                            d2[i * dim + d] = -coef * diff;
                        }
                    }
                }
                self.accumulate(grads, *h1, d1);
                self.accumulate(grads, *h2, d2);
            }
            Node::Triplet { a, p, n, margin, dap, dan } => {
                let xs = self.val(*a).shape();
                let (batch, dim) = (xs[0], xs[1]);
                let av = self.val(*a).data();
                let pv = self.val(*p).data();
                let nv = self.val(*n).data();
                let gs = g.data()[0];
                let scale = gs / batch as f64;
                let mut da = vec![0.0; batch * dim];
                let mut dp = vec![0.0; batch * dim];
                let mut dn = vec![0.0; batch * dim];
                for i in 0..batch {
                    if dap[i] - dan[i] + margin <= 0.0 {
                        continue;
                    }
                    if dap[i] > 0.0 {
                        for d in 0..dim {
                            let diff = (av[i * dim + d] - pv[i * dim + d]) / dap[i];
                            da[i * dim + d] += diff * scale;
                            dp[i * dim + d] -= diff * scale;
                        }
                    }
                    if dan[i] > 0.0 {
                        for d in 0..dim {
                            let diff = (av[i * dim + d] - nv[i * dim + d]) / dan[i];
                            da[i * dim + d] -= diff * scale;
                            dn[i * dim + d] += diff * scale;
                        }
                    }
                }
                self.accumulate(grads, *a, da);
                self.accumulate(grads, *p, dp);
                self.accumulate(grads, *n, dn);
            }
        }
    }
}
