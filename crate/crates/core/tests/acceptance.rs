//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured numbers. Independent oracles (naive references, finite
//! differences, exhaustive enumeration) live in this file, not in the
//! library.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sigshell::dataset::{
    generate_pairs, split_writers, synth_generate, DatasetTag, Kind, LoadedManifest, PairConfig,
    PairRow, SignatureRecord, SplitMode, SynthConfig, TripletRow,
};
use sigshell::eval::{auc, classify_threshold, metrics, roc_curve, ConfusionMatrix};
use sigshell::metric::{
    embed_pairs, train, Arch, LossKind, Model, ModelConfig, SampleStore, TrainConfig,
    PAPER_BATCH_SIZE, PAPER_EPOCHS, PAPER_LEARNING_RATE, PAPER_MARGIN,
};
use sigshell::nn::{
    save_checkpoint, BnRunning, Mode, OptimizerKind, ParamStore, Tape, Tensor, VarId,
};
use sigshell::raster::{load_gray, otsu_binarize, preprocess_signature, BinaryImage, GrayImage};
use sigshell::shells::{
    cleaned_mask, extract_shells_pruned, pressure_map, thickness, write_record, ShellRecord,
};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

/// Desk-scale trainings run one at a time so their wall-clock measurements
/// are not distorted by each other.
static DESK_LOCK: Mutex<()> = Mutex::new(());

// ---------------------------------------------------------------------
// C1: the worked convolution example, exactly.
// ---------------------------------------------------------------------

#[test]
fn criterion_01_worked_convolution_example() {
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let x = tape.input(Tensor::new(
        vec![1, 1, 4, 4],
        vec![2., 3., 0., 1., 1., 5., 2., 3., 4., 0., 1., 2., 3., 2., 4., 1.],
    ));
    let k = tape.input(Tensor::new(vec![1, 1, 2, 2], vec![0., 1., -1., 0.]));
    let b = tape.input(Tensor::zeros(vec![1]));
    let out = tape.conv2d(x, k, b, 1, 0).unwrap();
    let expected = [2., -5., -1., 1., 2., 2., -3., -1., -2.];
    assert_eq!(tape.val(out).shape(), &[1, 1, 3, 3]);
    assert_eq!(tape.val(out).data(), &expected, "zero tolerance");
    println!("[PASS] C1: 4x4 * 2x2 valid convolution reproduces the worked example exactly");
}

// ---------------------------------------------------------------------
// C2: the worked max-pool example, exactly.
// ---------------------------------------------------------------------

#[test]
fn criterion_02_worked_maxpool_example() {
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let x = tape.input(Tensor::new(
        vec![1, 1, 4, 4],
        vec![2., -5., -1., 3., 1., 2., 2., 0., -3., -1., -2., 4., 0., 1., 3., -2.],
    ));
    let out = tape.maxpool2d(x, 2, 2).unwrap();
    assert_eq!(tape.val(out).data(), &[2., 3., 1., 4.], "zero tolerance");
    println!("[PASS] C2: 2x2/stride-2 max pooling reproduces the worked example exactly");
}

// ---------------------------------------------------------------------
// C3: confusion-metric arithmetic on the published figure counts.
// ---------------------------------------------------------------------

#[test]
fn criterion_03_confusion_metric_arithmetic() {
    let cm = ConfusionMatrix { tp: 2336, fp: 319, fn_: 390, tn: 2229 };
    let m = metrics(&cm);
    let accuracy = m.accuracy;
    let precision = m.precision.unwrap();
    let recall = m.recall.unwrap();
    assert!((accuracy - 0.8656).abs() <= 1e-4, "accuracy {accuracy}");
    assert!((precision - 0.8798).abs() <= 1e-4, "precision {precision}");
    assert!((recall - 0.8569).abs() <= 1e-4, "recall {recall}");
    println!(
        "[PASS] C3: counts 2336/319/390/2229 give accuracy {accuracy:.6}, precision {precision:.6}, recall {recall:.6} (all within 1e-4)"
    );
}

// ---------------------------------------------------------------------
// C4: OTSU equals exhaustive argmax on 100 random images.
// ---------------------------------------------------------------------

/// Exhaustive oracle: recount both classes at every threshold and compare
/// exact integer rationals (s0*n1 - s1*n0)^2 / (n0*n1); lowest threshold
/// wins ties.
fn otsu_oracle(img: &GrayImage) -> Option<u8> {
    let mut best: Option<(u8, u128, u128)> = None;
    for t in 0u16..=255 {
        let (mut n0, mut s0, mut n1, mut s1) = (0u64, 0u64, 0u64, 0u64);
        for &v in img.data() {
            if v as u16 <= t {
                n0 += 1;
                s0 += v as u64;
            } else {
                n1 += 1;
                s1 += v as u64;
            }
        }
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = (s0 as i128) * (n1 as i128) - (s1 as i128) * (n0 as i128);
        let (num, den) = ((diff * diff) as u128, (n0 as u128) * (n1 as u128));
        let better = match &best {
            None => true,
            Some((_, bn, bd)) => num * bd > *bn * den,
        };
        if better {
            best = Some((t as u8, num, den));
        }
    }
    best.map(|(t, _, _)| t)
}

#[test]
fn criterion_04_otsu_equals_exhaustive_argmax() {
    let mut checked = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let img = GrayImage::from_raw(8, 8, (0..64).map(|_| rng.random()).collect());
        let expected = otsu_oracle(&img).expect("random images are not constant");
        let (_, got) = otsu_binarize(&img).unwrap();
        assert_eq!(got, expected, "seed {seed}");
        checked += 1;
    }
    println!("[PASS] C4: OTSU threshold equals brute-force argmax on {checked}/100 random 8x8 images (exact)");
}

// ---------------------------------------------------------------------
// C5: shell extraction equals a naive per-column reference.
// ---------------------------------------------------------------------

/// Fully independent reimplementation of the extraction pipeline.
mod shell_reference {
    pub struct RefShells {
        pub rows: [Vec<u16>; 6],
        pub valid: [Vec<bool>; 6],
    }

    type Grid = Vec<Vec<u8>>;

    fn to_grid(data: &[u8], h: usize, w: usize) -> Grid {
        (0..h).map(|r| data[r * w..(r + 1) * w].to_vec()).collect()
    }

    fn erode(g: &Grid) -> Grid {
        let (h, w) = (g.len(), g[0].len());
        let mut out = vec![vec![0u8; w]; h];
        for r in 0..h {
            for c in 0..w {
                let neighbors_ok = r > 0
                    && r + 1 < h
                    && c > 0
                    && c + 1 < w
                    && g[r][c] == 1
                    && g[r - 1][c] == 1
                    && g[r + 1][c] == 1
                    && g[r][c - 1] == 1
                    && g[r][c + 1] == 1;
                if neighbors_ok {
                    out[r][c] = 1;
                }
            }
        }
        out
    }

    fn dilate(g: &Grid) -> Grid {
        let (h, w) = (g.len(), g[0].len());
        let mut out = vec![vec![0u8; w]; h];
        for r in 0..h {
            for c in 0..w {
                if g[r][c] == 0 {
                    continue;
                }
                out[r][c] = 1;
                if r > 0 {
                    out[r - 1][c] = 1;
                }
                if r + 1 < h {
                    out[r + 1][c] = 1;
                }
                if c > 0 {
                    out[r][c - 1] = 1;
                }
                if c + 1 < w {
                    out[r][c + 1] = 1;
                }
            }
        }
        out
    }

    fn fill_small_holes(g: &Grid, cap: usize) -> Grid {
        let (h, w) = (g.len(), g[0].len());
        let mut out = g.clone();
        let mut seen = vec![vec![false; w]; h];
        for r0 in 0..h {
            for c0 in 0..w {
                if seen[r0][c0] || g[r0][c0] != 0 {
                    continue;
                }
                // Gather this background component breadth-first.
                let mut queue = vec![(r0, c0)];
                seen[r0][c0] = true;
                let mut comp = Vec::new();
                let mut touches_border = false;
                while let Some((r, c)) = queue.pop() {
                    comp.push((r, c));
                    if r == 0 || c == 0 || r == h - 1 || c == w - 1 {
                        touches_border = true;
                    }
                    for (rr, cc) in [
                        (r.wrapping_sub(1), c),
                        (r + 1, c),
                        (r, c.wrapping_sub(1)),
                        (r, c + 1),
                    ] {
                        if rr < h && cc < w && !seen[rr][cc] && g[rr][cc] == 0 {
                            seen[rr][cc] = true;
                            queue.push((rr, cc));
                        }
                    }
                }
                if !touches_border && comp.len() <= cap {
                    for (r, c) in comp {
                        out[r][c] = 1;
                    }
                }
            }
        }
        out
    }

    fn is_empty(g: &Grid) -> bool {
        g.iter().all(|row| row.iter().all(|&v| v == 0))
    }

    fn cleaned(data: &[u8], h: usize, w: usize, cap: usize) -> Grid {
        let g = to_grid(data, h, w);
        let opened = dilate(&erode(&g));
        let filled = fill_small_holes(&opened, cap);
        if is_empty(&filled) && !is_empty(&g) {
            fill_small_holes(&g, cap)
        } else {
            filled
        }
    }

    fn column(g: &Grid, c: usize) -> Vec<u8> {
        g.iter().map(|row| row[c]).collect()
    }

    /// Contour pair for one ribbon column in the flipped frame:
    /// shell_s = H-1-min(row), shell_i = H-1-max(row).
    fn column_contours(col: &[u8]) -> Option<(u16, u16)> {
        let min_row = col.iter().position(|&v| v == 1)?;
        let max_row = col.iter().rposition(|&v| v == 1)?;
        let h = col.len();
        Some(((h - 1 - min_row) as u16, (h - 1 - max_row) as u16))
    }

    pub fn extract(data: &[u8], h: usize, w: usize, cap: usize) -> Option<RefShells> {
        let mask = cleaned(data, h, w, cap);
        if is_empty(&mask) {
            return None;
        }
        let mut rows: [Vec<u16>; 6] = Default::default();
        let mut valid: [Vec<bool>; 6] = Default::default();
        for i in 0..6 {
            rows[i] = vec![0; w];
            valid[i] = vec![false; w];
        }
        for c in 0..w {
            let col = column(&mask, c);
            // Superior ribbon: contiguous run from the topmost ink pixel.
            let sup: Vec<u8> = match col.iter().position(|&v| v == 1) {
                Some(top) => {
                    let mut out = vec![0u8; h];
                    let mut r = top;
                    while r < h && col[r] == 1 {
                        out[r] = 1;
                        r += 1;
                    }
                    out
                }
                None => vec![0u8; h],
            };
            // Inferior ribbon: contiguous run up from the bottommost pixel.
            let inf: Vec<u8> = match col.iter().rposition(|&v| v == 1) {
                Some(bottom) => {
                    let mut out = vec![0u8; h];
                    let mut r = bottom as isize;
                    while r >= 0 && col[r as usize] == 1 {
                        out[r as usize] = 1;
                        r -= 1;
                    }
                    out
                }
                None => vec![0u8; h],
            };
            let res: Vec<u8> = (0..h)
                .map(|r| col[r] & !(sup[r] | inf[r]) & 1)
                .collect();

            for (slot, ribbon) in [(0usize, &sup), (2, &inf), (4, &res)] {
                if let Some((s, i)) = column_contours(ribbon) {
                    rows[slot][c] = s;
                    rows[slot + 1][c] = i;
                    valid[slot][c] = true;
                    valid[slot + 1][c] = true;
                }
            }
        }
        Some(RefShells { rows, valid })
    }
}

#[test]
fn criterion_05_shell_extraction_matches_naive_reference() {
    let start = Instant::now();
    let mut compared = 0;
    let mut empty = 0;
    for seed in 0..200u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let density = 0.15 + 0.5 * (seed as f64 / 200.0);
        let data: Vec<u8> =
            (0..32 * 32).map(|_| u8::from(rng.random::<f64>() < density)).collect();
        let mask = BinaryImage::from_raw(32, 32, data.clone());

        let reference = shell_reference::extract(&data, 32, 32, 4);
        let cleaned = cleaned_mask(&mask, 4);
        match (extract_shells_pruned(&cleaned), reference) {
            (Ok(got), Some(expect)) => {
                for s in 0..6 {
                    assert_eq!(got.rows(s), &expect.rows[s][..], "seed {seed} shell {s}");
                    assert_eq!(got.valid(s), &expect.valid[s][..], "seed {seed} valid {s}");
                }
                compared += 1;
            }
            (Err(_), None) => empty += 1,
            (got, expect) => panic!(
                "seed {seed}: implementation and reference disagree about emptiness: {} vs {}",
                got.is_ok(),
                expect.is_some()
            ),
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10 s");
    println!(
        "[PASS] C5: all six shell outputs equal the naive reference on {compared} masks ({empty} empty) in {elapsed:?} (< 10 s)"
    );
}

// ---------------------------------------------------------------------
// C6: finite-difference gradient checks for every layer and both losses.
// ---------------------------------------------------------------------

fn rand_tensor(shape: Vec<usize>, lo: f64, hi: f64, rng: &mut ChaCha20Rng) -> Tensor {
    let len = shape.iter().product();
    Tensor::new(shape, (0..len).map(|_| rng.random_range(lo..hi)).collect())
}

/// Central finite differences against the tape's reverse-mode gradients.
/// The op output reduces to a scalar via a fixed random projection (also
/// the backward seed). Returns the worst relative error over the probes.
fn fd_max_rel_err<F>(inputs: Vec<Tensor>, probes: usize, seed: u64, build: F) -> f64
where
    F: Fn(&mut Tape, &[VarId]) -> VarId,
{
    let store = ParamStore::new();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    let eval = |tensors: &[Tensor], proj: Option<&Tensor>| -> (f64, Option<Vec<Vec<f64>>>, Vec<usize>) {
        let mut tape = Tape::new(&store);
        let vars: Vec<VarId> = tensors.iter().map(|t| tape.input(t.clone())).collect();
        let out = build(&mut tape, &vars);
        let shape = tape.val(out).shape().to_vec();
        match proj {
            Some(p) => {
                let loss: f64 =
                    tape.val(out).data().iter().zip(p.data()).map(|(&o, &w)| o * w).sum();
                let grads = tape.backward_with(out, p.clone()).unwrap();
                let per_input = vars
                    .iter()
                    .map(|&v| grads.get(v).map(|t| t.data().to_vec()).unwrap_or_default())
                    .collect();
                (loss, Some(per_input), shape)
            }
            None => (0.0, None, shape),
        }
    };

    let (_, _, out_shape) = eval(&inputs, None);
    let proj = rand_tensor(out_shape, -1.0, 1.0, &mut rng);
    let (_, analytic, _) = eval(&inputs, Some(&proj));
    let analytic = analytic.unwrap();

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let per_input = probes.div_ceil(inputs.len());
    for (ti, tensor) in inputs.iter().enumerate() {
        for _ in 0..per_input {
            let idx = rng.random_range(0..tensor.len());
            let mut plus = inputs.clone();
            plus[ti].data_mut()[idx] += h;
            let mut minus = inputs.clone();
            minus[ti].data_mut()[idx] -= h;
            let (lp, _, _) = eval(&plus, Some(&proj));
            let (lm, _, _) = eval(&minus, Some(&proj));
            let numeric = (lp - lm) / (2.0 * h);
            let exact = if analytic[ti].is_empty() { 0.0 } else { analytic[ti][idx] };
            let rel = (numeric - exact).abs() / (numeric.abs() + exact.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    worst
}

#[test]
fn criterion_06_gradient_checks_every_layer_and_both_losses() {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(1000);
    let mut results: Vec<(&str, f64)> = Vec::new();

    let x = rand_tensor(vec![2, 3, 10], -1.0, 1.0, &mut rng);
    let w = rand_tensor(vec![4, 3, 3], -1.0, 1.0, &mut rng);
    let b = rand_tensor(vec![4], -1.0, 1.0, &mut rng);
    results.push((
        "conv1d",
        fd_max_rel_err(vec![x, w, b], 50, 1, |t, v| t.conv1d(v[0], v[1], v[2], 2, 1).unwrap()),
    ));

    let x = rand_tensor(vec![2, 2, 6, 6], -1.0, 1.0, &mut rng);
    let w = rand_tensor(vec![3, 2, 3, 3], -1.0, 1.0, &mut rng);
    let b = rand_tensor(vec![3], -1.0, 1.0, &mut rng);
    results.push((
        "conv2d",
        fd_max_rel_err(vec![x, w, b], 50, 2, |t, v| t.conv2d(v[0], v[1], v[2], 2, 1).unwrap()),
    ));

    let x = rand_tensor(vec![5, 7], -1.0, 1.0, &mut rng);
    let w = rand_tensor(vec![6, 7], -1.0, 1.0, &mut rng);
    let b = rand_tensor(vec![6], -1.0, 1.0, &mut rng);
    results.push((
        "dense",
        fd_max_rel_err(vec![x, w, b], 50, 3, |t, v| t.dense(v[0], v[1], v[2]).unwrap()),
    ));

    // Relu probes stay clear of the kink at zero.
    let relu_in: Vec<f64> = (0..30)
        .map(|_| {
            let v: f64 = rng.random_range(0.1..1.0);
            if rng.random::<f64>() < 0.5 {
                -v
            } else {
                v
            }
        })
        .collect();
    results.push((
        "relu",
        fd_max_rel_err(vec![Tensor::new(vec![5, 6], relu_in)], 50, 4, |t, v| t.relu(v[0])),
    ));

    let x = rand_tensor(vec![2, 3, 12], -1.0, 1.0, &mut rng);
    results.push((
        "maxpool1d",
        fd_max_rel_err(vec![x], 50, 5, |t, v| t.maxpool1d(v[0], 2, 2, 0).unwrap()),
    ));

    let x = rand_tensor(vec![2, 2, 6, 6], -1.0, 1.0, &mut rng);
    results.push((
        "maxpool2d",
        fd_max_rel_err(vec![x], 50, 6, |t, v| t.maxpool2d(v[0], 2, 2).unwrap()),
    ));

    let x = rand_tensor(vec![4, 3, 5], -1.0, 1.0, &mut rng);
    let gamma = rand_tensor(vec![3], 0.5, 1.5, &mut rng);
    let beta = rand_tensor(vec![3], -0.5, 0.5, &mut rng);
    results.push((
        "batchnorm1d (train)",
        fd_max_rel_err(vec![x, gamma, beta], 50, 7, |t, v| {
            let mut running = BnRunning::new(3);
            t.batchnorm1d(v[0], v[1], v[2], &mut running, 0.1, 1e-5, Mode::Train).unwrap()
        }),
    ));

    let x = rand_tensor(vec![3, 4], -1.0, 1.0, &mut rng);
    let gamma = rand_tensor(vec![4], 0.5, 1.5, &mut rng);
    let beta = rand_tensor(vec![4], -0.5, 0.5, &mut rng);
    results.push((
        "batchnorm1d (eval)",
        fd_max_rel_err(vec![x, gamma, beta], 50, 8, |t, v| {
            let mut running = BnRunning::new(4);
            running.mean.copy_from_slice(&[0.1, -0.2, 0.3, 0.0]);
            running.var.copy_from_slice(&[1.2, 0.8, 1.5, 0.6]);
            t.batchnorm1d(v[0], v[1], v[2], &mut running, 0.1, 1e-5, Mode::Eval).unwrap()
        }),
    ));

    let x = rand_tensor(vec![4, 8], -1.0, 1.0, &mut rng);
    results.push((
        "dropout (train)",
        fd_max_rel_err(vec![x], 50, 9, |t, v| {
            let mut mask_rng = ChaCha20Rng::seed_from_u64(99);
            t.dropout(v[0], 0.5, Mode::Train, &mut mask_rng)
        }),
    ));

    // Residual block law: y = branch(x) + projection(x).
    let x = rand_tensor(vec![2, 2, 6], -1.0, 1.0, &mut rng);
    let wb = rand_tensor(vec![2, 2, 3], -1.0, 1.0, &mut rng);
    let bb = rand_tensor(vec![2], -1.0, 1.0, &mut rng);
    let wp = rand_tensor(vec![2, 2, 1], -1.0, 1.0, &mut rng);
    let bp = rand_tensor(vec![2], -1.0, 1.0, &mut rng);
    results.push((
        "residual block",
        fd_max_rel_err(vec![x, wb, bb, wp, bp], 50, 10, |t, v| {
            let branch = t.conv1d(v[0], v[1], v[2], 1, 1).unwrap();
            let skip = t.conv1d(v[0], v[3], v[4], 1, 0).unwrap();
            t.add(branch, skip).unwrap()
        }),
    ));

    let a = rand_tensor(vec![2, 3, 5], -1.0, 1.0, &mut rng);
    let b = rand_tensor(vec![2, 2, 5], -1.0, 1.0, &mut rng);
    results.push((
        "concat+gap+flatten",
        fd_max_rel_err(vec![a, b], 50, 11, |t, v| {
            let cat = t.concat_channels(v[0], v[1]).unwrap();
            let pooled = t.global_avg_pool(cat).unwrap();
            t.flatten(pooled)
        }),
    ));

    let x = rand_tensor(vec![3, 6], -1.0, 1.0, &mut rng);
    results.push((
        "l2_normalize",
        fd_max_rel_err(vec![x], 50, 12, |t, v| t.l2_normalize(v[0]).unwrap()),
    ));

    let h1 = rand_tensor(vec![5, 4], -1.0, 1.0, &mut rng);
    let h2 = rand_tensor(vec![5, 4], -1.0, 1.0, &mut rng);
    results.push((
        "contrastive loss",
        fd_max_rel_err(vec![h1, h2], 50, 13, |t, v| {
            t.contrastive_loss(v[0], v[1], &[0, 1, 1, 0, 1], 10.0).unwrap()
        }),
    ));

    let a = rand_tensor(vec![4, 5], -1.0, 1.0, &mut rng);
    let p = rand_tensor(vec![4, 5], -1.0, 1.0, &mut rng);
    let n = rand_tensor(vec![4, 5], -1.0, 1.0, &mut rng);
    results.push((
        "triplet loss",
        fd_max_rel_err(vec![a, p, n], 50, 14, |t, v| {
            t.triplet_loss(v[0], v[1], v[2], 10.0).unwrap()
        }),
    ));

    let elapsed = start.elapsed();
    for (name, err) in &results {
        assert!(*err < 1e-4, "{name}: max relative error {err:.3e} >= 1e-4");
    }
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}, budget 60 s");
    let worst = results.iter().map(|r| r.1).fold(0.0f64, f64::max);
    println!(
        "[PASS] C6: {} layer/loss gradient checks, 50 probes each, worst relative error {:.3e} (< 1e-4) in {:?} (< 60 s)",
        results.len(),
        worst,
        elapsed
    );
}

// ---------------------------------------------------------------------
// C7: AUC equals the exhaustive rank statistic.
// ---------------------------------------------------------------------

#[test]
fn criterion_07_auc_equals_rank_statistic() {
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let n = rng.random_range(4..=200);
        // Quantized scores so ties actually occur.
        let distances: Vec<f64> =
            (0..n).map(|_| (rng.random_range(0.0f64..1.0) * 16.0).round() / 16.0).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
        labels[0] = 0;
        labels[1] = 1;

        let curve = roc_curve(&distances, &labels).unwrap();
        let trapezoid = auc(&curve);

        // Exhaustive ordered-pair counting.
        let mut score = 0.0;
        let mut pairs = 0usize;
        for (i, (&df, &yf)) in distances.iter().zip(&labels).enumerate() {
            if yf != 1 {
                continue;
            }
            for (j, (&dg, &yg)) in distances.iter().zip(&labels).enumerate() {
                if yg != 0 || i == j {
                    continue;
                }
                pairs += 1;
                if df > dg {
                    score += 1.0;
                } else if df == dg {
                    score += 0.5;
                }
            }
        }
        let rank = score / pairs as f64;
        let delta = (trapezoid - rank).abs();
        assert!(delta < 1e-12, "seed {seed}: |{trapezoid} - {rank}| = {delta}");
        worst = worst.max(delta);
    }
    println!("[PASS] C7: trapezoidal AUC equals the exhaustive rank statistic on 100 instances (worst |delta| {worst:.2e} < 1e-12)");
}

// ---------------------------------------------------------------------
// C8: the pair-generation contract.
// ---------------------------------------------------------------------

#[test]
fn criterion_08_pair_generation_contract() {
    // Synthetic 10-writer record set, 12 genuine + 12 forged each.
    let mut records = Vec::new();
    for w in 1..=10 {
        for n in 1..=12 {
            for (kind, name) in [(Kind::Genuine, "genuine"), (Kind::Forged, "forged")] {
                records.push(SignatureRecord {
                    dataset: DatasetTag::Synth,
                    writer_id: format!("{w:02}"),
                    kind,
                    path: format!("writer_{w:02}/{name}_{n:02}.png"),
                });
            }
        }
    }
    let writer_set: BTreeSet<String> = (1..=10).map(|w| format!("{w:02}")).collect();
    let cfg = PairConfig {
        genuine_pairs_per_writer: 100,
        forged_pairs_per_writer: 100,
        cross_writer_fraction: 0.2,
        seed: 99,
    };
    let pairs = generate_pairs(&records, &writer_set, &cfg).unwrap();

    for w in writer_set.iter() {
        let label1: Vec<_> =
            pairs.iter().filter(|p| p.label == 1 && &p.a.writer_id == w).collect();
        let genuine_forged = label1
            .iter()
            .filter(|p| p.b.kind == Kind::Forged && &p.b.writer_id == w)
            .count();
        let cross_writer = label1
            .iter()
            .filter(|p| p.b.kind == Kind::Genuine && &p.b.writer_id != w)
            .count();
        assert_eq!(genuine_forged, 80, "writer {w}");
        assert_eq!(cross_writer, 20, "writer {w}");
    }
    let zeros = pairs.iter().filter(|p| p.label == 0).count() as i64;
    let ones = pairs.iter().filter(|p| p.label == 1).count() as i64;
    assert!((zeros - ones).abs() <= 1, "balance: {zeros} vs {ones}");
    println!(
        "[PASS] C8: 10 writers x quota 100 at f=0.2 give exactly 80 genuine-forged + 20 cross-writer label-1 pairs per writer; |#0-#1| = {}",
        (zeros - ones).abs()
    );
}

// ---------------------------------------------------------------------
// Desk-scale fixture shared by C9/C10/C12.
// ---------------------------------------------------------------------

struct DeskFixture {
    _dir: tempfile::TempDir,
    manifest: LoadedManifest,
    store: SampleStore,
}

fn desk_fixture() -> &'static DeskFixture {
    static FIXTURE: OnceLock<DeskFixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        use rayon::prelude::*;
        let dir = tempfile::tempdir().unwrap();
        let raw = dir.path().join("raw");
        let shells_root = dir.path().join("shells");

        // 8 writers, 12 genuine + 12 forged each.
        let synth = SynthConfig {
            writers: 8,
            genuine_per_writer: 12,
            forged_per_writer: 12,
            canvas: 512,
            seed: 42,
        };
        let records = synth_generate(&raw, &synth).unwrap();

        records.par_iter().for_each(|r| {
            let img = load_gray(&raw.join(&r.path)).unwrap();
            let (gray, mask) = preprocess_signature(&img).unwrap();
            let cleaned = cleaned_mask(&mask, 64);
            let shells = extract_shells_pruned(&cleaned).unwrap();
            let record = ShellRecord {
                pressure: pressure_map(&gray, &shells),
                thickness: thickness(&cleaned),
                shells,
            };
            let rel = r.path.strip_suffix(".png").unwrap();
            write_record(&record, &shells_root.join(rel)).unwrap();
        });

        // Writer-disjoint 4/2/2 split; pair and triplet manifests.
        let partition = split_writers(&records, (0.5, 0.25, 0.25), SplitMode::Seeded(7)).unwrap();
        let pairs_for = |writers: &[String], seed: u64| {
            let set: BTreeSet<String> = writers.iter().cloned().collect();
            let cfg = PairConfig {
                genuine_pairs_per_writer: 20,
                forged_pairs_per_writer: 20,
                cross_writer_fraction: 0.2,
                seed,
            };
            let pairs = generate_pairs(&records, &set, &cfg).unwrap();
            pairs
                .into_iter()
                .map(|p| PairRow { a: p.a.path.clone(), b: p.b.path.clone(), label: p.label })
                .collect::<Vec<_>>()
        };
        let triplets_for = |writers: &[String], seed: u64| {
            let set: BTreeSet<String> = writers.iter().cloned().collect();
            sigshell::dataset::generate_triplets(&records, &set, 24, 0.2, seed)
                .unwrap()
                .into_iter()
                .map(|t| TripletRow {
                    a: t.anchor.path.clone(),
                    p: t.positive.path.clone(),
                    n: t.negative.path.clone(),
                })
                .collect::<Vec<_>>()
        };
        let manifest = LoadedManifest {
            train_pairs: pairs_for(&partition.train, 1),
            valid_pairs: pairs_for(&partition.valid, 2),
            test_pairs: pairs_for(&partition.test, 3),
            train_triplets: triplets_for(&partition.train, 4),
            valid_triplets: triplets_for(&partition.valid, 5),
            test_triplets: Vec::new(),
        };

        let mut paths = BTreeSet::new();
        for p in manifest
            .train_pairs
            .iter()
            .chain(&manifest.valid_pairs)
            .chain(&manifest.test_pairs)
        {
            paths.insert(p.a.clone());
            paths.insert(p.b.clone());
        }
        for t in manifest.train_triplets.iter().chain(&manifest.valid_triplets) {
            paths.insert(t.a.clone());
            paths.insert(t.p.clone());
            paths.insert(t.n.clone());
        }
        let store = SampleStore::load(
            Arch::PsNet,
            paths.iter().map(|s| s.as_str()),
            &shells_root,
        )
        .unwrap();

        DeskFixture { _dir: dir, manifest, store }
    })
}

fn desk_model_cfg(normalize: bool) -> ModelConfig {
    ModelConfig {
        arch: Arch::PsNet,
        embedding_dim: 512,
        width_multiplier: 0.25,
        normalize_embedding: normalize,
        dropout: 0.5,
    }
}

fn desk_train_cfg(loss: LossKind, seed: u64) -> TrainConfig {
    TrainConfig {
        optimizer: OptimizerKind::adam(),
        learning_rate: PAPER_LEARNING_RATE,
        batch_size: PAPER_BATCH_SIZE,
        epochs: PAPER_EPOCHS,
        margin: PAPER_MARGIN,
        loss,
        patience: 5,
        min_delta: 0.0,
        seed,
        ..TrainConfig::default()
    }
}

fn test_auc(model: &mut Model, fixture: &DeskFixture) -> f64 {
    let scored = embed_pairs(model, &fixture.manifest.test_pairs, &fixture.store, 32).unwrap();
    let distances: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let labels: Vec<u8> = scored.iter().map(|s| s.1).collect();
    auc(&roc_curve(&distances, &labels).unwrap())
}

struct ContrastiveRun {
    history: Vec<(f64, f64)>,
    auc: f64,
    train_seconds: f64,
}

/// The wall-clock criterion is stated for a 4-core CPU; on narrower boxes
/// the budget scales with the missing cores.
fn train_budget_seconds() -> f64 {
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    600.0 * (4.0 / cores as f64).max(1.0)
}

/// C9's run, shared with C12 (its unnormalized baseline trace).
fn contrastive_run() -> &'static ContrastiveRun {
    static RUN: OnceLock<ContrastiveRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let fixture = desk_fixture();
        let _serial = DESK_LOCK.lock().unwrap();
        let start = Instant::now();
        let outcome = train(
            &desk_model_cfg(false),
            &desk_train_cfg(LossKind::Contrastive, 11),
            &fixture.manifest,
            &fixture.store,
        )
        .unwrap();
        let train_seconds = start.elapsed().as_secs_f64();
        let mut model = outcome.model;
        let auc = test_auc(&mut model, fixture);
        ContrastiveRun {
            history: outcome.history.iter().map(|s| (s.train_loss, s.valid_loss)).collect(),
            auc,
            train_seconds,
        }
    })
}

// ---------------------------------------------------------------------
// C9: desk-scale contrastive training.
// ---------------------------------------------------------------------

#[test]
fn criterion_09_desk_scale_contrastive() {
    let run = contrastive_run();
    assert!(
        run.history.len() <= PAPER_EPOCHS,
        "trained {} epochs, budget {PAPER_EPOCHS}",
        run.history.len()
    );
    let budget = train_budget_seconds();
    assert!(
        run.train_seconds < budget,
        "training took {:.1} s, budget {budget:.0} s (600 s at 4 cores)",
        run.train_seconds
    );
    assert!(run.auc >= 0.90, "held-out writer AUC {:.4} < 0.90", run.auc);
    println!(
        "[PASS] C9: contrastive desk run (lr {PAPER_LEARNING_RATE}, batch {PAPER_BATCH_SIZE}, margin {PAPER_MARGIN}) reached held-out AUC {:.4} >= 0.90 in {} epochs, {:.0} s (budget {budget:.0} s, 600 s at 4 cores)",
        run.auc,
        run.history.len(),
        run.train_seconds
    );
}

// ---------------------------------------------------------------------
// C10: desk-scale triplet training.
// ---------------------------------------------------------------------

#[test]
fn criterion_10_desk_scale_triplet() {
    let fixture = desk_fixture();
    let _serial = DESK_LOCK.lock().unwrap();
    let start = Instant::now();
    let outcome = train(
        &desk_model_cfg(false),
        &desk_train_cfg(LossKind::Triplet, 11),
        &fixture.manifest,
        &fixture.store,
    )
    .unwrap();
    let seconds = start.elapsed().as_secs_f64();
    let mut model = outcome.model;
    let auc = test_auc(&mut model, fixture);
    let budget = train_budget_seconds();
    assert!(seconds < budget, "training took {seconds:.1} s, budget {budget:.0} s (600 s at 4 cores)");
    assert!(auc >= 0.85, "held-out writer AUC {auc:.4} < 0.85");
    println!(
        "[PASS] C10: triplet desk run reached held-out AUC {auc:.4} >= 0.85 in {} epochs, {seconds:.0} s (budget {budget:.0} s)",
        outcome.history.len()
    );
}

// ---------------------------------------------------------------------
// C11: bit-for-bit determinism under a fixed seed.
// ---------------------------------------------------------------------

#[test]
fn criterion_11_determinism_byte_for_byte() {
    let fixture = desk_fixture();
    let _serial = DESK_LOCK.lock().unwrap();
    let cfg = ModelConfig { width_multiplier: 0.1, ..desk_model_cfg(false) };
    let tcfg = TrainConfig { epochs: 3, ..desk_train_cfg(LossKind::Contrastive, 77) };

    let run = || {
        let outcome = train(&cfg, &tcfg, &fixture.manifest, &fixture.store).unwrap();
        (outcome.history.clone(), outcome.model.to_checkpoint())
    };
    let (h1, c1) = run();
    let (h2, c2) = run();
    assert_eq!(h1, h2, "loss histories differ");

    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
    save_checkpoint(&c1, &p1).unwrap();
    save_checkpoint(&c2, &p2).unwrap();
    let (b1, b2) = (std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(b1, b2, "checkpoints are not byte-identical");
    println!(
        "[PASS] C11: two identical-seed runs produced identical loss histories and byte-identical checkpoints ({} bytes)",
        b1.len()
    );
}

// ---------------------------------------------------------------------
// C12: hypersphere-normalization ablation (reported, not hard-failed).
// ---------------------------------------------------------------------

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

fn export_trace(path: &Path, history: &[(f64, f64)]) {
    let mut out = String::from("epoch,train_loss,valid_loss\n");
    for (i, (t, v)) in history.iter().enumerate() {
        out.push_str(&format!("{i},{t},{v}\n"));
    }
    std::fs::write(path, out).unwrap();
}

#[test]
fn criterion_12_hypersphere_normalization_ablation() {
    let fixture = desk_fixture();
    let baseline = contrastive_run();

    // The ablation flag: identical run with embeddings projected onto the
    // unit hypersphere.
    let _serial = DESK_LOCK.lock().unwrap();
    let outcome = train(
        &desk_model_cfg(true),
        &desk_train_cfg(LossKind::Contrastive, 11),
        &fixture.manifest,
        &fixture.store,
    )
    .unwrap();
    let normalized: Vec<(f64, f64)> =
        outcome.history.iter().map(|s| (s.train_loss, s.valid_loss)).collect();

    // Both traces are exported for inspection.
    let out_dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    std::fs::create_dir_all(&out_dir).unwrap();
    let base_path = out_dir.join("ablation_unnormalized.csv");
    let norm_path = out_dir.join("ablation_normalized.csv");
    export_trace(&base_path, &baseline.history);
    export_trace(&norm_path, &normalized);

    let tail = |hist: &[(f64, f64)]| -> Vec<f64> {
        let k = hist.len().min(5);
        hist[hist.len() - k..].iter().map(|(t, _)| *t).collect()
    };
    let var_base = variance(&tail(&baseline.history));
    let var_norm = variance(&tail(&normalized));

    let finding = if var_norm > var_base {
        "normalized trace is less stable, matching the published instability finding"
    } else {
        "normalized trace did not show higher variance on this run (reported, not failed)"
    };
    println!(
        "[PASS] C12: hypersphere ablation ran; last-5-epoch train-loss variance {var_norm:.3e} (normalized) vs {var_base:.3e} (unnormalized): {finding}. Traces: {} and {}",
        norm_path.display(),
        base_path.display()
    );

    // Hard assertions cover only the mechanics: the flag trains, produces a
    // history, and the exported traces exist.
    assert!(!normalized.is_empty());
    assert!(base_path.is_file() && norm_path.is_file());
}
