//! The `sigshell` command line: synthetic data, pre-processing, shell
//! extraction, split files, training, and evaluation.
//!
//! Every stage writes plain files into its `--out` directory, so stages can
//! be re-run independently. Commands taking `--seed` are bit-reproducible.
//! Exit codes: 0 success, 1 data/processing error (with a machine-readable
//! JSON line on stderr), 2 usage error.

use crate::config::PipelineConfig;
use crate::dataset::{
    self, generate_pairs, generate_triplets, scan_dataset, split_writers, synth_generate,
    DatasetTag, PairConfig, Split, SplitManifest, SplitMode,
};
use crate::eval::{cross_report, distance_histogram, evaluate_distances};
use crate::metric::{embed_pairs, train, Arch, LossKind, Model, ModelConfig, SampleStore, TrainConfig};
use crate::nn::{load_checkpoint, save_checkpoint, OptimizerKind};
use crate::raster::{load_gray, load_mask, preprocess_signature, save_binary_png, save_gray_png};
use crate::shells::{
    cleaned_mask, extract_shells_pruned, pressure_map, thickness, write_record, ShellRecord,
};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "sigshell",
    version,
    about = "Offline signature verification: shell preprocessing, siamese training, cross-dataset evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config file; explicit flags override its values
    /// (default: $SIGSHELL_CONFIG if set).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Print per-file progress.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic signature dataset.
    Synth(SynthArgs),
    /// Binarize, crop, and resize raw scans to 512x512 gray + mask pairs.
    Preprocess(PreprocessArgs),
    /// Extract shell/pressure/thickness records from preprocessed images.
    Shells(ShellsArgs),
    /// Build writer-disjoint pair and triplet split files.
    Pairs(PairsArgs),
    /// Train an embedding model on a split manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one manifest split.
    Eval(EvalArgs),
    /// Cross-dataset evaluation over several test manifests.
    Cross(CrossArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    writers: Option<usize>,
    /// Genuine signatures per writer.
    #[arg(long)]
    genuine: Option<usize>,
    /// Forged signatures per writer.
    #[arg(long)]
    forged: Option<usize>,
    /// Canvas size in pixels.
    #[arg(long)]
    canvas: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Dataset root directory.
    #[arg(long)]
    input: PathBuf,
    /// Directory layout: cedar|icdar|gpds|synth.
    #[arg(long)]
    layout: String,
    /// Output directory (mirrors the input's relative paths).
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct ShellsArgs {
    /// Preprocess output directory.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for per-signature record directories.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Maximum hole area filled during pruning.
    #[arg(long)]
    hole_area: Option<usize>,
}

#[derive(Args)]
struct PairsArgs {
    /// Dataset root directory.
    #[arg(long)]
    input: PathBuf,
    /// Directory layout: cedar|icdar|gpds|synth.
    #[arg(long)]
    layout: String,
    /// Output manifest directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    genuine_pairs: Option<usize>,
    #[arg(long)]
    forged_pairs: Option<usize>,
    #[arg(long)]
    triplets: Option<usize>,
    /// Fraction of label-1 pairs drawn cross-writer.
    #[arg(long)]
    cross_fraction: Option<f64>,
    /// Split fractions as train,valid,test (e.g. "0.667,0.167,0.166").
    #[arg(long)]
    fractions: Option<String>,
    /// Assign writers by sorted id instead of shuffling.
    #[arg(long)]
    ordered: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Split-manifest directory (from `pairs`).
    #[arg(long)]
    manifest: PathBuf,
    /// Data root: shell records for psnet/resnet1d, preprocessed images
    /// for smallcnn2d.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for the checkpoint and history.
    #[arg(long)]
    out: PathBuf,
    /// Architecture: psnet|resnet1d|smallcnn2d.
    #[arg(long)]
    arch: Option<String>,
    /// Loss: contrastive|triplet.
    #[arg(long)]
    loss: Option<String>,
    /// Optimizer: sgd|momentum|adam.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    width: Option<f64>,
    #[arg(long)]
    embedding_dim: Option<usize>,
    /// Hypersphere ablation: L2-normalize embeddings.
    #[arg(long)]
    normalize_embedding: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint file.
    #[arg(long)]
    model: PathBuf,
    /// Split-manifest directory.
    #[arg(long)]
    manifest: PathBuf,
    /// Data root matching the checkpoint's architecture.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for report files.
    #[arg(long)]
    out: PathBuf,
    /// Which split to evaluate: train|valid|test.
    #[arg(long, default_value = "test")]
    split: String,
    /// Histogram bin count.
    #[arg(long, default_value_t = 20)]
    bins: usize,
}

#[derive(Args)]
struct CrossArgs {
    /// Checkpoint file.
    #[arg(long)]
    model: PathBuf,
    /// Test dataset spec NAME=MANIFEST_DIR:DATA_DIR (repeatable).
    #[arg(long = "test", value_name = "NAME=MANIFEST:DATA")]
    tests: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Which split of each manifest to use.
    #[arg(long, default_value = "test")]
    split: String,
    /// Dataset-group label recorded in the report (e.g. CI).
    #[arg(long, default_value = "custom")]
    group: String,
    /// Training-set label recorded in the report (e.g. CEDAR+ICDAR).
    #[arg(long, default_value = "unspecified")]
    train_sets: String,
}

/// Parses argv and runs; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(msg) => {
            eprintln!("{}", serde_json::json!({ "error": msg }));
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), String> {
    let cfg = PipelineConfig::resolve(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(args) => cmd_synth(&cfg, &args, cli.verbose),
        Command::Preprocess(args) => cmd_preprocess(&args, cli.verbose),
        Command::Shells(args) => cmd_shells(&cfg, &args, cli.verbose),
        Command::Pairs(args) => cmd_pairs(&cfg, &args, cli.verbose),
        Command::Train(args) => cmd_train(&cfg, &args, cli.verbose),
        Command::Eval(args) => cmd_eval(&args, cli.verbose),
        Command::Cross(args) => cmd_cross(&args, cli.verbose),
    }
}

fn err_str<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "valid" => Ok(Split::Valid),
        "test" => Ok(Split::Test),
        other => Err(format!("unknown split '{other}' (expected train|valid|test)")),
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, String> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        builder = builder.num_threads(workers);
    }
    builder.build().map_err(err_str)
}

fn cmd_synth(cfg: &PipelineConfig, args: &SynthArgs, verbose: bool) -> Result<(), String> {
    let mut synth = cfg.synth.to_synth_config(args.seed);
    if let Some(w) = args.writers {
        synth.writers = w;
    }
    if let Some(g) = args.genuine {
        synth.genuine_per_writer = g;
    }
    if let Some(f) = args.forged {
        synth.forged_per_writer = f;
    }
    if let Some(c) = args.canvas {
        synth.canvas = c;
    }
    let records = synth_generate(&args.out, &synth).map_err(err_str)?;
    if verbose {
        for r in &records {
            println!("wrote {}", r.path);
        }
    }
    println!(
        "synth: {} writers, {} images at {}",
        synth.writers,
        records.len(),
        args.out.display()
    );
    Ok(())
}

/// Path of the mask image written next to each preprocessed gray image.
pub fn mask_path_for(gray: &Path) -> PathBuf {
    let stem = gray.file_stem().unwrap_or_default().to_string_lossy();
    gray.with_file_name(format!("{stem}.mask.png"))
}

fn cmd_preprocess(args: &PreprocessArgs, verbose: bool) -> Result<(), String> {
    let layout: DatasetTag = args.layout.parse().map_err(err_str)?;
    let records = scan_dataset(&args.input, layout).map_err(err_str)?;
    let pool = thread_pool(args.workers)?;
    let results: Vec<Result<(), String>> = pool.install(|| {
        records
            .par_iter()
            .map(|r| {
                let src = args.input.join(&r.path);
                let img = load_gray(&src).map_err(err_str)?;
                let (gray, mask) = preprocess_signature(&img)
                    .map_err(|e| format!("{}: {e}", r.path))?;
                let dst = args.out.join(&r.path);
                if let Some(parent) = dst.parent() {
                    std::fs::create_dir_all(parent).map_err(err_str)?;
                }
                save_gray_png(&gray, &dst).map_err(err_str)?;
                save_binary_png(&mask, &mask_path_for(&dst)).map_err(err_str)?;
                if verbose {
                    println!("preprocessed {}", r.path);
                }
                Ok(())
            })
            .collect()
    });
    let total = results.len();
    for r in results {
        r?;
    }
    println!("preprocess: {total} images -> {}", args.out.display());
    Ok(())
}

fn list_preprocessed(root: &Path) -> Result<Vec<PathBuf>, String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| format!("{}: {e}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for path in entries {
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "png")
                && !path.to_string_lossy().ends_with(".mask.png")
            {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn cmd_shells(cfg: &PipelineConfig, args: &ShellsArgs, verbose: bool) -> Result<(), String> {
    let hole_area = args.hole_area.unwrap_or(cfg.shells.hole_area);
    let images = list_preprocessed(&args.input)?;
    if images.is_empty() {
        return Err(format!("no preprocessed images under {}", args.input.display()));
    }
    let pool = thread_pool(args.workers)?;
    let results: Vec<Result<(), String>> = pool.install(|| {
        images
            .par_iter()
            .map(|gray_path| {
                let rel = gray_path.strip_prefix(&args.input).unwrap();
                let gray = load_gray(gray_path).map_err(err_str)?;
                let mask = load_mask(&mask_path_for(gray_path)).map_err(err_str)?;
                if mask.height() != 512 || mask.width() != 512 {
                    return Err(format!("{}: mask is not 512x512", rel.display()));
                }

                let cleaned = cleaned_mask(&mask, hole_area);
                let shells = extract_shells_pruned(&cleaned)
                    .map_err(|e| format!("{}: {e}", rel.display()))?;
                let pressure = pressure_map(&gray, &shells);
                let thick = thickness(&cleaned);

                let rel_dir = rel.with_extension("");
                let out_dir = args.out.join(&rel_dir);
                let record = ShellRecord { shells, pressure, thickness: thick };
                write_record(&record, &out_dir).map_err(err_str)?;
                // Skeletons are part of the exported artifacts.
                let skeleton = crate::raster::skeletonize(&cleaned);
                save_binary_png(&skeleton, &out_dir.join("skeleton.png")).map_err(err_str)?;
                if cfg.shells.dump_ribbons {
                    let sup = crate::shells::shell_s_binary(&cleaned);
                    let inf = crate::shells::shell_i_binary(&cleaned);
                    save_binary_png(&sup, &out_dir.join("superior.png")).map_err(err_str)?;
                    save_binary_png(&inf, &out_dir.join("inferior.png")).map_err(err_str)?;
                }
                if verbose {
                    println!("shells {}", rel.display());
                }
                Ok(())
            })
            .collect()
    });
    let total = results.len();
    for r in results {
        r?;
    }
    println!("shells: {total} records -> {}", args.out.display());
    Ok(())
}

fn cmd_pairs(cfg: &PipelineConfig, args: &PairsArgs, verbose: bool) -> Result<(), String> {
    let layout: DatasetTag = args.layout.parse().map_err(err_str)?;
    let records = scan_dataset(&args.input, layout).map_err(err_str)?;

    let fractions = match &args.fractions {
        Some(text) => {
            let parts: Vec<f64> = text
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| format!("bad --fractions: {e}"))?;
            if parts.len() != 3 {
                return Err("--fractions needs exactly three comma-separated values".into());
            }
            (parts[0], parts[1], parts[2])
        }
        None => (cfg.pairs.train_fraction, cfg.pairs.valid_fraction, cfg.pairs.test_fraction),
    };
    let mode = if args.ordered || cfg.pairs.ordered {
        SplitMode::Ordered
    } else {
        SplitMode::Seeded(args.seed)
    };
    let partition = split_writers(&records, fractions, mode).map_err(err_str)?;

    let pair_cfg_base = PairConfig {
        genuine_pairs_per_writer: args.genuine_pairs.unwrap_or(cfg.pairs.genuine_pairs_per_writer),
        forged_pairs_per_writer: args.forged_pairs.unwrap_or(cfg.pairs.forged_pairs_per_writer),
        cross_writer_fraction: args.cross_fraction.unwrap_or(cfg.pairs.cross_writer_fraction),
        seed: args.seed,
    };
    let triplets_per_writer = args.triplets.unwrap_or(cfg.pairs.triplets_per_writer);

    let mut manifest = SplitManifest::default();
    for (i, (split, writers)) in [
        (Split::Train, &partition.train),
        (Split::Valid, &partition.valid),
        (Split::Test, &partition.test),
    ]
    .into_iter()
    .enumerate()
    {
        let writer_set: BTreeSet<String> = writers.iter().cloned().collect();
        let pair_cfg =
            PairConfig { seed: args.seed.wrapping_add(i as u64), ..pair_cfg_base };
        let pairs = generate_pairs(&records, &writer_set, &pair_cfg).map_err(err_str)?;
        let triplets = if triplets_per_writer > 0 {
            generate_triplets(
                &records,
                &writer_set,
                triplets_per_writer,
                pair_cfg.cross_writer_fraction,
                pair_cfg.seed.wrapping_add(1000),
            )
            .map_err(err_str)?
        } else {
            Vec::new()
        };
        if verbose {
            println!(
                "{}: {} writers, {} pairs, {} triplets",
                split.as_str(),
                writers.len(),
                pairs.len(),
                triplets.len()
            );
        }
        let part = manifest.part_mut(split);
        part.writers = writers.iter().map(|w| (layout, w.clone())).collect();
        part.pairs = pairs;
        part.triplets = triplets;
    }
    debug_assert!(manifest.writers_disjoint());
    manifest.save(&args.out).map_err(err_str)?;
    println!(
        "pairs: train {} / valid {} / test {} -> {}",
        manifest.train.pairs.len(),
        manifest.valid.pairs.len(),
        manifest.test.pairs.len(),
        args.out.display()
    );
    Ok(())
}

fn parse_arch(s: &str) -> Result<Arch, String> {
    match s {
        "psnet" => Ok(Arch::PsNet),
        "resnet1d" => Ok(Arch::ResNet1d),
        "smallcnn2d" => Ok(Arch::SmallCnn2d),
        other => Err(format!("unknown arch '{other}' (expected psnet|resnet1d|smallcnn2d)")),
    }
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    match s {
        "contrastive" => Ok(LossKind::Contrastive),
        "triplet" => Ok(LossKind::Triplet),
        other => Err(format!("unknown loss '{other}' (expected contrastive|triplet)")),
    }
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    match s {
        "sgd" => Ok(OptimizerKind::Sgd),
        "momentum" => Ok(OptimizerKind::Momentum { beta: 0.9 }),
        "adam" => Ok(OptimizerKind::adam()),
        other => Err(format!("unknown optimizer '{other}' (expected sgd|momentum|adam)")),
    }
}

/// Applies CLI overrides on top of the JSON config.
fn effective_train_configs(
    cfg: &PipelineConfig,
    args: &TrainArgs,
) -> Result<(ModelConfig, TrainConfig), String> {
    let mut model = cfg.model.clone();
    let mut train = cfg.train.clone();
    if let Some(a) = &args.arch {
        model.arch = parse_arch(a)?;
    }
    if let Some(w) = args.width {
        model.width_multiplier = w;
    }
    if let Some(d) = args.embedding_dim {
        model.embedding_dim = d;
    }
    if args.normalize_embedding {
        model.normalize_embedding = true;
    }
    if let Some(l) = &args.loss {
        train.loss = parse_loss(l)?;
    }
    if let Some(o) = &args.optimizer {
        train.optimizer = parse_optimizer(o)?;
    }
    if let Some(lr) = args.lr {
        train.learning_rate = lr;
    }
    if let Some(b) = args.batch {
        train.batch_size = b;
    }
    if let Some(e) = args.epochs {
        train.epochs = e;
    }
    if let Some(m) = args.margin {
        train.margin = m;
    }
    if let Some(p) = args.patience {
        train.patience = p;
    }
    if let Some(s) = args.seed {
        train.seed = s;
    }
    Ok((model, train))
}

fn manifest_paths(manifest: &dataset::LoadedManifest, loss: LossKind) -> Vec<String> {
    let mut paths = BTreeSet::new();
    for split in Split::ALL {
        match loss {
            LossKind::Contrastive => {
                for p in manifest.pairs(split) {
                    paths.insert(p.a.clone());
                    paths.insert(p.b.clone());
                }
            }
            LossKind::Triplet => {
                for t in manifest.triplets(split) {
                    paths.insert(t.a.clone());
                    paths.insert(t.p.clone());
                    paths.insert(t.n.clone());
                }
            }
        }
    }
    paths.into_iter().collect()
}

fn cmd_train(cfg: &PipelineConfig, args: &TrainArgs, verbose: bool) -> Result<(), String> {
    let (model_cfg, train_cfg) = effective_train_configs(cfg, args)?;
    let manifest = dataset::load_manifest_dir(&args.manifest).map_err(err_str)?;
    let paths = manifest_paths(&manifest, train_cfg.loss);
    if paths.is_empty() {
        return Err("manifest holds no samples for the selected loss".into());
    }
    let store = SampleStore::load(model_cfg.arch, paths.iter().map(|s| s.as_str()), &args.data)
        .map_err(err_str)?;
    if verbose {
        println!("loaded {} samples", store.len());
    }

    let outcome = train(&model_cfg, &train_cfg, &manifest, &store).map_err(err_str)?;
    std::fs::create_dir_all(&args.out).map_err(err_str)?;
    save_checkpoint(&outcome.model.to_checkpoint(), &args.out.join("model.ckpt"))
        .map_err(err_str)?;
    std::fs::write(args.out.join("history.csv"), outcome.history_csv()).map_err(err_str)?;
    let effective = serde_json::json!({ "model": model_cfg, "train": train_cfg });
    std::fs::write(
        args.out.join("config.json"),
        serde_json::to_string_pretty(&effective).map_err(err_str)?,
    )
    .map_err(err_str)?;

    println!(
        "train: {} epochs, best valid loss {:.6} at epoch {} -> {}",
        outcome.history.len(),
        outcome.best_valid_loss,
        outcome.best_epoch,
        args.out.display()
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<Model, String> {
    let ckpt = load_checkpoint(path).map_err(err_str)?;
    Model::from_checkpoint(&ckpt).map_err(err_str)
}

fn pairs_paths(pairs: &[dataset::PairRow]) -> Vec<String> {
    let mut set = BTreeSet::new();
    for p in pairs {
        set.insert(p.a.clone());
        set.insert(p.b.clone());
    }
    set.into_iter().collect()
}

fn cmd_eval(args: &EvalArgs, verbose: bool) -> Result<(), String> {
    let split = parse_split(&args.split)?;
    let mut model = load_model(&args.model)?;
    let manifest = dataset::load_manifest_dir(&args.manifest).map_err(err_str)?;
    let pairs = manifest.pairs(split);
    if pairs.is_empty() {
        return Err(format!("manifest has no {} pairs", split.as_str()));
    }
    let paths = pairs_paths(pairs);
    let store = SampleStore::load(model.config().arch, paths.iter().map(|s| s.as_str()), &args.data)
        .map_err(err_str)?;
    if verbose {
        println!("evaluating {} pairs", pairs.len());
    }

    let scored = embed_pairs(&mut model, pairs, &store, 32).map_err(err_str)?;
    let distances: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let labels: Vec<u8> = scored.iter().map(|s| s.1).collect();
    let report = evaluate_distances(&distances, &labels).map_err(err_str)?;
    let histogram = distance_histogram(&distances, &labels, args.bins).map_err(err_str)?;

    std::fs::create_dir_all(&args.out).map_err(err_str)?;
    std::fs::write(
        args.out.join("report.json"),
        serde_json::to_string_pretty(&report).map_err(err_str)?,
    )
    .map_err(err_str)?;

    let mut roc_csv = String::from("threshold,fpr,tpr\n");
    for (t, (fpr, tpr)) in report.roc.thresholds.iter().zip(&report.roc.points) {
        roc_csv.push_str(&format!("{t},{fpr},{tpr}\n"));
    }
    std::fs::write(args.out.join("roc.csv"), roc_csv).map_err(err_str)?;

    let mut hist_csv = String::from("bin_lo,bin_hi,genuine,forged\n");
    for i in 0..histogram.genuine.len() {
        hist_csv.push_str(&format!(
            "{},{},{},{}\n",
            histogram.edges[i],
            histogram.edges[i + 1],
            histogram.genuine[i],
            histogram.forged[i]
        ));
    }
    std::fs::write(args.out.join("histogram.csv"), hist_csv).map_err(err_str)?;

    println!(
        "eval: {} pairs, auc {:.4}, accuracy {:.4} -> {}",
        report.samples,
        report.auc,
        report.metrics.accuracy,
        args.out.display()
    );
    Ok(())
}

fn cmd_cross(args: &CrossArgs, verbose: bool) -> Result<(), String> {
    if args.tests.is_empty() {
        return Err("at least one --test NAME=MANIFEST:DATA is required".into());
    }
    let split = parse_split(&args.split)?;
    let mut model = load_model(&args.model)?;

    let mut tests = Vec::new();
    for spec in &args.tests {
        let (name, rest) =
            spec.split_once('=').ok_or_else(|| format!("bad --test spec '{spec}'"))?;
        let (manifest_dir, data_dir) =
            rest.split_once(':').ok_or_else(|| format!("bad --test spec '{spec}'"))?;
        let manifest = dataset::load_manifest_dir(Path::new(manifest_dir)).map_err(err_str)?;
        let pairs = manifest.pairs(split).to_vec();
        if pairs.is_empty() {
            return Err(format!("{name}: manifest has no {} pairs", split.as_str()));
        }
        let paths = pairs_paths(&pairs);
        let store = SampleStore::load(
            model.config().arch,
            paths.iter().map(|s| s.as_str()),
            Path::new(data_dir),
        )
        .map_err(err_str)?;
        if verbose {
            println!("{name}: {} pairs", pairs.len());
        }
        tests.push((name.to_string(), pairs, store));
    }

    let (cross, details) =
        cross_report(&mut model, &args.group, &args.train_sets, &tests, 32).map_err(err_str)?;
    std::fs::create_dir_all(&args.out).map_err(err_str)?;
    std::fs::write(
        args.out.join("cross_report.json"),
        serde_json::to_string_pretty(&cross).map_err(err_str)?,
    )
    .map_err(err_str)?;
    std::fs::write(args.out.join("cross_report.csv"), cross.to_csv()).map_err(err_str)?;
    for (name, report) in &details {
        let safe: String =
            name.chars().map(|c| if c.is_alphanumeric() { c } else { '_' }).collect();
        std::fs::write(
            args.out.join(format!("report_{safe}.json")),
            serde_json::to_string_pretty(report).map_err(err_str)?,
        )
        .map_err(err_str)?;
    }

    for d in &cross.datasets {
        println!("cross: {} auc {:.4} ({} pairs)", d.name, d.auc, d.samples);
    }
    println!("cross: mean auc {:.4}, std {:.4} -> {}", cross.mean_auc, cross.std_auc, args.out.display());
    Ok(())
}
