use sigshell::dataset::{LoadedManifest, PairRow};
use sigshell::metric::*;
use sigshell::nn::*;
use sigshell::raster::{BinaryImage, GrayImage};
use sigshell::shells::*;
use std::path::Path;
use std::time::Instant;

fn write_band_record(root: &Path, rel: &str, row: usize) {
    let mut mask = BinaryImage::zeros(512, 512);
    for r in row..row + 14 {
        for c in 20..492 {
            mask.set(r, c, 1);
        }
    }
    let mut gray = GrayImage::filled(512, 512, 250);
    for r in 0..512 {
        for c in 0..512 {
            if mask.get(r, c) == 1 { gray.set(r, c, 50); }
        }
    }
    let cleaned = cleaned_mask(&mask, 64);
    let shells = extract_shells_pruned(&cleaned).unwrap();
    let record = ShellRecord { pressure: pressure_map(&gray, &shells), thickness: thickness(&cleaned), shells };
    write_record(&record, &root.join(rel)).unwrap();
}

#[test]
fn bench_epoch() {
    let dir = tempfile::tempdir().unwrap();
    for i in 0..8 {
        write_band_record(dir.path(), &format!("w/g{i:02}"), 60 + i * 40);
    }
    let p = |i: usize| format!("w/g{i:02}.png");
    let mut train_pairs = Vec::new();
    for i in 0..8 {
        for j in 0..8 {
            if i != j { train_pairs.push(PairRow { a: p(i), b: p(j), label: u8::from((i + j) % 2 == 0) }); }
        }
    }
    train_pairs.truncate(32); // one batch of 32
    let manifest = LoadedManifest { train_pairs, ..LoadedManifest::default() };
    let paths: Vec<String> = (0..8).map(p).collect();
    let store = SampleStore::load(Arch::PsNet, paths.iter().map(|s| s.as_str()), dir.path()).unwrap();
    let model_cfg = ModelConfig { arch: Arch::PsNet, embedding_dim: 512, width_multiplier: 0.25, normalize_embedding: false, dropout: 0.5 };
    let train_cfg = TrainConfig { optimizer: OptimizerKind::adam(), epochs: 3, seed: 1, ..TrainConfig::default() };
    let t0 = Instant::now();
    let outcome = train(&model_cfg, &train_cfg, &manifest, &store).unwrap();
    println!("3 epochs x 1 batch32 (incl snapshots): {:?}; history {:?}", t0.elapsed(), outcome.history.len());
}
