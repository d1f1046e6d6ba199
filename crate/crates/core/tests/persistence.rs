//! Checkpoint round trips and reproducible training runs.

mod common;

use std::fs;

use multinex::nn::checkpoint::{self, MAGIC};
use multinex::nn::{enhance, ModelParams, VariantConfig};
use multinex::train::{synthetic_pairs, train, DarkenConfig, PairedDataset, TrainConfig};

fn small_config() -> TrainConfig {
    TrainConfig {
        iterations: 4,
        batch: 2,
        patch: 16,
        checkpoint_every: 2,
        ..TrainConfig::default()
    }
}

#[test]
fn checkpoint_forward_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in [VariantConfig::nano(), VariantConfig::lightweight()] {
        let params = common::randomize(&ModelParams::<f64>::init(&cfg, 1).unwrap(), 1, 0.3).cast::<f32>();
        let path = dir.path().join("m.mnx");
        checkpoint::save(&path, &params, Some(&cfg)).unwrap();
        let loaded = checkpoint::load_for(&path, &cfg).unwrap();
        assert_eq!(loaded, params);
        let img = common::uniform(&mut common::rng(2), 9, 11, 3, 0.0, 1.0).cast::<f32>();
        let a = enhance(&img, &params, &cfg).unwrap().output;
        let b = enhance(&img, &loaded, &cfg).unwrap().output;
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(&fs::read(&path).unwrap()[..4], MAGIC);
    }
}

#[test]
fn checkpoint_for_other_variant_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nano.mnx");
    let cfg = VariantConfig::nano();
    checkpoint::save(&path, &ModelParams::init(&cfg, 0).unwrap(), Some(&cfg)).unwrap();
    let err = checkpoint::load_for(&path, &VariantConfig::lightweight()).unwrap_err();
    assert!(err.to_string().contains("lum."), "{err}");
}

#[test]
fn seeded_training_writes_identical_files() {
    let ds = PairedDataset::from_pairs(synthetic_pairs(3, 24, 24, 9, &DarkenConfig::default())).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        train(&ds, &VariantConfig::nano(), &small_config(), Some(d.path()), None).unwrap();
    }
    for f in ["trace.csv", "final.mnx", "ckpt_000002.mnx"] {
        let (x, y) = (fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        assert_eq!(x, y, "{f} differs");
    }
    let trace = fs::read_to_string(a.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 5);
}

#[test]
fn zero_iterations_write_only_the_initial_checkpoint() {
    let ds = PairedDataset::from_pairs(synthetic_pairs(1, 16, 16, 1, &DarkenConfig::default())).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        iterations: 0,
        ..small_config()
    };
    train(&ds, &VariantConfig::nano(), &cfg, Some(dir.path()), None).unwrap();
    let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec!["final.mnx"]);
    let loaded = checkpoint::load_for(dir.path().join("final.mnx"), &VariantConfig::nano()).unwrap();
    assert_eq!(loaded, ModelParams::init(&VariantConfig::nano(), cfg.seed).unwrap());
}
