//! Command implementations behind the `qpatch` binary: train, evaluate,
//! infer, compare, gen-synth.
//!
//! Every command takes a validated [`RunConfig`] and writes its artifacts
//! under the config's output directory, guarded by a lockfile so two
//! processes cannot interleave writes. All floats are serialized with
//! shortest round-trip formatting, making artifacts bit-reproducible from
//! (config, seed).

use std::path::{Path, PathBuf};

use crate::ansatz::AutoencoderConfig;
use crate::baseline;
use crate::checkpoint::{Checkpoint, ModelParams};
use crate::config::{DataSource, ModelKind, RunConfig};
use crate::dataio::{self, DatasetSplit};
use crate::error::{Error, Result};
use crate::metrics::{EvalReport, MaskImage};
use crate::patchflow::{ImageTensor, ScoreMap};
use crate::pgm;
use crate::train::{self, InferOptions};

/// Exclusive claim on an output directory; the lockfile disappears on drop.
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "output directory {} is locked by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Materialize the dataset a config points at.
pub fn load_dataset(cfg: &RunConfig) -> Result<DatasetSplit> {
    match &cfg.data {
        DataSource::Synthetic(spec) => dataio::generate_synthetic(spec),
        DataSource::MvtecLayout { root, category } => {
            dataio::load_mvtec_layout(root, category, cfg.seeds[0])
        }
    }
}

fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

fn loss_csv(history: &[train::EpochLoss]) -> String {
    let mut csv = String::from("epoch,train_loss,val_loss\n");
    for e in history {
        csv.push_str(&format!("{},{},{}\n", e.epoch, e.train, e.val));
    }
    csv
}

fn infer_options(cfg: &RunConfig, seed: u64) -> InferOptions {
    InferOptions {
        reset_trash_before_decode: cfg.reset_trash_before_decode,
        shots: cfg.shots,
        shot_seed: seed,
        ..InferOptions::default()
    }
}

/// Train one model per seed; write per-seed checkpoint + loss history and a
/// run manifest.
pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let split = load_dataset(cfg)?;
    let _lock = OutputLock::acquire(&cfg.out)?;
    std::fs::write(cfg.out.join("manifest.txt"), cfg.to_manifest())?;

    for &seed in &cfg.seeds {
        let tcfg = cfg.train_config(seed);
        let dir = seed_dir(&cfg.out, seed);
        std::fs::create_dir_all(&dir)?;
        let (model, history, adam) = match cfg.model {
            ModelKind::Quantum => {
                let acfg = AutoencoderConfig::new(cfg.patch_size, cfg.bottleneck_dim)?;
                let state = train::fit(
                    &split.train,
                    &split.val,
                    &tcfg,
                    &acfg,
                    cfg.patch_size,
                    cfg.stride,
                )?;
                (ModelParams::Quantum(state.params), state.history, state.adam)
            }
            ModelKind::Classical => {
                let state =
                    baseline::train_baseline(&split.train, &split.val, &tcfg, cfg.stride)?;
                (ModelParams::Classical(state.model), state.history, state.adam)
            }
        };
        let mut ckpt = Checkpoint {
            patch_size: cfg.patch_size,
            stride: cfg.stride,
            bottleneck_dim: cfg.bottleneck_dim,
            seed,
            epoch: cfg.epochs,
            model,
            adam_m: Vec::new(),
            adam_v: Vec::new(),
            adam_step: 0,
        };
        ckpt.from_adam(&adam);
        ckpt.save(&dir.join("checkpoint.txt"))?;
        std::fs::write(dir.join("loss.csv"), loss_csv(&history))?;
    }
    Ok(())
}

fn checkpoint_for_seed(cfg: &RunConfig, seed: u64) -> Result<Checkpoint> {
    let path = seed_dir(&cfg.out, seed).join("checkpoint.txt");
    let ckpt = Checkpoint::load(&path)?;
    if ckpt.patch_size != cfg.patch_size
        || ckpt.stride != cfg.stride
        || ckpt.bottleneck_dim != cfg.bottleneck_dim
    {
        return Err(Error::Config(format!(
            "checkpoint {} geometry (P={}, S={}, BD={}) does not match config (P={}, S={}, BD={})",
            path.display(),
            ckpt.patch_size,
            ckpt.stride,
            ckpt.bottleneck_dim,
            cfg.patch_size,
            cfg.stride,
            cfg.bottleneck_dim
        )));
    }
    Ok(ckpt)
}

fn score_test_set(
    cfg: &RunConfig,
    ckpt: &Checkpoint,
    split: &DatasetSplit,
    seed: u64,
) -> Result<(Vec<ScoreMap>, Vec<MaskImage>)> {
    let mut maps = Vec::with_capacity(split.test.len());
    let mut gts = Vec::with_capacity(split.test.len());
    for (img, mask) in &split.test {
        let map = match &ckpt.model {
            ModelParams::Quantum(params) => {
                let acfg = AutoencoderConfig::new(cfg.patch_size, cfg.bottleneck_dim)?;
                train::infer_map_with(
                    img,
                    params,
                    &acfg,
                    cfg.patch_size,
                    cfg.stride,
                    infer_options(cfg, seed),
                )?
            }
            ModelParams::Classical(model) => {
                baseline::infer_map(img, model, cfg.patch_size, cfg.stride)?
            }
        };
        maps.push(map);
        gts.push(mask.clone());
    }
    Ok((maps, gts))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

/// Evaluate the trained checkpoints over the config's seed list; write
/// per-seed report CSVs and an aggregate summary.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let split = load_dataset(cfg)?;
    if split.test.is_empty() {
        return Err(Error::Data("evaluation needs a non-empty test set".into()));
    }

    let mut aurocs = Vec::new();
    let mut aupros = Vec::new();
    for &seed in &cfg.seeds {
        let ckpt = checkpoint_for_seed(cfg, seed)?;
        let (maps, gts) = score_test_set(cfg, &ckpt, &split, seed)?;
        let report = EvalReport::compute(&maps, &gts)?;
        let dir = seed_dir(&cfg.out, seed);
        std::fs::write(dir.join("eval.csv"), report.to_csv())?;
        std::fs::write(dir.join("eval_summary.txt"), report.summary())?;
        aurocs.push(report.auroc);
        aupros.push(report.aupro);
    }

    let mut csv = String::from("seed,auroc,aupro\n");
    for ((&seed, auroc), aupro) in cfg.seeds.iter().zip(&aurocs).zip(&aupros) {
        csv.push_str(&format!("{seed},{auroc},{aupro}\n"));
    }
    let (am, asd) = mean_std(&aurocs);
    let (pm, psd) = mean_std(&aupros);
    csv.push_str(&format!("mean,{am},{pm}\n"));
    csv.push_str(&format!("std,{asd},{psd}\n"));
    std::fs::write(cfg.out.join("summary.csv"), csv)?;
    Ok(())
}

fn map_csv(map: &ScoreMap) -> String {
    let mut csv = String::new();
    for r in 0..map.height() {
        let row: Vec<String> =
            (0..map.width()).map(|c| map.get(r, c).to_string()).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    csv
}

/// Score a single image with a trained checkpoint; write the anomaly map as
/// a 16-bit PGM plus a raw CSV of float values.
pub fn cmd_infer(cfg: &RunConfig, image_path: &Path) -> Result<()> {
    cfg.validate()?;
    let seed = cfg.seeds[0];
    let ckpt = checkpoint_for_seed(cfg, seed)?;

    let p = pgm::read_pgm(image_path)?;
    if p.width != p.height {
        return Err(Error::Data(format!(
            "{}: images must be square, got {}x{}",
            image_path.display(),
            p.width,
            p.height
        )));
    }
    let maxval = f64::from(p.maxval);
    let img = ImageTensor::new(
        p.height,
        p.width,
        p.samples.iter().map(|&s| f64::from(s) / maxval).collect(),
    )?;

    let map = match &ckpt.model {
        ModelParams::Quantum(params) => {
            let acfg = AutoencoderConfig::new(cfg.patch_size, cfg.bottleneck_dim)?;
            train::infer_map_with(
                &img,
                params,
                &acfg,
                cfg.patch_size,
                cfg.stride,
                infer_options(cfg, seed),
            )?
        }
        ModelParams::Classical(model) => {
            baseline::infer_map(&img, model, cfg.patch_size, cfg.stride)?
        }
    };

    let stem = image_path.file_stem().unwrap_or_default().to_string_lossy();
    let samples: Vec<u16> = map
        .values()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    std::fs::create_dir_all(&cfg.out)?;
    pgm::write_pgm16(
        &cfg.out.join(format!("{stem}_map.pgm")),
        map.width(),
        map.height(),
        &samples,
    )?;
    std::fs::write(cfg.out.join(format!("{stem}_map.csv")), map_csv(&map))?;
    Ok(())
}

/// Train and evaluate both models on the same data and geometry; write a
/// side-by-side comparison CSV.
pub fn cmd_compare(quantum: &RunConfig, classical: &RunConfig, out: &Path) -> Result<()> {
    quantum.validate()?;
    classical.validate()?;
    if quantum.model != ModelKind::Quantum || classical.model != ModelKind::Classical {
        return Err(Error::Config(
            "compare takes one quantum and one classical config".into(),
        ));
    }
    if quantum.patch_size != classical.patch_size
        || quantum.stride != classical.stride
        || quantum.data != classical.data
        || quantum.seeds != classical.seeds
    {
        return Err(Error::Config(
            "compared runs must share dataset, patch size, stride, and seed list".into(),
        ));
    }

    cmd_train(quantum)?;
    cmd_train(classical)?;

    let split = load_dataset(quantum)?;
    if split.test.is_empty() {
        return Err(Error::Data("comparison needs a non-empty test set".into()));
    }

    let mut csv = String::from("model,seed,n_params,auroc,aupro\n");
    let mut rows: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for cfg in [quantum, classical] {
        let mut aurocs = Vec::new();
        let mut aupros = Vec::new();
        for &seed in &cfg.seeds {
            let ckpt = checkpoint_for_seed(cfg, seed)?;
            let (maps, gts) = score_test_set(cfg, &ckpt, &split, seed)?;
            let report = EvalReport::compute(&maps, &gts)?;
            csv.push_str(&format!(
                "{},{seed},{},{},{}\n",
                cfg.model,
                ckpt.model.n_trainable(),
                report.auroc,
                report.aupro
            ));
            aurocs.push(report.auroc);
            aupros.push(report.aupro);
        }
        rows.push((cfg.model.to_string(), aurocs, aupros));
    }
    for (model, aurocs, aupros) in &rows {
        let (am, asd) = mean_std(aurocs);
        let (pm, psd) = mean_std(aupros);
        csv.push_str(&format!("{model},mean,,{am},{pm}\n"));
        csv.push_str(&format!("{model},std,,{asd},{psd}\n"));
    }

    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("compare.csv"), csv)?;
    Ok(())
}

/// Write the synthetic dataset described by the config to disk in the
/// loader's directory layout.
pub fn cmd_gen_synth(cfg: &RunConfig) -> Result<()> {
    let spec = match &cfg.data {
        DataSource::Synthetic(spec) => spec,
        DataSource::MvtecLayout { .. } => {
            return Err(Error::Config(
                "gen-synth needs a synthetic data source".into(),
            ))
        }
    };
    let split = dataio::generate_synthetic(spec)?;
    std::fs::create_dir_all(&cfg.out)?;
    dataio::write_synthetic_tree(&split, spec, &cfg.out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::SynthSpec;

    fn tiny_config(out: &Path) -> RunConfig {
        RunConfig {
            patch_size: 4,
            stride: 4,
            bottleneck_dim: 2,
            epochs: 1,
            seeds: vec![0],
            data: DataSource::Synthetic(SynthSpec {
                n_train: 2,
                n_val: 1,
                n_test: 2,
                ..SynthSpec::default()
            }),
            out: out.to_path_buf(),
            ..RunConfig::default()
        }
    }

    #[test]
    fn lockfile_blocks_second_acquire() {
        let dir = tempfile::tempdir().unwrap();
        let lock = OutputLock::acquire(dir.path()).unwrap();
        assert!(matches!(OutputLock::acquire(dir.path()), Err(Error::Config(_))));
        drop(lock);
        OutputLock::acquire(dir.path()).unwrap();
    }

    #[test]
    fn train_then_evaluate_produces_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        cmd_train(&cfg).unwrap();
        assert!(dir.path().join("manifest.txt").is_file());
        assert!(dir.path().join("seed_0/checkpoint.txt").is_file());
        assert!(dir.path().join("seed_0/loss.csv").is_file());

        cmd_evaluate(&cfg).unwrap();
        assert!(dir.path().join("seed_0/eval.csv").is_file());
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(summary.starts_with("seed,auroc,aupro\n"));
        assert!(summary.contains("\nmean,"));
        assert!(summary.contains("\nstd,"));
    }

    #[test]
    fn evaluate_rejects_geometry_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        cmd_train(&cfg).unwrap();
        let wrong = RunConfig { stride: 2, ..cfg };
        assert!(matches!(cmd_evaluate(&wrong), Err(Error::Config(_))));
    }

    #[test]
    fn infer_writes_pgm_and_exact_csv() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        cmd_train(&cfg).unwrap();

        // round-trip one synthetic test image through disk
        let split = load_dataset(&cfg).unwrap();
        let img_path = dir.path().join("query.pgm");
        let bytes: Vec<u8> = split.test[0]
            .0
            .pixels()
            .iter()
            .map(|&v| (v * 255.0).round() as u8)
            .collect();
        pgm::write_pgm8(&img_path, 32, 32, &bytes).unwrap();

        cmd_infer(&cfg, &img_path).unwrap();
        let map_pgm = pgm::read_pgm(&dir.path().join("query_map.pgm")).unwrap();
        assert_eq!((map_pgm.width, map_pgm.height, map_pgm.maxval), (32, 32, 65535));

        // CSV reconstructs the in-memory map exactly
        let csv = std::fs::read_to_string(dir.path().join("query_map.csv")).unwrap();
        let parsed: Vec<f64> = csv
            .lines()
            .flat_map(|l| l.split(','))
            .map(|t| t.parse().unwrap())
            .collect();
        assert_eq!(parsed.len(), 1024);
        let roundtrip: Vec<String> = parsed.iter().map(f64::to_string).collect();
        let original: Vec<String> =
            csv.lines().flat_map(|l| l.split(',')).map(str::to_string).collect();
        assert_eq!(roundtrip, original);
    }

    #[test]
    fn gen_synth_tree_loads_back() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        cmd_gen_synth(&cfg).unwrap();
        let split = dataio::load_mvtec_layout(dir.path(), "synthetic", 0).unwrap();
        assert_eq!(split.test.len(), 2);
    }
}
