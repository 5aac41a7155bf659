//! Full evaluation report on a small trained model: pixel AUROC, AUPRO,
//! and the Dice/IoU threshold sweeps.
//!
//! Run with `cargo run --release --example evaluate_metrics`.

use qpatch::dataio::{generate_synthetic, SynthSpec};
use qpatch::train::{fit, infer_map, TrainConfig};
use qpatch::{AutoencoderConfig, EvalReport, Result};

fn main() -> Result<()> {
    let spec = SynthSpec { n_train: 40, n_val: 8, n_test: 10, ..SynthSpec::default() };
    let split = generate_synthetic(&spec)?;

    let (patch_size, stride) = (4, 2);
    let acfg = AutoencoderConfig::new(patch_size, 2)?;
    let tcfg = TrainConfig { epochs: 40, seed: 1, ..TrainConfig::default() };
    let state = fit(&split.train, &split.val, &tcfg, &acfg, patch_size, stride)?;

    let mut maps = Vec::new();
    let mut gts = Vec::new();
    for (img, mask) in &split.test {
        maps.push(infer_map(img, &state.params, &acfg, patch_size, stride)?);
        gts.push(mask.clone());
    }

    let report = EvalReport::compute(&maps, &gts)?;
    print!("{}", report.summary());

    println!("\nfirst CSV rows:");
    for line in report.to_csv().lines().take(6) {
        println!("{line}");
    }
    Ok(())
}
