//! Train briefly, score a defective synthetic image, and render the anomaly
//! map as ASCII shading next to the ground-truth mask.
//!
//! Run with `cargo run --release --example anomaly_map`.

use qpatch::dataio::{generate_synthetic, SynthSpec};
use qpatch::train::{fit, infer_map, TrainConfig};
use qpatch::{AutoencoderConfig, Result};

const SHADES: &[u8] = b" .:-=+*#%@";

fn main() -> Result<()> {
    let spec = SynthSpec { n_train: 40, n_val: 8, n_test: 2, ..SynthSpec::default() };
    let split = generate_synthetic(&spec)?;

    let (patch_size, stride) = (4, 2);
    let acfg = AutoencoderConfig::new(patch_size, 2)?;
    let tcfg = TrainConfig { epochs: 40, seed: 2, ..TrainConfig::default() };
    let state = fit(&split.train, &split.val, &tcfg, &acfg, patch_size, stride)?;

    // test image 0 carries an injected square defect
    let (img, mask) = &split.test[0];
    let map = infer_map(img, &state.params, &acfg, patch_size, stride)?;

    let lo = map.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = map.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!("anomaly map (left, rescaled to [{lo:.3}, {hi:.3}]) vs ground truth (right)\n");
    for r in 0..map.height() {
        let mut line = String::new();
        for c in 0..map.width() {
            let t = (map.get(r, c) - lo) / (hi - lo).max(1e-12);
            let idx = ((t * (SHADES.len() - 1) as f64).round() as usize).min(SHADES.len() - 1);
            line.push(SHADES[idx] as char);
        }
        line.push_str("   ");
        for c in 0..mask.width() {
            line.push(if mask.get(r, c) == 1 { '#' } else { '.' });
        }
        println!("{line}");
    }

    let (mut inside, mut outside) = (0.0, 0.0);
    let (mut n_in, mut n_out) = (0usize, 0usize);
    for (i, &v) in map.values().iter().enumerate() {
        if mask.data()[i] == 1 {
            inside += v;
            n_in += 1;
        } else {
            outside += v;
            n_out += 1;
        }
    }
    println!(
        "\nmean score inside defect {:.4}, outside {:.4}",
        inside / n_in as f64,
        outside / n_out as f64
    );
    Ok(())
}
