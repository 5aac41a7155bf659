//! Train the quantum patch autoencoder on a small synthetic texture set and
//! print the per-epoch loss curve.
//!
//! Run with `cargo run --release --example train_quantum`.

use qpatch::dataio::{generate_synthetic, SynthSpec};
use qpatch::train::{fit, TrainConfig};
use qpatch::{AutoencoderConfig, Result};

fn main() -> Result<()> {
    let spec = SynthSpec { n_train: 20, n_val: 5, n_test: 2, ..SynthSpec::default() };
    let split = generate_synthetic(&spec)?;

    let patch_size = 4;
    let stride = 2;
    let acfg = AutoencoderConfig::new(patch_size, 2)?;
    let tcfg = TrainConfig { epochs: 8, seed: 0, ..TrainConfig::default() };

    println!(
        "patch {patch_size}x{patch_size}, bottleneck {} qubits, {} trainable angles, {:.2}% compression",
        acfg.bottleneck_dim,
        acfg.n_data_qubits * 2 - 2,
        acfg.compression_percent()
    );
    let state = fit(&split.train, &split.val, &tcfg, &acfg, patch_size, stride)?;

    println!("{:>6} {:>12} {:>12}", "epoch", "train loss", "val loss");
    for e in &state.history {
        println!("{:>6} {:>12.6} {:>12.6}", e.epoch, e.train, e.val);
    }
    println!(
        "best validation loss {:.6} at epoch {}",
        state.best_val, state.best_epoch
    );
    Ok(())
}
