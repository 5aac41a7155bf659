//! Quantum-vs-classical comparison at matched compression: both models see
//! the same 8x8 patches and the classical dense net uses a 4-unit
//! bottleneck, matching the 2-qubit (4-amplitude) quantum bottleneck.
//!
//! Run with `cargo run --release --example compare_models`.

use qpatch::cli::cmd_compare;
use qpatch::config::{DataSource, ModelKind, RunConfig};
use qpatch::dataio::SynthSpec;
use qpatch::Result;

fn main() -> Result<()> {
    let out = std::env::temp_dir().join("qpatch_compare_example");
    let _ = std::fs::remove_dir_all(&out);

    let base = RunConfig {
        patch_size: 8,
        stride: 4,
        bottleneck_dim: 2,
        epochs: 20,
        seeds: vec![0, 1],
        data: DataSource::Synthetic(SynthSpec {
            n_train: 40,
            n_val: 8,
            n_test: 10,
            ..SynthSpec::default()
        }),
        ..RunConfig::default()
    };
    let quantum = RunConfig {
        model: ModelKind::Quantum,
        out: out.join("quantum"),
        ..base.clone()
    };
    let classical = RunConfig {
        model: ModelKind::Classical,
        out: out.join("classical"),
        ..base
    };

    println!(
        "compression {:.2}% | quantum params {} | classical params {}",
        100.0 * (1.0 - 4.0 / 64.0),
        quantum.n_trainable()?,
        classical.n_trainable()?
    );
    cmd_compare(&quantum, &classical, &out)?;

    print!("{}", std::fs::read_to_string(out.join("compare.csv"))?);
    Ok(())
}
