//! Thin command-line front end over [`qpatch::cli`]: parse flags, merge them
//! into a `RunConfig`, dispatch, and translate errors into exit codes.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qpatch::cli;
use qpatch::config::{DataSource, ModelKind, RunConfig};
use qpatch::dataio::{DefectShape, SynthSpec, Texture};
use qpatch::error::Result;

#[derive(Parser)]
#[command(name = "qpatch", version, about = "Patch-based autoencoder anomaly segmentation")]
struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each one overrides the corresponding
/// config-file key.
#[derive(Args, Clone)]
struct CommonFlags {
    /// Flat key=value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training/evaluation seeds (comma-separated).
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Square patch side P (2, 4, or 8).
    #[arg(long)]
    patch_size: Option<usize>,
    /// Sliding-window stride S.
    #[arg(long)]
    stride: Option<usize>,
    /// Bottleneck qubits BD (1 or 2).
    #[arg(long)]
    bottleneck: Option<usize>,
    /// Model kind: quantum or classical.
    #[arg(long)]
    model: Option<ModelKind>,
    /// Root of an MVTec-layout dataset tree.
    #[arg(long)]
    data_root: Option<PathBuf>,
    /// Dataset category under the root.
    #[arg(long)]
    category: Option<String>,
    /// Output directory for all artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sample the ancilla with this many shots instead of exact readout.
    #[arg(long)]
    shots: Option<u32>,
    /// Project trash qubits to |0> between encoder and decoder at inference.
    #[arg(long)]
    reset_trash_before_decode: bool,
}

#[derive(Args, Clone)]
struct SynthFlags {
    /// Synthetic texture: stripes, blobs, or uniform-noise.
    #[arg(long)]
    texture: Option<Texture>,
    /// Injected defect shape: square, ellipse, or scratch.
    #[arg(long)]
    defect: Option<DefectShape>,
    /// Intensity shift added inside the defect region.
    #[arg(long)]
    defect_delta: Option<f64>,
    /// Seed for dataset generation / subsampling.
    #[arg(long)]
    data_seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model per seed; writes checkpoints, loss CSVs, manifest.
    Train {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        synth: SynthFlags,
    },
    /// Evaluate trained checkpoints; writes per-seed reports and a summary.
    Evaluate {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        synth: SynthFlags,
    },
    /// Score one image; writes a 16-bit PGM anomaly map plus a raw CSV.
    Infer {
        /// Square binary-PGM image to score.
        image: PathBuf,
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        synth: SynthFlags,
    },
    /// Train and evaluate quantum vs classical on the same data; writes a
    /// side-by-side CSV.
    Compare {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        synth: SynthFlags,
    },
    /// Generate the synthetic dataset tree on disk.
    GenSynth {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        synth: SynthFlags,
        /// Number of normal training images.
        #[arg(long)]
        n_train: Option<usize>,
        /// Number of normal validation images.
        #[arg(long)]
        n_val: Option<usize>,
        /// Number of test images (defective and clean alternate).
        #[arg(long)]
        n_test: Option<usize>,
    },
}

fn build_config(common: &CommonFlags, synth: &SynthFlags) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if !common.seed.is_empty() {
        cfg.seeds = common.seed.clone();
    }
    if let Some(p) = common.patch_size {
        cfg.patch_size = p;
    }
    if let Some(s) = common.stride {
        cfg.stride = s;
    }
    if let Some(bd) = common.bottleneck {
        cfg.bottleneck_dim = bd;
    }
    if let Some(m) = common.model {
        cfg.model = m;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    if let Some(shots) = common.shots {
        cfg.shots = Some(shots);
    }
    if common.reset_trash_before_decode {
        cfg.reset_trash_before_decode = true;
    }

    if common.data_root.is_some() || common.category.is_some() {
        let (mut root, mut category) = match &cfg.data {
            DataSource::MvtecLayout { root, category } => (root.clone(), category.clone()),
            DataSource::Synthetic(_) => (PathBuf::new(), String::new()),
        };
        if let Some(r) = &common.data_root {
            root = r.clone();
        }
        if let Some(c) = &common.category {
            category = c.clone();
        }
        cfg.data = DataSource::MvtecLayout { root, category };
    } else if synth.texture.is_some()
        || synth.defect.is_some()
        || synth.defect_delta.is_some()
        || synth.data_seed.is_some()
    {
        let mut spec = match &cfg.data {
            DataSource::Synthetic(s) => s.clone(),
            DataSource::MvtecLayout { .. } => SynthSpec::default(),
        };
        if let Some(t) = synth.texture {
            spec.texture = t;
        }
        if let Some(d) = synth.defect {
            spec.defect = d;
        }
        if let Some(delta) = synth.defect_delta {
            spec.defect_intensity_delta = delta;
        }
        if let Some(seed) = synth.data_seed {
            spec.seed = seed;
        }
        cfg.data = DataSource::Synthetic(spec);
    }
    Ok(cfg)
}

fn run(args: CliArgs) -> Result<()> {
    match args.command {
        Command::Train { common, synth } => cli::cmd_train(&build_config(&common, &synth)?),
        Command::Evaluate { common, synth } => cli::cmd_evaluate(&build_config(&common, &synth)?),
        Command::Infer { image, common, synth } => {
            cli::cmd_infer(&build_config(&common, &synth)?, &image)
        }
        Command::Compare { common, synth } => {
            let base = build_config(&common, &synth)?;
            let out = base.out.clone();
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
            cli::cmd_compare(&quantum, &classical, &out)
        }
        Command::GenSynth { common, synth, n_train, n_val, n_test } => {
            let mut cfg = build_config(&common, &synth)?;
            if let DataSource::Synthetic(spec) = &mut cfg.data {
                if let Some(n) = n_train {
                    spec.n_train = n;
                }
                if let Some(n) = n_val {
                    spec.n_val = n;
                }
                if let Some(n) = n_test {
                    spec.n_test = n;
                }
            }
            cli::cmd_gen_synth(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let args = CliArgs::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
