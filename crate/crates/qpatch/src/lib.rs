//! Patch-based autoencoder anomaly segmentation on an exact statevector
//! simulator, with a matched classical baseline.
//!
//! Images are cut into P×P sliding-window patches, each patch is amplitude-
//! encoded into log2(P²) qubits and pushed through a trainable MPS-staircase
//! autoencoder. Training maximizes the trash-register fidelity against
//! |0…0⟩ via a SWAP test; at test time the full encode/decode similarity is
//! inverted into a per-pixel anomaly map. Segmentation quality is scored
//! with pixel AUROC, AUPRO, and Dice/IoU sweeps.
//!
//! Start with [`train::fit`] and [`train::infer_map`] for the library
//! pipeline, or the `examples/` directory for end-to-end walkthroughs. The
//! `qpatch` binary wraps the same pipeline behind `train`, `evaluate`,
//! `infer`, `compare`, and `gen-synth` subcommands.

pub mod ansatz;
pub mod baseline;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataio;
pub mod error;
pub mod metrics;
pub mod patchflow;
pub mod pgm;
pub mod statevec;
pub mod train;

pub use ansatz::{AutoencoderConfig, MpsParams};
pub use error::{Error, Result};
pub use metrics::{EvalReport, MaskImage};
pub use patchflow::{ImageTensor, ScoreMap};
pub use statevec::StateVector;
