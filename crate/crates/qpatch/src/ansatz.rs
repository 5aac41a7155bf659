//! MPS staircase ansatz: encoder, adjoint decoder, and the two SWAP-test
//! circuits used for training (trash vs reference) and testing (input vs
//! reconstruction).
//!
//! The encoder is a single staircase of two-qubit blocks on adjacent pairs
//! (j, j+1), j = 0..n−2. Each block applies RY(θ_{2j}) on j, RY(θ_{2j+1}) on
//! j+1, then CNOT(j → j+1), so an n-qubit patch register trains
//! 2(n−1) angles.
//!
//! Register conventions (qubit 0 = MSB, see `statevec`):
//! - training circuit: [data 0..n | reference n..n+n_t | ancilla n+n_t]
//! - test circuit: the trash register is discarded after encoding and
//!   replaced by fresh |0⟩ qubits before decoding; the reconstruction is
//!   SWAP-tested against an untouched copy of the input. The ancilla
//!   statistics are evaluated analytically (see [`test_similarity_with`]).
//!
//! The compressed subsystem occupies the first `bottleneck_dim` data qubits;
//! the trailing `n_trash` data qubits are the trash register.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::statevec::StateVector;

/// Trainable rotation angles for the staircase encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct MpsParams {
    angles: Vec<f64>,
    n_data_qubits: usize,
}

impl MpsParams {
    pub fn new(n_data_qubits: usize, angles: Vec<f64>) -> Result<Self> {
        let expected = Self::n_params(n_data_qubits)?;
        if angles.len() != expected {
            return Err(Error::Dimension(format!(
                "expected {expected} angles for {n_data_qubits} data qubits, got {}",
                angles.len()
            )));
        }
        Ok(Self { angles, n_data_qubits })
    }

    /// 2(n − 1) trainable parameters for an n-qubit staircase.
    pub fn n_params(n_data_qubits: usize) -> Result<usize> {
        if n_data_qubits < 2 {
            return Err(Error::Argument(format!(
                "staircase needs at least 2 data qubits, got {n_data_qubits}"
            )));
        }
        Ok(2 * (n_data_qubits - 1))
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn angles_mut(&mut self) -> &mut [f64] {
        &mut self.angles
    }

    pub fn n_data_qubits(&self) -> usize {
        self.n_data_qubits
    }
}

/// Geometry of one autoencoder instance: patch size and bottleneck split.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AutoencoderConfig {
    pub patch_size: usize,
    pub n_data_qubits: usize,
    pub bottleneck_dim: usize,
    pub n_trash: usize,
}

impl AutoencoderConfig {
    pub fn new(patch_size: usize, bottleneck_dim: usize) -> Result<Self> {
        let n_pixels = patch_size * patch_size;
        if patch_size == 0 || !n_pixels.is_power_of_two() {
            return Err(Error::Argument(format!(
                "patch size {patch_size} does not give a power-of-two pixel count"
            )));
        }
        let n_data_qubits = n_pixels.trailing_zeros() as usize;
        if bottleneck_dim == 0 || bottleneck_dim > n_data_qubits {
            return Err(Error::Argument(format!(
                "bottleneck dim {bottleneck_dim} outside 1..={n_data_qubits}"
            )));
        }
        Ok(Self {
            patch_size,
            n_data_qubits,
            bottleneck_dim,
            n_trash: n_data_qubits - bottleneck_dim,
        })
    }

    /// Compression percentage: (1 − 2^BD / P²) · 100. Exact in f64 (dyadic).
    pub fn compression_percent(&self) -> f64 {
        let kept = (1u64 << self.bottleneck_dim) as f64;
        let total = (self.patch_size * self.patch_size) as f64;
        (1.0 - kept / total) * 100.0
    }
}

/// One staircase block: the qubit pair it acts on and the angle indices it
/// consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub qubits: (usize, usize),
    pub params: (usize, usize),
}

/// Staircase layout: block j acts on qubits (j, j+1) with angles (2j, 2j+1).
pub fn mps_block_layout(n_data_qubits: usize) -> Result<Vec<Block>> {
    if n_data_qubits < 2 {
        return Err(Error::Argument(format!(
            "staircase needs at least 2 data qubits, got {n_data_qubits}"
        )));
    }
    Ok((0..n_data_qubits - 1)
        .map(|j| Block {
            qubits: (j, j + 1),
            params: (2 * j, 2 * j + 1),
        })
        .collect())
}

/// Run the encoder on the first `params.n_data_qubits()` qubits of `state`.
pub fn apply_encoder(state: &mut StateVector, params: &MpsParams) -> Result<()> {
    if state.n_qubits() < params.n_data_qubits() {
        return Err(Error::Dimension(format!(
            "register has {} qubits, encoder needs {}",
            state.n_qubits(),
            params.n_data_qubits()
        )));
    }
    for block in mps_block_layout(params.n_data_qubits())? {
        let (a, b) = block.qubits;
        let (pa, pb) = block.params;
        state.apply_ry(a, params.angles()[pa])?;
        state.apply_ry(b, params.angles()[pb])?;
        state.apply_cnot(a, b)?;
    }
    Ok(())
}

/// Exact adjoint of [`apply_encoder`]: blocks reversed, each as CNOT then the
/// negated rotations.
pub fn apply_decoder(state: &mut StateVector, params: &MpsParams) -> Result<()> {
    if state.n_qubits() < params.n_data_qubits() {
        return Err(Error::Dimension(format!(
            "register has {} qubits, decoder needs {}",
            state.n_qubits(),
            params.n_data_qubits()
        )));
    }
    for block in mps_block_layout(params.n_data_qubits())?.iter().rev() {
        let (a, b) = block.qubits;
        let (pa, pb) = block.params;
        state.apply_cnot(a, b)?;
        state.apply_ry(b, -params.angles()[pb])?;
        state.apply_ry(a, -params.angles()[pa])?;
    }
    Ok(())
}

/// Training-phase score: encode the patch, SWAP-test the trash qubits against
/// a fresh |0…0⟩ reference, return ⟨σz⟩ on the ancilla. In [−1, 1]; equals
/// the trash/reference fidelity for product trash states.
pub fn training_fidelity(
    patch_state: &StateVector,
    params: &MpsParams,
    cfg: &AutoencoderConfig,
) -> Result<f64> {
    let n = cfg.n_data_qubits;
    if patch_state.n_qubits() != n {
        return Err(Error::Dimension(format!(
            "patch state has {} qubits, config expects {n}",
            patch_state.n_qubits()
        )));
    }
    if cfg.n_trash == 0 {
        // No trash register: compression is trivially exact.
        return Ok(1.0);
    }
    let aux = StateVector::zero(cfg.n_trash + 1)?;
    let mut reg = patch_state.tensor(&aux)?;
    apply_encoder(&mut reg, params)?;
    let ancilla = n + cfg.n_trash;
    reg.apply_hadamard(ancilla)?;
    for i in 0..cfg.n_trash {
        reg.apply_cswap(ancilla, cfg.bottleneck_dim + i, n + i)?;
    }
    reg.apply_hadamard(ancilla)?;
    reg.expect_z(ancilla)
}

/// Test-phase score: encode one copy of the patch state, discard the trash
/// register (trace it out and substitute fresh |0⟩ qubits), decode, and
/// SWAP-test the reconstruction against an untouched copy. Returns
/// P(ancilla = 0) = (1 + F)/2 ∈ [0.5, 1] with F the reconstruction fidelity.
pub fn test_similarity(
    patch_state: &StateVector,
    params: &MpsParams,
    cfg: &AutoencoderConfig,
) -> Result<f64> {
    test_similarity_with(patch_state, params, cfg, false)
}

/// [`test_similarity`] with an alternative trash-disposal convention: when
/// `reset_trash_before_decode` is set, the trash qubits are projected to |0⟩
/// with renormalization (post-selection) instead of being traced out.
///
/// For the default discard, the ancilla statistics are computed exactly
/// without materializing the 2n + n_t + 1 qubit register: with |ψ⟩ = U|φ⟩
/// split as ψ[a, b] over (bottleneck, trash) indices, the SWAP test sees
/// F = ⟨ψ| (ρ_A ⊗ |0⟩⟨0|) |ψ⟩ = Σ_b |Σ_a ψ*[a, 0] ψ[a, b]|², because the
/// decoder and its adjoint from the copy side cancel inside the overlap.
pub fn test_similarity_with(
    patch_state: &StateVector,
    params: &MpsParams,
    cfg: &AutoencoderConfig,
    reset_trash_before_decode: bool,
) -> Result<f64> {
    let n = cfg.n_data_qubits;
    if patch_state.n_qubits() != n {
        return Err(Error::Dimension(format!(
            "patch state has {} qubits, config expects {n}",
            patch_state.n_qubits()
        )));
    }
    if cfg.n_trash == 0 {
        // no compression: decoder∘encoder is exactly the identity
        return Ok(1.0);
    }

    if reset_trash_before_decode {
        let mut reg = patch_state
            .tensor(patch_state)?
            .tensor(&StateVector::zero(1)?)?;
        apply_encoder(&mut reg, params)?;
        for i in 0..cfg.n_trash {
            reg.project_zero(cfg.bottleneck_dim + i)?;
        }
        apply_decoder(&mut reg, params)?;
        let ancilla = 2 * n;
        reg.apply_hadamard(ancilla)?;
        for q in 0..n {
            reg.apply_cswap(ancilla, q, n + q)?;
        }
        reg.apply_hadamard(ancilla)?;
        return reg.prob_zero(ancilla);
    }

    let mut psi = patch_state.clone();
    apply_encoder(&mut psi, params)?;
    let amps = psi.amplitudes();
    let d_trash = 1usize << cfg.n_trash;
    let d_keep = 1usize << cfg.bottleneck_dim;
    let mut fidelity = 0.0;
    for b in 0..d_trash {
        let mut inner = Complex64::new(0.0, 0.0);
        for a in 0..d_keep {
            inner += amps[a * d_trash].conj() * amps[a * d_trash + b];
        }
        fidelity += inner.norm_sqr();
    }
    Ok((1.0 + fidelity) / 2.0)
}
