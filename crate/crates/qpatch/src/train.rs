//! Image-level cost, parameter-shift gradients, Adam, and the training loop
//! for the quantum model.
//!
//! The cost of one image is 1 − mean(Z′) over covered pixels, where Z′
//! assembles the per-patch training scores (clamped to [0, 1]) with overlap
//! averaging. Because the map is linear in the patch scores, the gradient is
//! the per-patch parameter-shift derivative weighted by each patch's share
//! of the pixel average.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ansatz::{self, AutoencoderConfig, MpsParams};
use crate::error::{Error, Result};
use crate::patchflow::{self, ImageTensor, PatchGrid, ScoreMap};

/// Optimizer and loop hyperparameters. Defaults: 20 epochs, Adam with
/// learning rate 0.005, batch size 4.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            learning_rate: 0.005,
            batch_size: 4,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

/// Plain Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl Adam {
    pub fn new(n_params: usize, cfg: &TrainConfig) -> Self {
        Self {
            lr: cfg.learning_rate,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn apply(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), grad.len());
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Loss record for one epoch. Validation is NaN when no validation set was
/// given.
#[derive(Clone, Copy, Debug)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub val: f64,
}

/// Result of a training run: final parameters, optimizer state, loss
/// history, and the best-validation checkpoint.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub params: MpsParams,
    pub adam: Adam,
    pub epoch: usize,
    pub seed: u64,
    pub history: Vec<EpochLoss>,
    pub best_params: MpsParams,
    pub best_epoch: usize,
    pub best_val: f64,
}

fn clamp_score(z: f64) -> f64 {
    z.clamp(0.0, 1.0)
}

fn patch_scores(grid: &PatchGrid, params: &MpsParams, cfg: &AutoencoderConfig) -> Result<Vec<f64>> {
    grid.patches
        .iter()
        .map(|patch| {
            let state = patchflow::embed_patch(patch)?;
            ansatz::training_fidelity(&state, params, cfg)
        })
        .collect()
}

/// Eq.-style image cost: extract patches, score each with the training
/// circuit, assemble the similarity map, return 1 − mean over covered
/// pixels.
pub fn image_cost(
    img: &ImageTensor,
    params: &MpsParams,
    cfg: &AutoencoderConfig,
    patch_size: usize,
    stride: usize,
) -> Result<f64> {
    let grid = patchflow::extract_patches(img, patch_size, stride)?;
    let scores: Vec<f64> = patch_scores(&grid, params, cfg)?
        .into_iter()
        .map(clamp_score)
        .collect();
    let map = patchflow::assemble_map(&scores, &grid, img.height())?;
    Ok(1.0 - map.mean_covered()?)
}

/// Parameter-shift gradient of [`image_cost`]: every angle feeds exactly one
/// RY gate, so ∂z/∂θ = [z(θ+π/2) − z(θ−π/2)] / 2 per patch circuit, chained
/// through the clamp and the linear overlap average.
pub fn gradient(
    img: &ImageTensor,
    params: &MpsParams,
    cfg: &AutoencoderConfig,
    patch_size: usize,
    stride: usize,
) -> Result<Vec<f64>> {
    Ok(cost_and_gradient(img, params, cfg, patch_size, stride)?.1)
}

pub fn cost_and_gradient(
    img: &ImageTensor,
    params: &MpsParams,
    cfg: &AutoencoderConfig,
    patch_size: usize,
    stride: usize,
) -> Result<(f64, Vec<f64>)> {
    let grid = patchflow::extract_patches(img, patch_size, stride)?;
    let weights = patchflow::patch_weights(&grid, img.height());
    let n_params = params.angles().len();

    let mut cost = 1.0;
    let mut grad = vec![0.0; n_params];
    let mut shifted = params.clone();
    for (patch, &w) in grid.patches.iter().zip(&weights) {
        let state = patchflow::embed_patch(patch)?;
        let z = ansatz::training_fidelity(&state, params, cfg)?;
        cost -= w * clamp_score(z);
        // clamp gate: zero derivative where the raw score is outside (0, 1)
        if z <= 0.0 || z >= 1.0 {
            continue;
        }
        for k in 0..n_params {
            let theta = params.angles()[k];
            shifted.angles_mut()[k] = theta + FRAC_PI_2;
            let plus = ansatz::training_fidelity(&state, &shifted, cfg)?;
            shifted.angles_mut()[k] = theta - FRAC_PI_2;
            let minus = ansatz::training_fidelity(&state, &shifted, cfg)?;
            shifted.angles_mut()[k] = theta;
            grad[k] -= w * (plus - minus) / 2.0;
        }
    }
    Ok((cost, grad))
}

/// Uniform-angle initialization in [0, 2π).
pub fn init_params(n_data_qubits: usize, rng: &mut ChaCha8Rng) -> Result<MpsParams> {
    let k = MpsParams::n_params(n_data_qubits)?;
    MpsParams::new(n_data_qubits, (0..k).map(|_| rng.gen_range(0.0..TAU)).collect())
}

/// Full training loop: seeded init, shuffled minibatches, Adam updates,
/// per-epoch train/validation loss, best-validation checkpoint.
pub fn fit(
    train_images: &[ImageTensor],
    val_images: &[ImageTensor],
    tcfg: &TrainConfig,
    acfg: &AutoencoderConfig,
    patch_size: usize,
    stride: usize,
) -> Result<TrainState> {
    if train_images.is_empty() {
        return Err(Error::Argument("empty training set".into()));
    }
    if patch_size != acfg.patch_size {
        return Err(Error::Config(format!(
            "patch size {patch_size} does not match autoencoder config {}",
            acfg.patch_size
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let mut params = init_params(acfg.n_data_qubits, &mut rng)?;
    let mut adam = Adam::new(params.angles().len(), tcfg);

    let mut history = Vec::with_capacity(tcfg.epochs);
    let mut best_params = params.clone();
    let mut best_epoch = 0usize;
    let mut best_val = f64::INFINITY;

    let mut order: Vec<usize> = (0..train_images.len()).collect();
    for epoch in 1..=tcfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_cost = 0.0;
        for batch in order.chunks(tcfg.batch_size.max(1)) {
            let mut batch_grad = vec![0.0; params.angles().len()];
            for &idx in batch {
                let (cost, grad) =
                    cost_and_gradient(&train_images[idx], &params, acfg, patch_size, stride)?;
                epoch_cost += cost;
                for (bg, g) in batch_grad.iter_mut().zip(&grad) {
                    *bg += g / batch.len() as f64;
                }
            }
            adam.apply(params.angles_mut(), &batch_grad);
        }
        let train_loss = epoch_cost / train_images.len() as f64;

        let val_loss = if val_images.is_empty() {
            f64::NAN
        } else {
            let mut sum = 0.0;
            for img in val_images {
                sum += image_cost(img, &params, acfg, patch_size, stride)?;
            }
            sum / val_images.len() as f64
        };
        history.push(EpochLoss { epoch, train: train_loss, val: val_loss });

        // checkpoint selection: lowest validation loss, falling back to the
        // train loss when no validation set exists
        let selector = if val_loss.is_nan() { train_loss } else { val_loss };
        if selector < best_val {
            best_val = selector;
            best_params = params.clone();
            best_epoch = epoch;
        }
    }

    Ok(TrainState {
        params,
        adam,
        epoch: tcfg.epochs,
        seed: tcfg.seed,
        history,
        best_params,
        best_epoch,
        best_val,
    })
}

/// Inference options for the scoring pipeline.
#[derive(Clone, Copy, Debug, Default)]
pub struct InferOptions {
    /// Project trash qubits to |0⟩ between encoder and decoder.
    pub reset_trash_before_decode: bool,
    /// Shot-sampled ancilla statistics instead of exact expectations.
    pub shots: Option<u32>,
    /// Seed for the shot sampler.
    pub shot_seed: u64,
    /// Score all-zero patches as 1 instead of embedding the uniform state.
    pub zero_patch_scores_one: bool,
}

/// Test-phase anomaly map: per-patch similarity via the full autoencoder
/// SWAP test, overlap-averaged, inverted to Y = 1 − Z.
pub fn infer_map(
    img: &ImageTensor,
    params: &MpsParams,
    cfg: &AutoencoderConfig,
    patch_size: usize,
    stride: usize,
) -> Result<ScoreMap> {
    infer_map_with(img, params, cfg, patch_size, stride, InferOptions::default())
}

pub fn infer_map_with(
    img: &ImageTensor,
    params: &MpsParams,
    cfg: &AutoencoderConfig,
    patch_size: usize,
    stride: usize,
    opts: InferOptions,
) -> Result<ScoreMap> {
    let grid = patchflow::extract_patches(img, patch_size, stride)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.shot_seed);
    let mut scores = Vec::with_capacity(grid.len());
    for patch in &grid.patches {
        if opts.zero_patch_scores_one && patch.iter().all(|&v| v == 0.0) {
            scores.push(1.0);
            continue;
        }
        let state = patchflow::embed_patch(patch)?;
        let z = ansatz::test_similarity_with(&state, params, cfg, opts.reset_trash_before_decode)?;
        let z = match opts.shots {
            Some(shots) => {
                // re-derive the sampled statistic from the exact probability
                let hits = (0..shots).filter(|_| rng.gen::<f64>() < z).count();
                hits as f64 / f64::from(shots)
            }
            None => z,
        };
        scores.push(z);
    }
    let map_z = patchflow::assemble_map(&scores, &grid, img.height())?;
    Ok(patchflow::to_anomaly(&map_z))
}
