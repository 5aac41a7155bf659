//! Classical comparison model: a fully connected 64-4-64 autoencoder with
//! ReLU after each dense layer, scored per patch by cosine similarity and
//! trained with the same cost, optimizer, and map assembly as the quantum
//! model.

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::patchflow::{self, ImageTensor, ScoreMap};
use crate::train::{Adam, EpochLoss, TrainConfig};

pub const INPUT_DIM: usize = 64;
pub const BOTTLENECK_UNITS: usize = 4;

/// Dense 64→4→64 autoencoder. Weights are stored row-major per output unit.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseAutoencoder {
    pub w1: Vec<f64>, // 4 x 64
    pub b1: Vec<f64>, // 4
    pub w2: Vec<f64>, // 64 x 4
    pub b2: Vec<f64>, // 64
}

impl DenseAutoencoder {
    /// Uniform init in ±sqrt(1/fan_in), seeded.
    pub fn init(rng: &mut ChaCha8Rng) -> Self {
        let lim1 = (1.0 / INPUT_DIM as f64).sqrt();
        let lim2 = (1.0 / BOTTLENECK_UNITS as f64).sqrt();
        Self {
            w1: (0..BOTTLENECK_UNITS * INPUT_DIM)
                .map(|_| rng.gen_range(-lim1..lim1))
                .collect(),
            b1: (0..BOTTLENECK_UNITS).map(|_| rng.gen_range(-lim1..lim1)).collect(),
            w2: (0..INPUT_DIM * BOTTLENECK_UNITS)
                .map(|_| rng.gen_range(-lim2..lim2))
                .collect(),
            b2: (0..INPUT_DIM).map(|_| rng.gen_range(-lim2..lim2)).collect(),
        }
    }

    pub fn zeros() -> Self {
        Self {
            w1: vec![0.0; BOTTLENECK_UNITS * INPUT_DIM],
            b1: vec![0.0; BOTTLENECK_UNITS],
            w2: vec![0.0; INPUT_DIM * BOTTLENECK_UNITS],
            b2: vec![0.0; INPUT_DIM],
        }
    }

    /// Weights plus biases of both layers.
    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    fn flat_len(&self) -> usize {
        self.param_count()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        out.extend(&self.w1);
        out.extend(&self.b1);
        out.extend(&self.w2);
        out.extend(&self.b2);
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        let mut model = Self::zeros();
        if flat.len() != model.flat_len() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                model.flat_len(),
                flat.len()
            )));
        }
        let mut it = flat.iter();
        for w in model
            .w1
            .iter_mut()
            .chain(&mut model.b1)
            .chain(&mut model.w2)
            .chain(&mut model.b2)
        {
            *w = *it.next().unwrap();
        }
        Ok(model)
    }
}

struct ForwardCache {
    h_pre: Vec<f64>,
    h: Vec<f64>,
    y_pre: Vec<f64>,
    y: Vec<f64>,
}

fn forward_cached(model: &DenseAutoencoder, patch: &[f64]) -> ForwardCache {
    let mut h_pre = model.b1.clone();
    for (u, hp) in h_pre.iter_mut().enumerate() {
        for (x, w) in patch.iter().zip(&model.w1[u * INPUT_DIM..(u + 1) * INPUT_DIM]) {
            *hp += w * x;
        }
    }
    let h: Vec<f64> = h_pre.iter().map(|&v| v.max(0.0)).collect();
    let mut y_pre = model.b2.clone();
    for (u, yp) in y_pre.iter_mut().enumerate() {
        for (x, w) in h.iter().zip(&model.w2[u * BOTTLENECK_UNITS..(u + 1) * BOTTLENECK_UNITS]) {
            *yp += w * x;
        }
    }
    let y: Vec<f64> = y_pre.iter().map(|&v| v.max(0.0)).collect();
    ForwardCache { h_pre, h, y_pre, y }
}

/// Reconstruct a 64-pixel patch through the bottleneck.
pub fn forward(model: &DenseAutoencoder, patch: &[f64]) -> Result<Vec<f64>> {
    if patch.len() != INPUT_DIM {
        return Err(Error::Dimension(format!(
            "expected {INPUT_DIM} inputs, got {}",
            patch.len()
        )));
    }
    Ok(forward_cached(model, patch).y)
}

/// Cosine similarity; either vector zero scores 0 (maximal anomaly).
pub fn cosine_similarity(x: &[f64], x_rec: &[f64]) -> f64 {
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = x_rec.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return 0.0;
    }
    let dot: f64 = x.iter().zip(x_rec).map(|(a, b)| a * b).sum();
    dot / (nx * ny)
}

/// 1 − mean over covered pixels of the cosine-similarity map.
pub fn image_cost(
    img: &ImageTensor,
    model: &DenseAutoencoder,
    patch_size: usize,
    stride: usize,
) -> Result<f64> {
    if patch_size * patch_size != INPUT_DIM {
        return Err(Error::Config(format!(
            "baseline takes {INPUT_DIM}-pixel patches, got P={patch_size}"
        )));
    }
    let grid = patchflow::extract_patches(img, patch_size, stride)?;
    let scores: Vec<f64> = grid
        .patches
        .iter()
        .map(|p| cosine_similarity(p, &forward_cached(model, p).y))
        .collect();
    let map = patchflow::assemble_map(&scores, &grid, img.height())?;
    Ok(1.0 - map.mean_covered()?)
}

/// Analytic gradient of [`image_cost`] by backpropagation through the dense
/// layers and the cosine score. Flat layout matches `DenseAutoencoder::to_flat`.
pub fn cost_and_gradient(
    img: &ImageTensor,
    model: &DenseAutoencoder,
    patch_size: usize,
    stride: usize,
) -> Result<(f64, Vec<f64>)> {
    if patch_size * patch_size != INPUT_DIM {
        return Err(Error::Config(format!(
            "baseline takes {INPUT_DIM}-pixel patches, got P={patch_size}"
        )));
    }
    let grid = patchflow::extract_patches(img, patch_size, stride)?;
    let weights = patchflow::patch_weights(&grid, img.height());

    let mut cost = 1.0;
    let mut gw1 = vec![0.0; model.w1.len()];
    let mut gb1 = vec![0.0; model.b1.len()];
    let mut gw2 = vec![0.0; model.w2.len()];
    let mut gb2 = vec![0.0; model.b2.len()];

    for (patch, &pw) in grid.patches.iter().zip(&weights) {
        let cache = forward_cached(model, patch);
        let nx = patch.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny = cache.y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let s = cosine_similarity(patch, &cache.y);
        cost -= pw * s;
        if nx == 0.0 || ny == 0.0 {
            continue; // dead reconstruction: score pinned at 0
        }

        // dC/ds = −pw; ds/dy_i = x_i/(|x||y|) − s·y_i/|y|²
        let mut dy: Vec<f64> = patch
            .iter()
            .zip(&cache.y)
            .map(|(&x, &y)| -pw * (x / (nx * ny) - s * y / (ny * ny)))
            .collect();
        // through output ReLU
        for (d, &pre) in dy.iter_mut().zip(&cache.y_pre) {
            if pre <= 0.0 {
                *d = 0.0;
            }
        }
        // layer 2
        let mut dh = vec![0.0; BOTTLENECK_UNITS];
        for (u, &d) in dy.iter().enumerate() {
            gb2[u] += d;
            for (k, &hv) in cache.h.iter().enumerate() {
                gw2[u * BOTTLENECK_UNITS + k] += d * hv;
                dh[k] += d * model.w2[u * BOTTLENECK_UNITS + k];
            }
        }
        // through hidden ReLU and layer 1
        for (u, (&d, &pre)) in dh.iter().zip(&cache.h_pre).enumerate() {
            if pre <= 0.0 {
                continue;
            }
            gb1[u] += d;
            for (k, &x) in patch.iter().enumerate() {
                gw1[u * INPUT_DIM + k] += d * x;
            }
        }
    }

    let mut grad = Vec::with_capacity(model.param_count());
    grad.extend(gw1);
    grad.extend(gb1);
    grad.extend(gw2);
    grad.extend(gb2);
    Ok((cost, grad))
}

/// Training outcome for the baseline, mirroring the quantum `TrainState`.
#[derive(Clone, Debug)]
pub struct BaselineTrainState {
    pub model: DenseAutoencoder,
    pub epoch: usize,
    pub seed: u64,
    pub adam: Adam,
    pub history: Vec<EpochLoss>,
    pub best_model: DenseAutoencoder,
    pub best_epoch: usize,
    pub best_val: f64,
}

/// Same loop shape as the quantum trainer: seeded init, shuffled
/// minibatches, Adam, best-validation checkpoint.
pub fn train_baseline(
    train_images: &[ImageTensor],
    val_images: &[ImageTensor],
    tcfg: &TrainConfig,
    stride: usize,
) -> Result<BaselineTrainState> {
    if train_images.is_empty() {
        return Err(Error::Argument("empty training set".into()));
    }
    let patch_size = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let mut model = DenseAutoencoder::init(&mut rng);
    let mut flat = model.to_flat();
    let mut adam = Adam::new(flat.len(), tcfg);

    let mut history = Vec::with_capacity(tcfg.epochs);
    let mut best_model = model.clone();
    let mut best_epoch = 0usize;
    let mut best_val = f64::INFINITY;

    let mut order: Vec<usize> = (0..train_images.len()).collect();
    for epoch in 1..=tcfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_cost = 0.0;
        for batch in order.chunks(tcfg.batch_size.max(1)) {
            let mut batch_grad = vec![0.0; flat.len()];
            for &idx in batch {
                let (cost, grad) =
                    cost_and_gradient(&train_images[idx], &model, patch_size, stride)?;
                epoch_cost += cost;
                for (bg, g) in batch_grad.iter_mut().zip(&grad) {
                    *bg += g / batch.len() as f64;
                }
            }
            adam.apply(&mut flat, &batch_grad);
            model = DenseAutoencoder::from_flat(&flat)?;
        }
        let train_loss = epoch_cost / train_images.len() as f64;

        let val_loss = if val_images.is_empty() {
            f64::NAN
        } else {
            let mut sum = 0.0;
            for img in val_images {
                sum += image_cost(img, &model, patch_size, stride)?;
            }
            sum / val_images.len() as f64
        };
        history.push(EpochLoss { epoch, train: train_loss, val: val_loss });

        let selector = if val_loss.is_nan() { train_loss } else { val_loss };
        if selector < best_val {
            best_val = selector;
            best_model = model.clone();
            best_epoch = epoch;
        }
    }

    Ok(BaselineTrainState {
        model,
        epoch: tcfg.epochs,
        seed: tcfg.seed,
        adam,
        history,
        best_model,
        best_epoch,
        best_val,
    })
}

/// Anomaly map from the baseline: cosine scores, overlap averaging, Y = 1 − Z.
pub fn infer_map(
    img: &ImageTensor,
    model: &DenseAutoencoder,
    patch_size: usize,
    stride: usize,
) -> Result<ScoreMap> {
    if patch_size * patch_size != INPUT_DIM {
        return Err(Error::Config(format!(
            "baseline takes {INPUT_DIM}-pixel patches, got P={patch_size}"
        )));
    }
    let grid = patchflow::extract_patches(img, patch_size, stride)?;
    let scores: Vec<f64> = grid
        .patches
        .iter()
        .map(|p| cosine_similarity(p, &forward_cached(model, p).y))
        .collect();
    let map_z = patchflow::assemble_map(&scores, &grid, img.height())?;
    Ok(patchflow::to_anomaly(&map_z))
}
