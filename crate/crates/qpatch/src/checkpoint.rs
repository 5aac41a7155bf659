//! Versioned textual checkpoint format, shared by both model kinds.
//!
//! Flat `key=value` lines; float vectors are comma-separated and printed
//! with Rust's shortest round-trippable formatting, so a load/save cycle is
//! bit-exact.

use std::path::Path;

use crate::ansatz::MpsParams;
use crate::baseline::DenseAutoencoder;
use crate::error::{Error, Result};
use crate::train::Adam;

pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to resume or evaluate one trained run.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub patch_size: usize,
    pub stride: usize,
    pub bottleneck_dim: usize,
    pub seed: u64,
    pub epoch: usize,
    pub model: ModelParams,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub adam_step: u64,
}

#[derive(Clone, Debug)]
pub enum ModelParams {
    Quantum(MpsParams),
    Classical(DenseAutoencoder),
}

impl ModelParams {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelParams::Quantum(_) => "quantum",
            ModelParams::Classical(_) => "classical",
        }
    }

    pub fn n_trainable(&self) -> usize {
        match self {
            ModelParams::Quantum(p) => p.angles().len(),
            ModelParams::Classical(m) => m.param_count(),
        }
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn parse_vec(s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| t.parse().map_err(|_| Error::Data(format!("bad float {t:?} in checkpoint"))))
        .collect()
}

impl Checkpoint {
    pub fn from_adam(&mut self, adam: &Adam) {
        self.adam_m = adam.m.clone();
        self.adam_v = adam.v.clone();
        self.adam_step = adam.step;
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("format_version={FORMAT_VERSION}\n"));
        out.push_str(&format!("model={}\n", self.model.kind()));
        out.push_str(&format!("patch_size={}\n", self.patch_size));
        out.push_str(&format!("stride={}\n", self.stride));
        out.push_str(&format!("bottleneck_dim={}\n", self.bottleneck_dim));
        out.push_str(&format!("seed={}\n", self.seed));
        out.push_str(&format!("epoch={}\n", self.epoch));
        out.push_str(&format!("n_trainable={}\n", self.model.n_trainable()));
        match &self.model {
            ModelParams::Quantum(p) => {
                out.push_str(&format!("theta={}\n", fmt_vec(p.angles())));
            }
            ModelParams::Classical(m) => {
                out.push_str(&format!("weights={}\n", fmt_vec(&m.to_flat())));
            }
        }
        out.push_str(&format!("adam_m={}\n", fmt_vec(&self.adam_m)));
        out.push_str(&format!("adam_v={}\n", fmt_vec(&self.adam_v)));
        out.push_str(&format!("adam_step={}\n", self.adam_step));
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut fields = std::collections::BTreeMap::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Data(format!("bad checkpoint line {line:?}")))?;
            fields.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| -> Result<&String> {
            fields.get(k).ok_or_else(|| Error::Data(format!("checkpoint missing key {k:?}")))
        };
        let parse_num = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|_| Error::Data(format!("bad value for {k:?}")))
        };
        let version: u32 =
            get("format_version")?.parse().map_err(|_| Error::Data("bad format_version".into()))?;
        if version != FORMAT_VERSION {
            return Err(Error::Data(format!("unsupported checkpoint version {version}")));
        }
        let patch_size = parse_num("patch_size")?;
        let bottleneck_dim = parse_num("bottleneck_dim")?;
        let model = match get("model")?.as_str() {
            "quantum" => {
                let angles = parse_vec(get("theta")?)?;
                let n = (patch_size * patch_size).trailing_zeros() as usize;
                ModelParams::Quantum(MpsParams::new(n, angles)?)
            }
            "classical" => {
                ModelParams::Classical(DenseAutoencoder::from_flat(&parse_vec(get("weights")?)?)?)
            }
            other => return Err(Error::Data(format!("unknown model kind {other:?}"))),
        };
        Ok(Self {
            patch_size,
            stride: parse_num("stride")?,
            bottleneck_dim,
            seed: get("seed")?.parse().map_err(|_| Error::Data("bad seed".into()))?,
            epoch: parse_num("epoch")?,
            model,
            adam_m: parse_vec(get("adam_m")?)?,
            adam_v: parse_vec(get("adam_v")?)?,
            adam_step: get("adam_step")?
                .parse()
                .map_err(|_| Error::Data("bad adam_step".into()))?,
        })
    }
}
