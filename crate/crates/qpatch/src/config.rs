//! Run configuration: flat `key=value` files, grid validation, and the
//! manifest written alongside every run.
//!
//! The same text format serves as input config and output manifest, so a
//! manifest re-parses into the `RunConfig` that produced it. Lines starting
//! with `#` are comments; the manifest uses them for informational fields
//! (tool version, trainable parameter count) that are not config keys.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::ansatz::MpsParams;
use crate::baseline;
use crate::dataio::{DefectShape, SynthSpec, Texture};
use crate::error::{Error, Result};
use crate::train::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Quantum,
    Classical,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Quantum => "quantum",
            ModelKind::Classical => "classical",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(ModelKind::Quantum),
            "classical" => Ok(ModelKind::Classical),
            other => Err(Error::Config(format!(
                "unknown model {other:?} (expected quantum or classical)"
            ))),
        }
    }
}

/// Where the images come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Synthetic(SynthSpec),
    MvtecLayout { root: PathBuf, category: String },
}

/// One experiment: model, patch geometry, optimizer settings, data source,
/// seed list, and output directory.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub patch_size: usize,
    pub stride: usize,
    pub bottleneck_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seeds: Vec<u64>,
    pub data: DataSource,
    pub out: PathBuf,
    pub shots: Option<u32>,
    pub reset_trash_before_decode: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            model: ModelKind::Quantum,
            patch_size: 4,
            stride: 1,
            bottleneck_dim: 2,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            seeds: vec![0],
            data: DataSource::Synthetic(SynthSpec::default()),
            out: PathBuf::from("out"),
            shots: None,
            reset_trash_before_decode: false,
        }
    }
}

impl RunConfig {
    /// Enforce the supported (P, S, BD) grid; every rejection names the
    /// violated constraint.
    pub fn validate(&self) -> Result<()> {
        if ![2, 4, 8].contains(&self.patch_size) {
            return Err(Error::Config(format!(
                "patch_size must be one of 2, 4, 8 (got {})",
                self.patch_size
            )));
        }
        if ![1, 2, 4, 8].contains(&self.stride) || self.stride > self.patch_size {
            return Err(Error::Config(format!(
                "stride must come from {{1, 2, 4, 8}} and not exceed patch_size (got S={}, P={})",
                self.stride, self.patch_size
            )));
        }
        if ![1, 2].contains(&self.bottleneck_dim) {
            return Err(Error::Config(format!(
                "bottleneck_dim must be 1 or 2 (got {})",
                self.bottleneck_dim
            )));
        }
        if self.patch_size == 2 && self.bottleneck_dim != 1 {
            return Err(Error::Config(
                "bottleneck_dim is fixed to 1 for patch_size 2".into(),
            ));
        }
        if self.model == ModelKind::Classical && self.patch_size != 8 {
            return Err(Error::Config(format!(
                "the classical baseline takes 64-pixel patches, so patch_size must be 8 (got {})",
                self.patch_size
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.shots == Some(0) {
            return Err(Error::Config("shots must be at least 1 when set".into()));
        }
        Ok(())
    }

    /// Trainable parameter count of the configured model.
    pub fn n_trainable(&self) -> Result<usize> {
        match self.model {
            ModelKind::Quantum => {
                let n = (self.patch_size * self.patch_size).trailing_zeros() as usize;
                MpsParams::n_params(n)
            }
            ModelKind::Classical => Ok(baseline::DenseAutoencoder::zeros().param_count()),
        }
    }

    /// Optimizer settings for one seed.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed,
            ..TrainConfig::default()
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("model={}\n", self.model));
        out.push_str(&format!("patch_size={}\n", self.patch_size));
        out.push_str(&format!("stride={}\n", self.stride));
        out.push_str(&format!("bottleneck_dim={}\n", self.bottleneck_dim));
        out.push_str(&format!("epochs={}\n", self.epochs));
        out.push_str(&format!("learning_rate={}\n", self.learning_rate));
        out.push_str(&format!("batch_size={}\n", self.batch_size));
        out.push_str(&format!(
            "seeds={}\n",
            self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
        ));
        match &self.data {
            DataSource::Synthetic(s) => {
                out.push_str("data=synthetic\n");
                out.push_str(&format!("synth_train={}\n", s.n_train));
                out.push_str(&format!("synth_val={}\n", s.n_val));
                out.push_str(&format!("synth_test={}\n", s.n_test));
                out.push_str(&format!("texture={}\n", s.texture));
                out.push_str(&format!("defect={}\n", s.defect));
                out.push_str(&format!("defect_delta={}\n", s.defect_intensity_delta));
                out.push_str(&format!("data_seed={}\n", s.seed));
            }
            DataSource::MvtecLayout { root, category } => {
                out.push_str("data=mvtec-layout\n");
                out.push_str(&format!("data_root={}\n", root.display()));
                out.push_str(&format!("category={category}\n"));
            }
        }
        out.push_str(&format!("out={}\n", self.out.display()));
        if let Some(shots) = self.shots {
            out.push_str(&format!("shots={shots}\n"));
        }
        out.push_str(&format!(
            "reset_trash_before_decode={}\n",
            self.reset_trash_before_decode
        ));
        out
    }

    /// Manifest: the config itself plus informational comment lines.
    pub fn to_manifest(&self) -> String {
        let trainable = self
            .n_trainable()
            .map(|n| n.to_string())
            .unwrap_or_else(|_| "invalid".into());
        format!(
            "# tool_version={}\n# n_train={trainable}\n{}",
            env!("CARGO_PKG_VERSION"),
            self.to_text()
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("bad config line {line:?}")))?;
            if fields.insert(k.trim(), v.trim()).is_some() {
                return Err(Error::Config(format!("duplicate config key {k:?}")));
            }
        }

        let mut cfg = RunConfig::default();
        let mut synth = SynthSpec::default();
        let mut data_kind = "synthetic".to_string();
        let mut data_root: Option<PathBuf> = None;
        let mut category: Option<String> = None;

        fn parsed<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("bad value {v:?} for key {key:?}")))
        }

        for (k, v) in fields {
            match k {
                "model" => cfg.model = v.parse()?,
                "patch_size" => cfg.patch_size = parsed(k, v)?,
                "stride" => cfg.stride = parsed(k, v)?,
                "bottleneck_dim" => cfg.bottleneck_dim = parsed(k, v)?,
                "epochs" => cfg.epochs = parsed(k, v)?,
                "learning_rate" => cfg.learning_rate = parsed(k, v)?,
                "batch_size" => cfg.batch_size = parsed(k, v)?,
                "seeds" => {
                    cfg.seeds = v
                        .split(',')
                        .map(|t| parsed::<u64>(k, t.trim()))
                        .collect::<Result<_>>()?
                }
                "data" => data_kind = v.to_string(),
                "synth_train" => synth.n_train = parsed(k, v)?,
                "synth_val" => synth.n_val = parsed(k, v)?,
                "synth_test" => synth.n_test = parsed(k, v)?,
                "texture" => synth.texture = v.parse::<Texture>()?,
                "defect" => synth.defect = v.parse::<DefectShape>()?,
                "defect_delta" => synth.defect_intensity_delta = parsed(k, v)?,
                "data_seed" => synth.seed = parsed(k, v)?,
                "data_root" => data_root = Some(PathBuf::from(v)),
                "category" => category = Some(v.to_string()),
                "out" => cfg.out = PathBuf::from(v),
                "shots" => cfg.shots = Some(parsed(k, v)?),
                "reset_trash_before_decode" => cfg.reset_trash_before_decode = parsed(k, v)?,
                other => return Err(Error::Config(format!("unknown config key {other:?}"))),
            }
        }

        cfg.data = match data_kind.as_str() {
            "synthetic" => DataSource::Synthetic(synth),
            "mvtec-layout" => DataSource::MvtecLayout {
                root: data_root
                    .ok_or_else(|| Error::Config("mvtec-layout data needs data_root".into()))?,
                category: category
                    .ok_or_else(|| Error::Config("mvtec-layout data needs category".into()))?,
            },
            other => return Err(Error::Config(format!("unknown data source {other:?}"))),
        };
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_roundtrips() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(RunConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn manifest_reparses_and_records_param_count() {
        let cfg = RunConfig {
            patch_size: 8,
            stride: 4,
            bottleneck_dim: 2,
            seeds: vec![0, 1, 2],
            ..Default::default()
        };
        let manifest = cfg.to_manifest();
        assert!(manifest.contains("# n_train=10"));
        assert_eq!(RunConfig::from_text(&manifest).unwrap(), cfg);
    }

    #[test]
    fn mvtec_source_roundtrips() {
        let cfg = RunConfig {
            data: DataSource::MvtecLayout {
                root: PathBuf::from("/data/sets"),
                category: "carpet".into(),
            },
            ..Default::default()
        };
        assert_eq!(RunConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn grid_validation_names_constraints() {
        let reject = |cfg: RunConfig, needle: &str| {
            let err = cfg.validate().unwrap_err().to_string();
            assert!(err.contains(needle), "{err:?} lacks {needle:?}");
        };
        reject(RunConfig { patch_size: 3, ..Default::default() }, "patch_size");
        reject(RunConfig { patch_size: 4, stride: 3, ..Default::default() }, "stride");
        reject(RunConfig { patch_size: 4, stride: 8, ..Default::default() }, "stride");
        reject(RunConfig { bottleneck_dim: 3, ..Default::default() }, "bottleneck_dim");
        reject(
            RunConfig { patch_size: 2, stride: 1, bottleneck_dim: 2, ..Default::default() },
            "fixed to 1",
        );
        reject(
            RunConfig { model: ModelKind::Classical, patch_size: 4, ..Default::default() },
            "classical",
        );
        reject(RunConfig { seeds: vec![], ..Default::default() }, "seeds");
        reject(RunConfig { shots: Some(0), ..Default::default() }, "shots");
    }

    #[test]
    fn trainable_counts() {
        for (p, expect) in [(2usize, 2usize), (4, 6), (8, 10)] {
            let cfg = RunConfig {
                patch_size: p,
                stride: p,
                bottleneck_dim: 1,
                ..Default::default()
            };
            assert_eq!(cfg.n_trainable().unwrap(), expect);
        }
        let cfg = RunConfig {
            model: ModelKind::Classical,
            patch_size: 8,
            stride: 8,
            ..Default::default()
        };
        assert_eq!(cfg.n_trainable().unwrap(), 580);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert!(RunConfig::from_text("nonsense=1\n").is_err());
        assert!(RunConfig::from_text("model quantum\n").is_err());
        assert!(RunConfig::from_text("model=quantum\nmodel=quantum\n").is_err());
    }
}
