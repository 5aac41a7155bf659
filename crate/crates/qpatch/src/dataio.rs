//! Dataset handling: MVTec-style directory loading, box downscaling to
//! 32×32, and a seeded synthetic texture-with-defect generator for
//! desk-scale runs.
//!
//! Expected directory layout (binary PGM files throughout):
//!
//! ```text
//! <root>/<category>/train/good/*.pgm
//! <root>/<category>/test/<defect-type>/*.pgm
//! <root>/<category>/ground_truth/<defect-type>/<stem>_mask.pgm
//! ```
//!
//! `test/good` images carry an implicit all-zero mask. Training and
//! validation images are drawn from `train/good` by seeded subsampling
//! (at most 100 train + 25 val).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::MaskImage;
use crate::patchflow::ImageTensor;
use crate::pgm;

pub const TARGET_SIZE: usize = 32;
pub const MAX_TRAIN: usize = 100;
pub const MAX_VAL: usize = 25;

/// Semi-supervised split: normal-only train/val, masked test set.
#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub train: Vec<ImageTensor>,
    pub val: Vec<ImageTensor>,
    pub test: Vec<(ImageTensor, MaskImage)>,
}

/// How masks are re-binarized after resizing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MaskResizeRule {
    /// Area coverage ≥ 0.5 → anomalous.
    #[default]
    Threshold,
    /// Any overlap with an anomalous source pixel → anomalous.
    AnyOverlap,
}

/// General area-weighted box average of a square image to `target`×`target`.
fn area_resize(src: &[f64], size: usize, target: usize) -> Vec<f64> {
    if size == target {
        return src.to_vec();
    }
    let scale = size as f64 / target as f64;
    let mut out = vec![0.0; target * target];
    for tr in 0..target {
        let r0 = tr as f64 * scale;
        let r1 = (tr + 1) as f64 * scale;
        for tc in 0..target {
            let c0 = tc as f64 * scale;
            let c1 = (tc + 1) as f64 * scale;
            let mut acc = 0.0;
            let mut total = 0.0;
            let mut r = r0.floor() as usize;
            while (r as f64) < r1 && r < size {
                let rw = (r1.min((r + 1) as f64) - r0.max(r as f64)).max(0.0);
                let mut c = c0.floor() as usize;
                while (c as f64) < c1 && c < size {
                    let cw = (c1.min((c + 1) as f64) - c0.max(c as f64)).max(0.0);
                    acc += src[r * size + c] * rw * cw;
                    total += rw * cw;
                    c += 1;
                }
                r += 1;
            }
            out[tr * target + tc] = acc / total;
        }
    }
    out
}

/// Box-filter area averaging of a square image down (or up) to 32×32.
pub fn resize_to_32(img: &ImageTensor) -> Result<ImageTensor> {
    let resized = area_resize(img.pixels(), img.height(), TARGET_SIZE);
    ImageTensor::new(TARGET_SIZE, TARGET_SIZE, resized)
}

/// Resize a mask with the same geometry, then re-binarize.
pub fn resize_mask_to_32(mask: &MaskImage, rule: MaskResizeRule) -> Result<MaskImage> {
    if mask.height() != mask.width() {
        return Err(Error::Argument(format!(
            "masks must be square, got {}x{}",
            mask.height(),
            mask.width()
        )));
    }
    let as_real: Vec<f64> = mask.data().iter().map(|&v| f64::from(v)).collect();
    let resized = area_resize(&as_real, mask.height(), TARGET_SIZE);
    let cutoff = match rule {
        MaskResizeRule::Threshold => 0.5,
        MaskResizeRule::AnyOverlap => 1e-12,
    };
    MaskImage::new(
        TARGET_SIZE,
        TARGET_SIZE,
        resized.iter().map(|&v| u8::from(v >= cutoff)).collect(),
    )
}

fn load_image(path: &Path) -> Result<ImageTensor> {
    let p = pgm::read_pgm(path)?;
    if p.width != p.height {
        return Err(Error::Data(format!(
            "{}: images must be square, got {}x{}",
            path.display(),
            p.width,
            p.height
        )));
    }
    let maxval = f64::from(p.maxval);
    let pixels = p.samples.iter().map(|&s| f64::from(s) / maxval).collect();
    resize_to_32(&ImageTensor::new(p.height, p.width, pixels)?)
}

fn load_mask(path: &Path, rule: MaskResizeRule) -> Result<MaskImage> {
    let p = pgm::read_pgm(path)?;
    let cutoff = p.maxval / 2;
    let data = p.samples.iter().map(|&s| u8::from(s > cutoff)).collect();
    resize_mask_to_32(&MaskImage::new(p.height, p.width, data)?, rule)
}

fn sorted_pgms(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().map(|e| e == "pgm").unwrap_or(false) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Load a dataset laid out in the MVTec directory convention. `seed` drives
/// the train/val subsampling.
pub fn load_mvtec_layout(root: &Path, category: &str, seed: u64) -> Result<DatasetSplit> {
    load_mvtec_layout_with(root, category, seed, MaskResizeRule::default())
}

pub fn load_mvtec_layout_with(
    root: &Path,
    category: &str,
    seed: u64,
    rule: MaskResizeRule,
) -> Result<DatasetSplit> {
    let base = root.join(category);
    let train_dir = base.join("train").join("good");
    let test_dir = base.join("test");
    if !train_dir.is_dir() || !test_dir.is_dir() {
        return Err(Error::Layout(format!(
            "{}: expected train/good and test subdirectories",
            base.display()
        )));
    }

    let mut normal_paths = sorted_pgms(&train_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    normal_paths.shuffle(&mut rng);
    let train_paths: Vec<_> = normal_paths.iter().take(MAX_TRAIN).collect();
    let val_paths: Vec<_> = normal_paths.iter().skip(MAX_TRAIN).take(MAX_VAL).collect();

    let mut train = Vec::with_capacity(train_paths.len());
    for path in train_paths {
        train.push(load_image(path)?);
    }
    let mut val = Vec::with_capacity(val_paths.len());
    for path in val_paths {
        val.push(load_image(path)?);
    }

    let mut test = Vec::new();
    let mut kinds: Vec<PathBuf> = std::fs::read_dir(&test_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    kinds.sort();
    for kind_dir in kinds {
        let kind = kind_dir.file_name().unwrap().to_string_lossy().into_owned();
        for path in sorted_pgms(&kind_dir)? {
            let img = load_image(&path)?;
            let mask = if kind == "good" {
                MaskImage::zeros(TARGET_SIZE, TARGET_SIZE)
            } else {
                let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
                let gt_dir = base.join("ground_truth").join(&kind);
                let candidates =
                    [gt_dir.join(format!("{stem}_mask.pgm")), gt_dir.join(format!("{stem}.pgm"))];
                let mask_path = candidates
                    .iter()
                    .find(|p| p.is_file())
                    .ok_or_else(|| {
                        Error::Data(format!("no mask found for {}", path.display()))
                    })?;
                load_mask(mask_path, rule)?
            };
            test.push((img, mask));
        }
    }

    Ok(DatasetSplit { train, val, test })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Texture {
    Stripes,
    Blobs,
    UniformNoise,
}

impl fmt::Display for Texture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Texture::Stripes => "stripes",
            Texture::Blobs => "blobs",
            Texture::UniformNoise => "uniform-noise",
        })
    }
}

impl FromStr for Texture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stripes" => Ok(Texture::Stripes),
            "blobs" => Ok(Texture::Blobs),
            "uniform-noise" => Ok(Texture::UniformNoise),
            other => Err(Error::Config(format!("unknown texture {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DefectShape {
    Square,
    Ellipse,
    Scratch,
}

impl fmt::Display for DefectShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DefectShape::Square => "square",
            DefectShape::Ellipse => "ellipse",
            DefectShape::Scratch => "scratch",
        })
    }
}

impl FromStr for DefectShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(DefectShape::Square),
            "ellipse" => Ok(DefectShape::Ellipse),
            "scratch" => Ok(DefectShape::Scratch),
            other => Err(Error::Config(format!("unknown defect shape {other:?}"))),
        }
    }
}

/// Deterministic synthetic dataset description: (spec, seed) fully determine
/// the generated bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub texture: Texture,
    pub defect: DefectShape,
    pub defect_intensity_delta: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_train: 100,
            n_val: 25,
            n_test: 50,
            texture: Texture::Blobs,
            defect: DefectShape::Square,
            defect_intensity_delta: 0.35,
            seed: 0,
        }
    }
}

pub const DEFECT_SQUARE_SIDE: usize = 8;

fn texture_image(texture: Texture, rng: &mut ChaCha8Rng) -> ImageTensor {
    let n = TARGET_SIZE;
    let mut pixels = vec![0.0; n * n];
    match texture {
        Texture::Stripes => {
            let phase = rng.gen_range(0..4usize);
            for r in 0..n {
                for c in 0..n {
                    let band = ((r + phase) / 4) % 2;
                    pixels[r * n + c] = 0.22 + 0.25 * band as f64 + rng.gen_range(-0.03..0.03);
                }
            }
        }
        Texture::Blobs => {
            let bumps: Vec<(f64, f64, f64, f64)> = (0..5)
                .map(|_| {
                    (
                        rng.gen_range(0.0..n as f64),
                        rng.gen_range(0.0..n as f64),
                        rng.gen_range(3.0..6.0),
                        rng.gen_range(0.1..0.25),
                    )
                })
                .collect();
            for r in 0..n {
                for c in 0..n {
                    let mut v = 0.25;
                    for &(cr, cc, sigma, amp) in &bumps {
                        let d2 = (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2);
                        v += amp * (-d2 / (2.0 * sigma * sigma)).exp();
                    }
                    pixels[r * n + c] = v.clamp(0.05, 0.65);
                }
            }
        }
        Texture::UniformNoise => {
            for p in &mut pixels {
                *p = rng.gen_range(0.25..0.55);
            }
        }
    }
    ImageTensor::new(n, n, pixels).unwrap()
}

fn defect_pixels(shape: DefectShape, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let n = TARGET_SIZE;
    match shape {
        DefectShape::Square => {
            let side = DEFECT_SQUARE_SIDE;
            let r0 = rng.gen_range(0..=n - side);
            let c0 = rng.gen_range(0..=n - side);
            let mut out = Vec::with_capacity(side * side);
            for r in r0..r0 + side {
                for c in c0..c0 + side {
                    out.push((r, c));
                }
            }
            out
        }
        DefectShape::Ellipse => {
            let (a, b) = (6.0f64, 4.0f64);
            let cr = rng.gen_range(6..n - 6) as f64;
            let cc = rng.gen_range(6..n - 6) as f64;
            let mut out = Vec::new();
            for r in 0..n {
                for c in 0..n {
                    let dr = (r as f64 - cr) / a;
                    let dc = (c as f64 - cc) / b;
                    if dr * dr + dc * dc <= 1.0 {
                        out.push((r, c));
                    }
                }
            }
            out
        }
        DefectShape::Scratch => {
            let len = 14usize;
            let horizontal = rng.gen_bool(0.5);
            let r0 = rng.gen_range(0..n - 2);
            let c0 = rng.gen_range(0..n - len);
            let mut out = Vec::new();
            for i in 0..len {
                for w in 0..2 {
                    let (r, c) = if horizontal { (r0 + w, c0 + i) } else { (c0 + i, r0 + w) };
                    out.push((r, c));
                }
            }
            out
        }
    }
}

/// Generate the synthetic split. Even-indexed test images carry one injected
/// defect (mask = defect region); odd-indexed test images are clean with an
/// all-zero mask.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<DatasetSplit> {
    if spec.n_train == 0 || spec.n_test == 0 {
        return Err(Error::Argument("synthetic split needs train and test images".into()));
    }
    let n = TARGET_SIZE;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let train: Vec<ImageTensor> =
        (0..spec.n_train).map(|_| texture_image(spec.texture, &mut rng)).collect();
    let val: Vec<ImageTensor> =
        (0..spec.n_val).map(|_| texture_image(spec.texture, &mut rng)).collect();

    let mut test = Vec::with_capacity(spec.n_test);
    for idx in 0..spec.n_test {
        let img = texture_image(spec.texture, &mut rng);
        if idx % 2 == 0 {
            let region = defect_pixels(spec.defect, &mut rng);
            let mut pixels = img.pixels().to_vec();
            let mut mask_data = vec![0u8; n * n];
            for &(r, c) in &region {
                pixels[r * n + c] = (pixels[r * n + c] + spec.defect_intensity_delta).clamp(0.0, 1.0);
                mask_data[r * n + c] = 1;
            }
            test.push((
                ImageTensor::new(n, n, pixels)?,
                MaskImage::new(n, n, mask_data)?,
            ));
        } else {
            test.push((img, MaskImage::zeros(n, n)));
        }
    }

    Ok(DatasetSplit { train, val, test })
}

/// Write a synthetic split to disk in the MVTec directory layout, plus a
/// manifest listing split membership.
pub fn write_synthetic_tree(split: &DatasetSplit, spec: &SynthSpec, out: &Path) -> Result<()> {
    let category = out.join("synthetic");
    let train_dir = category.join("train").join("good");
    let test_good = category.join("test").join("good");
    let test_defect = category.join("test").join("defect");
    let gt_defect = category.join("ground_truth").join("defect");
    for dir in [&train_dir, &test_good, &test_defect, &gt_defect] {
        std::fs::create_dir_all(dir)?;
    }

    let quantize = |img: &ImageTensor| -> Vec<u8> {
        img.pixels().iter().map(|&v| (v * 255.0).round() as u8).collect()
    };

    let mut manifest = String::new();
    manifest.push_str(&format!(
        "texture={}\ndefect={}\ndefect_intensity_delta={}\nseed={}\n",
        spec.texture, spec.defect, spec.defect_intensity_delta, spec.seed
    ));
    // train and val both live under train/good; the loader re-splits by seed
    for (i, img) in split.train.iter().chain(&split.val).enumerate() {
        let name = format!("{i:03}.pgm");
        pgm::write_pgm8(&train_dir.join(&name), TARGET_SIZE, TARGET_SIZE, &quantize(img))?;
        manifest.push_str(&format!("train_pool=train/good/{name}\n"));
    }
    for (i, (img, mask)) in split.test.iter().enumerate() {
        let name = format!("{i:03}.pgm");
        if mask.count_ones() == 0 {
            pgm::write_pgm8(&test_good.join(&name), TARGET_SIZE, TARGET_SIZE, &quantize(img))?;
            manifest.push_str(&format!("test=test/good/{name}\n"));
        } else {
            pgm::write_pgm8(&test_defect.join(&name), TARGET_SIZE, TARGET_SIZE, &quantize(img))?;
            let mask_bytes: Vec<u8> = mask.data().iter().map(|&v| v * 255).collect();
            pgm::write_pgm8(
                &gt_defect.join(format!("{i:03}_mask.pgm")),
                TARGET_SIZE,
                TARGET_SIZE,
                &mask_bytes,
            )?;
            manifest.push_str(&format!("test=test/defect/{name}\n"));
        }
    }
    std::fs::write(category.join("manifest.txt"), manifest)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn resize_identity_constant_and_checkerboard() {
        let img = ImageTensor::new(32, 32, vec![0.3; 1024]).unwrap();
        assert_eq!(resize_to_32(&img).unwrap(), img);

        let img = ImageTensor::new(64, 64, vec![0.7; 4096]).unwrap();
        let out = resize_to_32(&img).unwrap();
        for &v in out.pixels() {
            assert_abs_diff_eq!(v, 0.7, epsilon = 1e-12);
        }

        // period-2 checkerboard at 64x64 box-averages to uniform 0.5
        let pixels: Vec<f64> = (0..64 * 64)
            .map(|i| ((i / 64 + i % 64) % 2) as f64)
            .collect();
        let img = ImageTensor::new(64, 64, pixels).unwrap();
        let out = resize_to_32(&img).unwrap();
        for &v in out.pixels() {
            assert_abs_diff_eq!(v, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn resize_preserves_mean_for_exact_ratio() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pixels: Vec<f64> = (0..128 * 128).map(|_| rng.gen()).collect();
        let mean_in: f64 = pixels.iter().sum::<f64>() / pixels.len() as f64;
        let img = ImageTensor::new(128, 128, pixels).unwrap();
        let out = resize_to_32(&img).unwrap();
        let mean_out: f64 = out.pixels().iter().sum::<f64>() / 1024.0;
        assert_abs_diff_eq!(mean_in, mean_out, epsilon = 1e-12);
    }

    #[test]
    fn mask_resize_rules() {
        // one hot pixel in a 64x64 mask: 0.25 coverage after 2x2 box
        let mut data = vec![0u8; 64 * 64];
        data[0] = 1;
        let mask = MaskImage::new(64, 64, data).unwrap();
        let t = resize_mask_to_32(&mask, MaskResizeRule::Threshold).unwrap();
        assert_eq!(t.count_ones(), 0);
        let a = resize_mask_to_32(&mask, MaskResizeRule::AnyOverlap).unwrap();
        assert_eq!(a.count_ones(), 1);
    }

    #[test]
    fn synthetic_is_deterministic_and_mask_sizes() {
        let spec = SynthSpec { n_train: 3, n_val: 2, n_test: 4, ..Default::default() };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        for (x, y) in a.train.iter().zip(&b.train) {
            assert_eq!(x.pixels(), y.pixels());
        }
        for ((xi, xm), (yi, ym)) in a.test.iter().zip(&b.test) {
            assert_eq!(xi.pixels(), yi.pixels());
            assert_eq!(xm.data(), ym.data());
        }

        // square defect marks exactly 64 pixels; odd test indices are clean
        assert_eq!(a.test[0].1.count_ones(), 64);
        assert_eq!(a.test[1].1.count_ones(), 0);

        // masks mark exactly the modified pixels
        let spec2 = SynthSpec { seed: spec.seed, ..spec.clone() };
        let clean = generate_synthetic(&SynthSpec { defect_intensity_delta: 0.0, ..spec2 }).unwrap();
        let dirty = generate_synthetic(&spec).unwrap();
        for ((ci, _), (di, dm)) in clean.test.iter().zip(&dirty.test) {
            for ((&cv, &dv), &m) in ci.pixels().iter().zip(di.pixels()).zip(dm.data()) {
                assert_eq!(cv != dv, m == 1);
            }
        }
    }

    #[test]
    fn synthetic_tree_roundtrips_through_loader() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec { n_train: 6, n_val: 2, n_test: 4, ..Default::default() };
        let split = generate_synthetic(&spec).unwrap();
        write_synthetic_tree(&split, &spec, dir.path()).unwrap();
        let loaded = load_mvtec_layout(dir.path(), "synthetic", 7).unwrap();
        assert_eq!(loaded.train.len() + loaded.val.len(), 8);
        assert_eq!(loaded.test.len(), 4);
        // anomalous test images carry nonzero masks, clean ones zero masks
        let n_anomalous = loaded.test.iter().filter(|(_, m)| m.count_ones() > 0).count();
        assert_eq!(n_anomalous, 2);
    }

    #[test]
    fn loader_rejects_missing_layout() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_mvtec_layout(dir.path(), "nope", 0),
            Err(Error::Layout(_))
        ));
    }
}
