//! Patch extraction, amplitude embedding, and score-map assembly with
//! overlap averaging.

use crate::error::{Error, Result};
use crate::statevec::StateVector;

/// Square grayscale image with intensities in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height != width {
            return Err(Error::Argument(format!(
                "images must be square, got {height}x{width}"
            )));
        }
        if pixels.len() != height * width {
            return Err(Error::Dimension(format!(
                "expected {} pixels, got {}",
                height * width,
                pixels.len()
            )));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }
}

/// Flattened, raster-ordered patches of one image plus their anchors.
#[derive(Clone, Debug)]
pub struct PatchGrid {
    pub patch_size: usize,
    pub stride: usize,
    pub patches: Vec<Vec<f64>>,
    pub anchors: Vec<(usize, usize)>,
}

impl PatchGrid {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

/// Sliding-window patch extraction. Patch count per axis is
/// ⌊(H − P)/S⌋ + 1; patches and their row-major flattening follow raster
/// order.
pub fn extract_patches(img: &ImageTensor, patch_size: usize, stride: usize) -> Result<PatchGrid> {
    let h = img.height();
    if patch_size == 0 || patch_size > h {
        return Err(Error::Argument(format!(
            "patch size {patch_size} invalid for {h}x{h} image"
        )));
    }
    if stride == 0 {
        return Err(Error::Argument("stride must be at least 1".into()));
    }
    if !(patch_size * patch_size).is_power_of_two() {
        return Err(Error::Argument(format!(
            "patch pixel count {} is not a power of two",
            patch_size * patch_size
        )));
    }
    let per_axis = (h - patch_size) / stride + 1;
    let mut patches = Vec::with_capacity(per_axis * per_axis);
    let mut anchors = Vec::with_capacity(per_axis * per_axis);
    for bi in 0..per_axis {
        for bj in 0..per_axis {
            let (r0, c0) = (bi * stride, bj * stride);
            let mut patch = Vec::with_capacity(patch_size * patch_size);
            for r in r0..r0 + patch_size {
                for c in c0..c0 + patch_size {
                    patch.push(img.get(r, c));
                }
            }
            patches.push(patch);
            anchors.push((r0, c0));
        }
    }
    Ok(PatchGrid { patch_size, stride, patches, anchors })
}

/// Amplitude-encode a flattened patch. All-zero patches cannot be normalized
/// and fall back to the uniform superposition.
pub fn embed_patch(patch: &[f64]) -> Result<StateVector> {
    if patch.is_empty() || !patch.len().is_power_of_two() {
        return Err(Error::Dimension(format!(
            "patch length {} is not a power of two",
            patch.len()
        )));
    }
    let n = patch.len().trailing_zeros() as usize;
    match StateVector::from_amplitudes(patch, n) {
        Err(Error::Degenerate(_)) => {
            StateVector::from_amplitudes(&vec![1.0; patch.len()], n)
        }
        other => other,
    }
}

/// Per-pixel similarity (or anomaly) map with overlap bookkeeping. Pixels
/// with count 0 were covered by no patch and are excluded from costs and
/// metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
    counts: Vec<u32>,
}

impl ScoreMap {
    /// Wrap raw per-pixel values as a fully covered map (count 1 everywhere).
    pub fn from_values(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::Dimension(format!(
                "expected {} values, got {}",
                height * width,
                values.len()
            )));
        }
        let counts = vec![1; values.len()];
        Ok(Self { height, width, values, counts })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn is_covered(&self, row: usize, col: usize) -> bool {
        self.counts[row * self.width + col] > 0
    }

    pub fn has_uncovered(&self) -> bool {
        self.counts.iter().any(|&c| c == 0)
    }

    /// Mean of the values over covered pixels.
    pub fn mean_covered(&self) -> Result<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (v, &c) in self.values.iter().zip(&self.counts) {
            if c > 0 {
                sum += v;
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::Degenerate("score map has no covered pixels".into()));
        }
        Ok(sum / n as f64)
    }
}

/// Average per-patch scores into a full map: each covered pixel takes the
/// mean of the scores of all patches covering it. Accumulation runs in
/// raster patch order so results are bit-identical to the per-pixel oracle.
pub fn assemble_map(scores: &[f64], grid: &PatchGrid, height: usize) -> Result<ScoreMap> {
    if scores.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} patches",
            scores.len(),
            grid.len()
        )));
    }
    let width = height;
    let mut values = vec![0.0; height * width];
    let mut counts = vec![0u32; height * width];
    for (score, &(r0, c0)) in scores.iter().zip(&grid.anchors) {
        for r in r0..r0 + grid.patch_size {
            for c in c0..c0 + grid.patch_size {
                values[r * width + c] += score;
                counts[r * width + c] += 1;
            }
        }
    }
    for (v, &c) in values.iter_mut().zip(&counts) {
        if c > 0 {
            *v /= f64::from(c);
        }
    }
    Ok(ScoreMap { height, width, values, counts })
}

/// Anomaly map Y = 1 − Z on covered pixels (Z clamped to [0, 1] first).
/// Uncovered pixels stay 0 with count 0.
pub fn to_anomaly(map_z: &ScoreMap) -> ScoreMap {
    let values = map_z
        .values
        .iter()
        .zip(&map_z.counts)
        .map(|(&z, &c)| if c > 0 { 1.0 - z.clamp(0.0, 1.0) } else { 0.0 })
        .collect();
    ScoreMap {
        height: map_z.height,
        width: map_z.width,
        values,
        counts: map_z.counts.clone(),
    }
}

/// Per-patch weight of the mean-over-covered-pixels cost: the gradient of
/// mean(Z) with respect to patch p's score. Used by the trainers.
pub fn patch_weights(grid: &PatchGrid, height: usize) -> Vec<f64> {
    let width = height;
    let mut counts = vec![0u32; height * width];
    for &(r0, c0) in &grid.anchors {
        for r in r0..r0 + grid.patch_size {
            for c in c0..c0 + grid.patch_size {
                counts[r * width + c] += 1;
            }
        }
    }
    let covered = counts.iter().filter(|&&c| c > 0).count() as f64;
    grid.anchors
        .iter()
        .map(|&(r0, c0)| {
            let mut w = 0.0;
            for r in r0..r0 + grid.patch_size {
                for c in c0..c0 + grid.patch_size {
                    w += 1.0 / f64::from(counts[r * width + c]);
                }
            }
            w / covered
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn const_image(h: usize, v: f64) -> ImageTensor {
        ImageTensor::new(h, h, vec![v; h * h]).unwrap()
    }

    #[test]
    fn patch_counts_match_formula() {
        let img = const_image(32, 0.5);
        assert_eq!(extract_patches(&img, 8, 8).unwrap().len(), 16);
        assert_eq!(extract_patches(&img, 4, 1).unwrap().len(), 841);
        assert_eq!(extract_patches(&img, 8, 4).unwrap().len(), 49);
    }

    #[test]
    fn patch_extraction_raster_order_and_content() {
        let pixels: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let img = ImageTensor::new(4, 4, pixels).unwrap();
        let grid = extract_patches(&img, 2, 2).unwrap();
        assert_eq!(grid.anchors, vec![(0, 0), (0, 2), (2, 0), (2, 2)]);
        assert_eq!(grid.patches[0], vec![0.0, 1.0, 4.0, 5.0]);
        assert_eq!(grid.patches[3], vec![10.0, 11.0, 14.0, 15.0]);
    }

    #[test]
    fn patch_extraction_errors() {
        let img = const_image(4, 0.0);
        assert!(matches!(extract_patches(&img, 8, 1), Err(Error::Argument(_))));
        assert!(matches!(extract_patches(&img, 3, 1), Err(Error::Argument(_))));
        assert!(matches!(extract_patches(&img, 2, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn embed_examples() {
        let s = embed_patch(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.amplitudes()[0].re, 1.0);

        let s = embed_patch(&[0.3, 0.3, 0.3, 0.3]).unwrap();
        for a in s.amplitudes() {
            assert_abs_diff_eq!(a.re, 0.5, epsilon = 1e-12);
        }

        // all-zero patch falls back to the uniform state
        let s = embed_patch(&[0.0; 4]).unwrap();
        for a in s.amplitudes() {
            assert_abs_diff_eq!(a.re, 0.5, epsilon = 1e-12);
        }

        assert!(embed_patch(&[1.0, 2.0, 3.0]).is_err());
    }

    /// Brute-force per-pixel oracle: iterate all patches for each pixel.
    fn assemble_oracle(scores: &[f64], grid: &PatchGrid, h: usize) -> (Vec<f64>, Vec<u32>) {
        let mut values = vec![0.0; h * h];
        let mut counts = vec![0u32; h * h];
        for r in 0..h {
            for c in 0..h {
                for (p, &(r0, c0)) in grid.anchors.iter().enumerate() {
                    if r >= r0 && r < r0 + grid.patch_size && c >= c0 && c < c0 + grid.patch_size {
                        values[r * h + c] += scores[p];
                        counts[r * h + c] += 1;
                    }
                }
                if counts[r * h + c] > 0 {
                    values[r * h + c] /= f64::from(counts[r * h + c]);
                }
            }
        }
        (values, counts)
    }

    #[test]
    fn assemble_examples() {
        let img = const_image(4, 0.0);

        // no overlap: each pixel takes its tile's score
        let grid = extract_patches(&img, 2, 2).unwrap();
        let map = assemble_map(&[0.1, 0.2, 0.3, 0.4], &grid, 4).unwrap();
        assert_eq!(map.get(0, 0), 0.1);
        assert_eq!(map.get(0, 3), 0.2);
        assert_eq!(map.get(3, 0), 0.3);
        assert_eq!(map.get(3, 3), 0.4);

        // constant scores stay constant under overlap
        let grid = extract_patches(&img, 2, 1).unwrap();
        let map = assemble_map(&vec![0.7; grid.len()], &grid, 4).unwrap();
        for v in map.values() {
            assert_abs_diff_eq!(*v, 0.7, epsilon = 1e-12);
        }

        // worked center-pixel case: pixel (1,1) covered by patches 0,1,3,4
        let scores: Vec<f64> = (0..grid.len()).map(|i| i as f64).collect();
        let map = assemble_map(&scores, &grid, 4).unwrap();
        assert_eq!(map.get(1, 1), 2.0);

        assert!(assemble_map(&[0.0], &grid, 4).is_err());
    }

    #[test]
    fn uncovered_pixels_flagged() {
        // H=5, P=2, S=2: last row/col uncovered.
        let img = const_image(5, 0.0);
        let grid = extract_patches(&img, 2, 2).unwrap();
        let map = assemble_map(&vec![1.0; grid.len()], &grid, 5).unwrap();
        assert!(map.has_uncovered());
        assert!(!map.is_covered(4, 4));
        assert_eq!(map.get(4, 4), 0.0);
        let y = to_anomaly(&map);
        assert_eq!(y.get(4, 4), 0.0);
        assert_abs_diff_eq!(map.mean_covered().unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn to_anomaly_examples() {
        let img = const_image(4, 0.0);
        let grid = extract_patches(&img, 2, 2).unwrap();
        let z = assemble_map(&vec![0.75; grid.len()], &grid, 4).unwrap();
        let y = to_anomaly(&z);
        for v in y.values() {
            assert_abs_diff_eq!(*v, 0.25, epsilon = 1e-12);
        }
        let back = to_anomaly(&y);
        for (a, b) in back.values().iter().zip(z.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn patch_weights_sum_to_one_under_full_coverage() {
        let img = const_image(8, 0.0);
        for &(p, s) in &[(2usize, 1usize), (2, 2), (4, 2), (4, 4)] {
            let grid = extract_patches(&img, p, s).unwrap();
            let w = patch_weights(&grid, 8);
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn assemble_matches_bruteforce_exactly(
            h in 8usize..=32,
            p_pow in 1usize..=3,
            stride in 1usize..=8,
            seed in 0u64..1000,
        ) {
            let p = 1usize << p_pow;
            prop_assume!(p <= h);
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let img = ImageTensor::new(h, h, (0..h * h).map(|_| rng.gen()).collect()).unwrap();
            let grid = extract_patches(&img, p, stride).unwrap();

            // patch-count law vs brute-force sliding-window enumeration
            let mut brute = 0usize;
            let mut r = 0usize;
            while r + p <= h {
                let mut c = 0usize;
                while c + p <= h {
                    brute += 1;
                    c += stride;
                }
                r += stride;
            }
            prop_assert_eq!(grid.len(), brute);
            prop_assert_eq!(grid.len(), ((h - p) / stride + 1).pow(2));

            let scores: Vec<f64> = (0..grid.len()).map(|_| rng.gen()).collect();
            let map = assemble_map(&scores, &grid, h).unwrap();
            let (values, counts) = assemble_oracle(&scores, &grid, h);
            prop_assert_eq!(map.values(), &values[..]);
            prop_assert_eq!(map.counts(), &counts[..]);
        }

        #[test]
        fn embedded_patch_has_unit_norm(len_pow in 1usize..=6, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let patch: Vec<f64> = (0..1usize << len_pow).map(|_| rng.gen()).collect();
            let s = embed_patch(&patch).unwrap();
            prop_assert!((s.norm() - 1.0).abs() < 1e-12);
        }
    }
}
