//! Pixel-level evaluation: IoU and Dice threshold sweeps, pooled pixel
//! AUROC, and AUPRO with per-region (connected-component) overlap.
//!
//! Conventions fixed here: components use 8-connectivity; pixels scoring
//! exactly the threshold are classified anomalous (≥ rule); AUROC pools all
//! covered pixels across the test set; AUPRO integrates the PRO-FPR curve on
//! [0, fpr_limit] with linear interpolation at the limit and normalizes by
//! the limit. Uncovered map pixels are excluded throughout.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::patchflow::ScoreMap;

/// Binary ground-truth mask; 1 marks anomalous pixels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl MaskImage {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Dimension(format!(
                "expected {} mask entries, got {}",
                height * width,
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::Argument("mask values must be 0 or 1".into()));
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![0; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }
}

fn check_shapes(a: &MaskImage, b: &MaskImage) -> Result<()> {
    if a.height != b.height || a.width != b.width {
        return Err(Error::Dimension(format!(
            "mask shapes differ: {}x{} vs {}x{}",
            a.height, a.width, b.height, b.width
        )));
    }
    Ok(())
}

/// |A∩B| / |A∪B|; both masks empty counts as 1.
pub fn iou(pred: &MaskImage, gt: &MaskImage) -> Result<f64> {
    check_shapes(pred, gt)?;
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&a, &b) in pred.data.iter().zip(&gt.data) {
        if a == 1 && b == 1 {
            inter += 1;
        }
        if a == 1 || b == 1 {
            union += 1;
        }
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// 2|A∩B| / (|A| + |B|); both masks empty counts as 1.
pub fn dice(pred: &MaskImage, gt: &MaskImage) -> Result<f64> {
    check_shapes(pred, gt)?;
    let mut inter = 0usize;
    let mut total = 0usize;
    for (&a, &b) in pred.data.iter().zip(&gt.data) {
        if a == 1 && b == 1 {
            inter += 1;
        }
        total += usize::from(a == 1) + usize::from(b == 1);
    }
    Ok(if total == 0 { 1.0 } else { 2.0 * inter as f64 / total as f64 })
}

/// 101 evenly spaced thresholds in [0, 1].
pub fn default_thresholds() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

fn check_aligned(maps: &[ScoreMap], gts: &[MaskImage]) -> Result<()> {
    if maps.len() != gts.len() {
        return Err(Error::Dimension(format!(
            "{} maps vs {} ground-truth masks",
            maps.len(),
            gts.len()
        )));
    }
    for (m, g) in maps.iter().zip(gts) {
        if m.height() != g.height || m.width() != g.width {
            return Err(Error::Dimension("map/mask shape mismatch".into()));
        }
    }
    Ok(())
}

/// Dice and IoU averaged over images for each threshold. Maps are binarized
/// with the ≥ rule; uncovered pixels are dropped from both prediction and
/// ground truth.
pub fn threshold_sweep(
    maps: &[ScoreMap],
    gts: &[MaskImage],
    thresholds: &[f64],
) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    check_aligned(maps, gts)?;
    if maps.is_empty() {
        return Err(Error::Argument("empty test set".into()));
    }
    let mut dice_curve = Vec::with_capacity(thresholds.len());
    let mut iou_curve = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let mut dsum = 0.0;
        let mut usum = 0.0;
        for (map, gt) in maps.iter().zip(gts) {
            let mut inter = 0usize;
            let mut a = 0usize;
            let mut b = 0usize;
            for (i, (&v, &c)) in map.values().iter().zip(map.counts()).enumerate() {
                if c == 0 {
                    continue;
                }
                let p = v >= t;
                let g = gt.data[i] == 1;
                if p {
                    a += 1;
                }
                if g {
                    b += 1;
                }
                if p && g {
                    inter += 1;
                }
            }
            dsum += if a + b == 0 { 1.0 } else { 2.0 * inter as f64 / (a + b) as f64 };
            let union = a + b - inter;
            usum += if union == 0 { 1.0 } else { inter as f64 / union as f64 };
        }
        let n = maps.len() as f64;
        dice_curve.push((t, dsum / n));
        iou_curve.push((t, usum / n));
    }
    Ok((dice_curve, iou_curve))
}

/// How AUROC pools pixels: across the whole test set (default) or averaged
/// per image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AurocPooling {
    Pooled,
    PerImageMean,
}

/// Pooled pixel-level AUROC over all covered pixels, ties counted half.
pub fn pixel_auroc(maps: &[ScoreMap], gts: &[MaskImage]) -> Result<f64> {
    pixel_auroc_with(maps, gts, AurocPooling::Pooled)
}

pub fn pixel_auroc_with(
    maps: &[ScoreMap],
    gts: &[MaskImage],
    pooling: AurocPooling,
) -> Result<f64> {
    check_aligned(maps, gts)?;
    match pooling {
        AurocPooling::Pooled => {
            let mut pixels = Vec::new();
            for (map, gt) in maps.iter().zip(gts) {
                collect_pixels(map, gt, &mut pixels);
            }
            auroc_from_pixels(pixels)
        }
        AurocPooling::PerImageMean => {
            let mut sum = 0.0;
            let mut n = 0usize;
            for (map, gt) in maps.iter().zip(gts) {
                let mut pixels = Vec::new();
                collect_pixels(map, gt, &mut pixels);
                // images with a single class carry no ranking information
                if let Ok(a) = auroc_from_pixels(pixels) {
                    sum += a;
                    n += 1;
                }
            }
            if n == 0 {
                return Err(Error::UndefinedMetric(
                    "no image contains both normal and anomalous pixels".into(),
                ));
            }
            Ok(sum / n as f64)
        }
    }
}

fn collect_pixels(map: &ScoreMap, gt: &MaskImage, out: &mut Vec<(f64, bool)>) {
    for (i, (&v, &c)) in map.values().iter().zip(map.counts()).enumerate() {
        if c > 0 {
            out.push((v, gt.data[i] == 1));
        }
    }
}

fn auroc_from_pixels(mut pixels: Vec<(f64, bool)>) -> Result<f64> {
    let pos = pixels.iter().filter(|(_, a)| *a).count();
    let neg = pixels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUROC needs at least one anomalous and one normal pixel".into(),
        ));
    }
    pixels.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut prev_tpr, mut prev_fpr) = (0.0f64, 0.0f64);
    let mut area = 0.0;
    let mut i = 0;
    while i < pixels.len() {
        let score = pixels[i].0;
        while i < pixels.len() && pixels[i].0 == score {
            if pixels[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let tpr = tp as f64 / pos as f64;
        let fpr = fp as f64 / neg as f64;
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    Ok(area)
}

/// Split a mask into its 8-connected components, one mask per component.
pub fn connected_components(mask: &MaskImage) -> Vec<MaskImage> {
    let (h, w) = (mask.height, mask.width);
    let mut seen = vec![false; h * w];
    let mut components = Vec::new();
    for start in 0..h * w {
        if mask.data[start] == 0 || seen[start] {
            continue;
        }
        let mut comp = vec![0u8; h * w];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(idx) = queue.pop_front() {
            comp[idx] = 1;
            let (r, c) = (idx / w, idx % w);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                        continue;
                    }
                    let nidx = nr as usize * w + nc as usize;
                    if mask.data[nidx] == 1 && !seen[nidx] {
                        seen[nidx] = true;
                        queue.push_back(nidx);
                    }
                }
            }
        }
        components.push(MaskImage { height: h, width: w, data: comp });
    }
    components
}

/// How the PRO averages component recalls: one flat mean over all (image,
/// component) pairs (default) or per-image means first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProAveraging {
    TotalComponents,
    PerImageFirst,
}

/// Area under the PRO-FPR curve on [0, fpr_limit], normalized by the limit.
pub fn aupro(maps: &[ScoreMap], gts: &[MaskImage], fpr_limit: f64) -> Result<f64> {
    aupro_with(maps, gts, fpr_limit, ProAveraging::TotalComponents)
}

pub fn aupro_with(
    maps: &[ScoreMap],
    gts: &[MaskImage],
    fpr_limit: f64,
    averaging: ProAveraging,
) -> Result<f64> {
    check_aligned(maps, gts)?;
    if !(fpr_limit > 0.0 && fpr_limit <= 1.0) {
        return Err(Error::Argument(format!("fpr_limit {fpr_limit} outside (0, 1]")));
    }

    // (score, Some((image, component)) for anomalous pixels, None for normal)
    struct Pixel {
        score: f64,
        comp: Option<usize>,
    }
    let mut pixels: Vec<Pixel> = Vec::new();
    let mut comp_sizes: Vec<usize> = Vec::new();
    let mut comps_per_image: Vec<usize> = Vec::new();
    let mut comp_image: Vec<usize> = Vec::new();
    let mut n_normal = 0usize;

    for (img_idx, (map, gt)) in maps.iter().zip(gts).enumerate() {
        let comps = connected_components(gt);
        let mut label = vec![usize::MAX; gt.data.len()];
        let mut image_comp_count = 0usize;
        for comp in &comps {
            let gid = comp_sizes.len();
            let mut covered_size = 0usize;
            for (i, &v) in comp.data.iter().enumerate() {
                if v == 1 && map.counts()[i] > 0 {
                    label[i] = gid;
                    covered_size += 1;
                }
            }
            if covered_size > 0 {
                comp_sizes.push(covered_size);
                comp_image.push(img_idx);
                image_comp_count += 1;
            }
        }
        comps_per_image.push(image_comp_count);
        for (i, (&v, &c)) in map.values().iter().zip(map.counts()).enumerate() {
            if c == 0 {
                continue;
            }
            if gt.data[i] == 1 {
                if label[i] != usize::MAX {
                    pixels.push(Pixel { score: v, comp: Some(label[i]) });
                }
            } else {
                pixels.push(Pixel { score: v, comp: None });
                n_normal += 1;
            }
        }
    }

    if comp_sizes.is_empty() {
        return Err(Error::UndefinedMetric("no ground-truth components".into()));
    }
    if n_normal == 0 {
        return Err(Error::UndefinedMetric("no normal pixels".into()));
    }

    pixels.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());

    let mut inter = vec![0usize; comp_sizes.len()];
    let mut fp = 0usize;
    // (fpr, pro) points, starting at the empty prediction
    let mut curve = vec![(0.0f64, 0.0f64)];
    let mut i = 0;
    while i < pixels.len() {
        let score = pixels[i].score;
        while i < pixels.len() && pixels[i].score == score {
            match pixels[i].comp {
                Some(k) => inter[k] += 1,
                None => fp += 1,
            }
            i += 1;
        }
        let fpr = fp as f64 / n_normal as f64;
        let pro = match averaging {
            ProAveraging::TotalComponents => {
                let sum: f64 = inter
                    .iter()
                    .zip(&comp_sizes)
                    .map(|(&a, &s)| a as f64 / s as f64)
                    .sum();
                sum / comp_sizes.len() as f64
            }
            ProAveraging::PerImageFirst => {
                let mut per_image = vec![0.0f64; maps.len()];
                for ((&a, &s), &img) in inter.iter().zip(&comp_sizes).zip(&comp_image) {
                    per_image[img] += a as f64 / s as f64;
                }
                let mut sum = 0.0;
                let mut n = 0usize;
                for (img, &cnt) in comps_per_image.iter().enumerate() {
                    if cnt > 0 {
                        sum += per_image[img] / cnt as f64;
                        n += 1;
                    }
                }
                sum / n as f64
            }
        };
        // keep equal-fpr corner points: vertical rises carry no area, while
        // cross-class score ties become diagonal segments (tie splitting)
        curve.push((fpr, pro));
    }

    // trapezoidal integral over [0, fpr_limit], interpolating at the limit
    let mut area = 0.0;
    for pair in curve.windows(2) {
        let (f0, p0) = pair[0];
        let (f1, p1) = pair[1];
        if f1 <= fpr_limit {
            area += (f1 - f0) * (p0 + p1) / 2.0;
        } else {
            if f0 < fpr_limit {
                let pm = p0 + (p1 - p0) * (fpr_limit - f0) / (f1 - f0);
                area += (fpr_limit - f0) * (p0 + pm) / 2.0;
            }
            break;
        }
    }
    Ok(area / fpr_limit)
}

/// Per-dataset metric bundle.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub auroc: f64,
    pub aupro: f64,
    pub thresholds: Vec<f64>,
    pub dice_curve: Vec<(f64, f64)>,
    pub iou_curve: Vec<(f64, f64)>,
}

impl EvalReport {
    pub fn compute(maps: &[ScoreMap], gts: &[MaskImage]) -> Result<Self> {
        let thresholds = default_thresholds();
        let (dice_curve, iou_curve) = threshold_sweep(maps, gts, &thresholds)?;
        Ok(Self {
            auroc: pixel_auroc(maps, gts)?,
            aupro: aupro(maps, gts, 0.3)?,
            thresholds,
            dice_curve,
            iou_curve,
        })
    }

    /// Header row of scalar metrics, then one row per threshold.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("auroc,aupro\n");
        out.push_str(&format!("{},{}\n", self.auroc, self.aupro));
        out.push_str("threshold,dice,iou\n");
        for ((t, d), (_, u)) in self.dice_curve.iter().zip(&self.iou_curve) {
            out.push_str(&format!("{t},{d},{u}\n"));
        }
        out
    }

    pub fn summary(&self) -> String {
        let best_dice = self
            .dice_curve
            .iter()
            .cloned()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap_or((0.0, 0.0));
        let best_iou = self
            .iou_curve
            .iter()
            .cloned()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap_or((0.0, 0.0));
        format!(
            "AUROC  {:.4}\nAUPRO  {:.4}\nbest Dice {:.4} at threshold {:.2}\nbest IoU  {:.4} at threshold {:.2}\n",
            self.auroc, self.aupro, best_dice.1, best_dice.0, best_iou.1, best_iou.0
        )
    }
}
