//! Pixel segmentation of gradient-magnitude grids.

use serde::{Deserialize, Serialize};

use super::forest::PixelForest;
use super::ProcessedGrid;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdParams {
    /// Percentile of the grid values, 0–100.
    pub percentile: f64,
    /// Noise floor per frequency column: median + k_mad·1.4826·MAD of that
    /// column over bias. The larger of this and the percentile wins.
    pub k_mad: f64,
    /// Components smaller than this are discarded.
    pub min_px: usize,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        ThresholdParams {
            percentile: 75.0,
            k_mad: 8.0,
            min_px: 20,
        }
    }
}

pub enum SegmentMethod<'a> {
    Threshold(ThresholdParams),
    Classifier(&'a PixelForest),
}

/// Inclusive pixel box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub bias0: usize,
    pub bias1: usize,
    pub freq0: usize,
    pub freq1: usize,
}

impl BBox {
    pub fn of(pixels: &[(usize, usize)]) -> Self {
        let mut b = BBox {
            bias0: usize::MAX,
            bias1: 0,
            freq0: usize::MAX,
            freq1: 0,
        };
        for &(i, j) in pixels {
            b.bias0 = b.bias0.min(i);
            b.bias1 = b.bias1.max(i);
            b.freq0 = b.freq0.min(j);
            b.freq1 = b.freq1.max(j);
        }
        b
    }

    pub fn padded(&self, pad: usize, n_bias: usize, n_freq: usize) -> Self {
        BBox {
            bias0: self.bias0.saturating_sub(pad),
            bias1: (self.bias1 + pad).min(n_bias - 1),
            freq0: self.freq0.saturating_sub(pad),
            freq1: (self.freq1 + pad).min(n_freq - 1),
        }
    }

    pub fn overlaps(&self, o: &BBox) -> bool {
        self.bias0 <= o.bias1 && o.bias0 <= self.bias1 && self.freq0 <= o.freq1 && o.freq0 <= self.freq1
    }

    pub fn union(&self, o: &BBox) -> BBox {
        BBox {
            bias0: self.bias0.min(o.bias0),
            bias1: self.bias1.max(o.bias1),
            freq0: self.freq0.min(o.freq0),
            freq1: self.freq1.max(o.freq1),
        }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        (self.bias0..=self.bias1).contains(&i) && (self.freq0..=self.freq1).contains(&j)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    /// (bias index, freq index), in scan order.
    pub pixels: Vec<(usize, usize)>,
    pub bbox: BBox,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMask {
    pub n_bias: usize,
    pub n_freq: usize,
    pub mask: Vec<bool>,
    pub components: Vec<Component>,
}

impl FeatureMask {
    /// Labels an arbitrary boolean mask, discarding components below `min_px`
    /// so that every remaining true pixel belongs to exactly one component.
    pub fn from_mask(mut mask: Vec<bool>, n_bias: usize, n_freq: usize, min_px: usize) -> Self {
        let mut components = label(&mask, n_bias, n_freq);
        components.retain(|c| {
            let keep = c.pixels.len() >= min_px;
            if !keep {
                for &(i, j) in &c.pixels {
                    mask[i * n_freq + j] = false;
                }
            }
            keep
        });
        FeatureMask {
            n_bias,
            n_freq,
            mask,
            components,
        }
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Linear-interpolated percentile of `values`, q in [0, 100].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = (q / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Median and normalised median absolute deviation.
pub fn median_mad(values: &[f64]) -> (f64, f64) {
    let med = percentile(values, 50.0);
    let dev: Vec<f64> = values.iter().map(|x| (x - med).abs()).collect();
    (med, 1.4826 * percentile(&dev, 50.0))
}

fn erode(mask: &[bool], nr: usize, nc: usize) -> Vec<bool> {
    let mut out = vec![false; mask.len()];
    for i in 1..nr.saturating_sub(1) {
        for j in 1..nc.saturating_sub(1) {
            out[i * nc + j] = (i - 1..=i + 1).all(|a| (j - 1..=j + 1).all(|b| mask[a * nc + b]));
        }
    }
    out
}

fn dilate(mask: &[bool], nr: usize, nc: usize) -> Vec<bool> {
    let mut out = vec![false; mask.len()];
    for i in 0..nr {
        for j in 0..nc {
            if mask[i * nc + j] {
                for a in i.saturating_sub(1)..=(i + 1).min(nr - 1) {
                    for b in j.saturating_sub(1)..=(j + 1).min(nc - 1) {
                        out[a * nc + b] = true;
                    }
                }
            }
        }
    }
    out
}

/// 3×3 opening; pixels beyond the border count as background.
pub fn open3(mask: &[bool], nr: usize, nc: usize) -> Vec<bool> {
    dilate(&erode(mask, nr, nc), nr, nc)
}

/// 3×3 closing.
pub fn close3(mask: &[bool], nr: usize, nc: usize) -> Vec<bool> {
    erode(&dilate(mask, nr, nc), nr, nc)
}

/// 8-connected components in scan order of their first pixel.
pub fn label(mask: &[bool], nr: usize, nc: usize) -> Vec<Component> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(k) = stack.pop() {
            let (i, j) = (k / nc, k % nc);
            pixels.push((i, j));
            for a in i.saturating_sub(1)..=(i + 1).min(nr - 1) {
                for b in j.saturating_sub(1)..=(j + 1).min(nc - 1) {
                    let q = a * nc + b;
                    if mask[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        pixels.sort_unstable();
        let bbox = BBox::of(&pixels);
        out.push(Component { pixels, bbox });
    }
    out
}

/// Per-column levels. A column's own spread sets its floor, so frequencies
/// that are busy in most traces (the resonator itself) need a stronger
/// feature to register than quiet ones.
pub fn threshold_levels(values: &[f64], n_rows: usize, n_cols: usize, p: &ThresholdParams) -> Vec<f64> {
    let global = percentile(values, p.percentile);
    (0..n_cols)
        .map(|j| {
            let col: Vec<f64> = (0..n_rows).map(|i| values[i * n_cols + j]).collect();
            let (med, mad) = median_mad(&col);
            global.max(med + p.k_mad * mad)
        })
        .collect()
}

pub fn segment(pg: &ProcessedGrid, method: &SegmentMethod) -> Result<FeatureMask> {
    let (nr, nc) = (pg.n_bias(), pg.n_freq());
    match method {
        SegmentMethod::Threshold(p) => {
            let levels = threshold_levels(&pg.values, nr, nc, p);
            let raw: Vec<bool> = pg.values.iter().enumerate().map(|(k, &x)| x > levels[k % nc]).collect();
            // Closing first: a fast arm leaves dashes a row or two thick that
            // the opening alone would erase.
            let m = open3(&close3(&raw, nr, nc), nr, nc);
            Ok(FeatureMask::from_mask(m, nr, nc, p.min_px))
        }
        SegmentMethod::Classifier(forest) => {
            let raw = forest.predict(pg)?;
            Ok(FeatureMask::from_mask(raw, nr, nc, forest.params().min_px))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_matches_linear_rule() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 50.0), 2.5);
        assert_eq!(percentile(&v, 100.0), 4.0);
        assert_eq!(percentile(&v, 0.0), 1.0);
    }

    #[test]
    fn opening_removes_thin_lines() {
        let (nr, nc) = (7, 7);
        let mut m = vec![false; nr * nc];
        for j in 0..nc {
            m[3 * nc + j] = true;
        }
        assert!(open3(&m, nr, nc).iter().all(|&x| !x));
        let mut sq = vec![false; nr * nc];
        for i in 1..4 {
            for j in 1..4 {
                sq[i * nc + j] = true;
            }
        }
        assert_eq!(open3(&sq, nr, nc), sq);
    }

    #[test]
    fn diagonal_is_one_component() {
        let n = 5;
        let m: Vec<bool> = (0..n * n).map(|k| k / n == k % n).collect();
        let c = label(&m, n, n);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].pixels.len(), 5);
    }
}
