//! Image-processing chain from a transmission grid to candidate TLS pixels:
//! dB conversion, background removal, smoothing along frequency, gradient
//! magnitude, segmentation and ROI extraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Axis, SpectrumGrid};
use crate::units::MHZ;

pub mod filters;
pub mod forest;
pub mod roi;
pub mod segment;

pub use forest::{ForestParams, PixelForest};
pub use roi::{extract_rois, Roi};
pub use segment::{segment, BBox, Component, FeatureMask, SegmentMethod, ThresholdParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Stage {
    Db,
    Background,
    Smooth { sigma_px: f64 },
    Gradient,
    Exclude { center_hz: f64, half_width_hz: f64 },
}

impl Stage {
    fn tag(&self) -> String {
        match self {
            Stage::Db => "db".into(),
            Stage::Background => "background".into(),
            Stage::Smooth { sigma_px } => format!("smooth({sigma_px})"),
            Stage::Gradient => "gradient".into(),
            Stage::Exclude { center_hz, half_width_hz } => format!("exclude({center_hz}±{half_width_hz})"),
        }
    }
}

/// Real-valued grid on the axes of its source, row-major `[bias][freq]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessedGrid {
    pub freqs: Axis,
    pub biases: Axis,
    pub values: Vec<f64>,
    pub stages: Vec<Stage>,
}

impl ProcessedGrid {
    /// |S21| in dB.
    pub fn from_grid(grid: &SpectrumGrid) -> Self {
        ProcessedGrid {
            freqs: grid.freqs,
            biases: grid.biases,
            values: grid.magnitude_db(),
            stages: vec![Stage::Db],
        }
    }

    pub fn n_freq(&self) -> usize {
        self.freqs.len
    }

    pub fn n_bias(&self) -> usize {
        self.biases.len
    }

    pub fn at(&self, bias: usize, freq: usize) -> f64 {
        self.values[bias * self.freqs.len + freq]
    }

    pub fn row(&self, bias: usize) -> &[f64] {
        &self.values[bias * self.freqs.len..(bias + 1) * self.freqs.len]
    }

    /// Transform sequence, e.g. `db>background>smooth(2)>gradient`.
    pub fn tag(&self) -> String {
        self.stages.iter().map(Stage::tag).collect::<Vec<_>>().join(">")
    }

    fn with(&self, values: Vec<f64>, stage: Stage) -> Self {
        let mut stages = self.stages.clone();
        stages.push(stage);
        ProcessedGrid {
            freqs: self.freqs,
            biases: self.biases,
            values,
            stages,
        }
    }

    /// Subtracts the bias-averaged value at each frequency, then each
    /// trace's frequency average.
    pub fn remove_background(&self) -> Result<Self> {
        let (nb, nf) = (self.n_bias(), self.n_freq());
        if nb < 2 {
            return Err(Error::DegenerateGrid("background removal needs at least two traces".into()));
        }
        let mut v = self.values.clone();
        let mut col = vec![0.0; nf];
        for row in v.chunks_exact(nf) {
            for (c, x) in col.iter_mut().zip(row) {
                *c += x;
            }
        }
        for c in &mut col {
            *c /= nb as f64;
        }
        for row in v.chunks_exact_mut(nf) {
            for (x, c) in row.iter_mut().zip(&col) {
                *x -= c;
            }
            let m = row.iter().sum::<f64>() / nf as f64;
            for x in row.iter_mut() {
                *x -= m;
            }
        }
        Ok(self.with(v, Stage::Background))
    }

    /// Gaussian filter of width `sigma_px` along frequency.
    pub fn smooth(&self, sigma_px: f64) -> Result<Self> {
        if !(sigma_px >= 0.0) {
            return Err(Error::Argument("sigma_px must be >= 0".into()));
        }
        let v = filters::gaussian_rows(&self.values, self.n_freq(), sigma_px);
        Ok(self.with(v, Stage::Smooth { sigma_px }))
    }

    /// Zeroes every column within `half_width_hz` of `center_hz`.
    pub fn exclude_band(&self, center_hz: f64, half_width_hz: f64) -> Self {
        let nf = self.n_freq();
        let cols: Vec<bool> = (0..nf).map(|j| (self.freqs.value(j) - center_hz).abs() <= half_width_hz).collect();
        let mut v = self.values.clone();
        for row in v.chunks_exact_mut(nf) {
            for (x, &c) in row.iter_mut().zip(&cols) {
                if c {
                    *x = 0.0;
                }
            }
        }
        self.with(v, Stage::Exclude { center_hz, half_width_hz })
    }

    pub fn gradient_magnitude(&self) -> Result<Self> {
        if self.n_bias() < 2 || self.n_freq() < 2 {
            return Err(Error::DegenerateGrid("gradient needs a grid of at least 2x2".into()));
        }
        let v = filters::gradient_magnitude(&self.values, self.n_bias(), self.n_freq());
        Ok(self.with(v, Stage::Gradient))
    }
}

/// dB conversion followed by background removal.
pub fn remove_background(grid: &SpectrumGrid) -> Result<ProcessedGrid> {
    ProcessedGrid::from_grid(grid).remove_background()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineParams {
    pub sigma_px: f64,
    pub threshold: ThresholdParams,
    pub pad_px: usize,
    /// Half-width of the band around the bare resonance left out of
    /// segmentation, Hz. There the resonator's own dispersive wander
    /// dominates the background-subtracted image.
    pub exclude_hz: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            sigma_px: 2.0,
            threshold: ThresholdParams::default(),
            pad_px: 3,
            exclude_hz: 2.0 * MHZ,
        }
    }
}

/// Output of the chain up to ROI extraction.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub background: ProcessedGrid,
    pub gradient: ProcessedGrid,
    pub mask: FeatureMask,
    pub rois: Vec<Roi>,
}

/// Runs the default chain with threshold segmentation.
pub fn run(grid: &SpectrumGrid, params: &PipelineParams) -> Result<PipelineOutput> {
    let background = remove_background(grid)?;
    let mut gradient = background.smooth(params.sigma_px)?.gradient_magnitude()?;
    if params.exclude_hz > 0.0 {
        gradient = gradient.exclude_band(grid.meta.device.f_c, params.exclude_hz);
    }
    let mask = segment(&gradient, &SegmentMethod::Threshold(params.threshold))?;
    let rois = extract_rois(&mask, params.pad_px);
    Ok(PipelineOutput {
        background,
        gradient,
        mask,
        rois,
    })
}
