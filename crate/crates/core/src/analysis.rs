//! Grid in, treatment-table quantities out: pipeline, ridge extraction,
//! hyperbola fits, quality gates, density, dipole statistics and crossings.

use serde::{Deserialize, Serialize};

use crate::density::{self, DensityEstimate, DensityOptions, DipoleStats, Eligibility, UsableBand};
use crate::error::{Error, Result};
use crate::hyperbola::{self, CrossingEvent, CrossingParams, FitOptions, HyperbolaFit};
use crate::pipeline::{self, PipelineParams};
use crate::sim::grid::SpectrumGrid;
use crate::units::MHZ;

/// What a fit must show before it is counted as a TLS.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitGates {
    pub min_points: usize,
    pub min_biases: usize,
    /// Points required on each side of the vertex.
    pub min_arm_points: usize,
    pub p_range: [f64; 2],
    pub max_residual_hz: f64,
}

impl Default for FitGates {
    fn default() -> Self {
        FitGates {
            min_points: 8,
            min_biases: 5,
            min_arm_points: 2,
            p_range: [0.02, 2.0],
            max_residual_hz: 0.035 * MHZ,
        }
    }
}

impl FitGates {
    pub fn pass(&self, f: &HyperbolaFit) -> bool {
        f.n_points >= self.min_points
            && f.n_biases >= self.min_biases
            && f.arms.iter().all(|&a| a >= self.min_arm_points)
            && (self.p_range[0]..=self.p_range[1]).contains(&f.p_z)
            && f.residual_rms <= self.max_residual_hz
            && !f.delta0_uncertain
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[derive(Default)]
pub struct AnalysisParams {
    pub pipeline: PipelineParams,
    pub fit: FitOptions,
    pub gates: FitGates,
    pub density: DensityOptions,
    pub crossings: CrossingParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    /// Fits that passed the gates, deduplicated, ordered by ROI then Δ0.
    pub fits: Vec<HyperbolaFit>,
    /// Fits rejected by the gates.
    pub rejected: usize,
    pub n_rois: usize,
    pub eligibility: Eligibility,
    pub n_eligible: usize,
    pub density: DensityEstimate,
    /// None when no fit is eligible.
    pub dipoles: Option<DipoleStats>,
    pub crossings: Vec<CrossingEvent>,
    pub crossing_rate: f64,
    pub n_traces: usize,
}

/// Two fits of one TLS from overlapping ROIs.
fn same_tls(a: &HyperbolaFit, b: &HyperbolaFit) -> bool {
    (a.delta0_hz - b.delta0_hz).abs() < 0.3 * MHZ
        && (a.v_vertex - b.v_vertex).abs() < 0.3e-3
        && (a.p_z / b.p_z - 1.0).abs() < 0.1
}

fn dedupe(mut fits: Vec<HyperbolaFit>) -> Vec<HyperbolaFit> {
    fits.sort_by(|a, b| b.n_points.cmp(&a.n_points).then(a.residual_rms.total_cmp(&b.residual_rms)));
    let mut kept: Vec<HyperbolaFit> = Vec::new();
    for f in fits {
        if !kept.iter().any(|k| same_tls(k, &f)) {
            kept.push(f);
        }
    }
    kept.sort_by(|a, b| a.roi_id.cmp(&b.roi_id).then(a.delta0_hz.total_cmp(&b.delta0_hz)));
    kept
}

pub fn analyze(grid: &SpectrumGrid, params: &AnalysisParams) -> Result<Analysis> {
    if grid.n_bias() < 2 || grid.n_freq() < 3 {
        return Err(Error::DegenerateGrid(format!("{} x {} grid", grid.n_bias(), grid.n_freq())));
    }
    let device = &grid.meta.device;
    let out = pipeline::run(grid, &params.pipeline)?;
    let mut all = Vec::new();
    for roi in &out.rois {
        let pts = hyperbola::ridge_points(roi, &out.background);
        all.extend(hyperbola::fit_hyperbolas(&pts, device, &params.fit).into_iter().map(|f| HyperbolaFit { roi_id: roi.id, ..f }));
    }
    let total = all.len();
    all.retain(|f| params.gates.pass(f));
    let rejected = total - all.len();
    let fits = dedupe(all);

    let eligibility = Eligibility {
        band: UsableBand::of_window(&grid.freqs, device.f_c, params.pipeline.exclude_hz)?,
        v_range: grid.biases.range(),
    };
    let density = density::tls_density(&fits, device, &eligibility, &params.density)?;
    let dipoles = match density::dipole_stats(&fits, &eligibility, density::DIPOLE_BIN_WIDTH) {
        Ok(s) => Some(s),
        Err(Error::NoEligible(_)) => None,
        Err(e) => return Err(e),
    };
    let crossings = hyperbola::detect_grid_crossings(grid, &params.crossings);
    let crossing_rate = hyperbola::crossing_rate(crossings.len(), grid.n_bias())?;
    Ok(Analysis {
        n_eligible: density.n_eligible,
        fits,
        rejected,
        n_rois: out.rois.len(),
        eligibility,
        density,
        dipoles,
        crossings,
        crossing_rate,
        n_traces: grid.n_bias(),
    })
}
