//! The JSON results document. Every number carries its unit and an
//! uncertainty; `generated_at` is the only field that varies between runs
//! with the same inputs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::Analysis;
use crate::density;
use crate::error::{Error, Result};
use crate::hyperbola::HyperbolaFit;
use crate::io::config::RunConfig;
use crate::loss::LossFit;
use crate::model::DeviceParams;

pub const RESULTS_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Measure {
    pub value: f64,
    /// Null in the document when unbounded.
    #[serde(with = "sigma_json")]
    pub sigma: f64,
    pub unit: String,
}

mod sigma_json {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Measure {
    pub fn new(value: f64, sigma: f64, unit: &str) -> Self {
        Measure {
            value,
            sigma: if sigma.is_nan() { f64::INFINITY } else { sigma },
            unit: unit.to_string(),
        }
    }

    /// A count or other exact quantity.
    pub fn exact(value: f64, unit: &str) -> Self {
        Self::new(value, 0.0, unit)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRecord {
    pub roi_id: usize,
    pub delta0: Measure,
    pub v_vertex: Measure,
    pub p_z: Measure,
    pub residual_rms: Measure,
    /// Covariance of (delta0 [Hz], v_vertex [V], p_z [e·Å]).
    pub covariance: [[f64; 3]; 3],
    pub n_points: usize,
    pub eligible: bool,
    pub delta0_uncertain: bool,
}

impl FitRecord {
    pub fn new(f: &HyperbolaFit, eligible: bool) -> Self {
        let s = f.sigma();
        FitRecord {
            roi_id: f.roi_id,
            delta0: Measure::new(f.delta0_hz, s[0], "Hz"),
            v_vertex: Measure::new(f.v_vertex, s[1], "V"),
            p_z: Measure::new(f.p_z, s[2], "e*angstrom"),
            residual_rms: Measure::exact(f.residual_rms, "Hz"),
            covariance: f.covariance,
            n_points: f.n_points,
            eligible,
            delta0_uncertain: f.delta0_uncertain,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossRecord {
    pub tan0_tls: Measure,
    pub n_c: Measure,
    pub tan_e: Measure,
    pub residual: f64,
    pub ill_conditioned: bool,
    pub converged: bool,
}

impl From<&LossFit> for LossRecord {
    fn from(f: &LossFit) -> Self {
        let s = f.sigma();
        LossRecord {
            tan0_tls: Measure::new(f.tan0_tls, s[0], "1"),
            n_c: Measure::new(f.n_c, s[1], "photons"),
            tan_e: Measure::new(f.tan_e, s[2], "1"),
            residual: f.residual,
            ill_conditioned: f.ill_conditioned,
            converged: f.converged,
        }
    }
}

/// One analysed sweep: the quantities of one treatment-table row plus the fits
/// behind them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Row {
    pub treatment: String,
    /// Seed of the sweep noise.
    pub sweep_seed: u64,
    pub n_traces: usize,
    pub n_rois: usize,
    pub n_fits: usize,
    pub n_eligible: usize,
    pub mean_p_z: Option<Measure>,
    pub density: Measure,
    pub tan_delta_calc: Option<Measure>,
    pub crossings: usize,
    pub crossing_rate: Measure,
    pub loss_fit: Option<LossRecord>,
    pub fits: Vec<FitRecord>,
}

impl Row {
    pub fn from_analysis(treatment: &str, sweep_seed: u64, a: &Analysis, device: &DeviceParams) -> Self {
        let mean_p_z = a.dipoles.as_ref().map(|d| Measure::new(d.mean, d.sem(), "e*angstrom"));
        let tan_delta_calc = a.dipoles.as_ref().map(|d| {
            let v = density::loss_from_density(a.density.rho, d.mean_sq, device).unwrap_or(0.0);
            let rel = if a.density.rho > 0.0 { a.density.sigma_rho / a.density.rho } else { 0.0 };
            Measure::new(v, v * rel, "1")
        });
        let n = a.n_traces as f64;
        Row {
            treatment: treatment.to_string(),
            sweep_seed,
            n_traces: a.n_traces,
            n_rois: a.n_rois,
            n_fits: a.fits.len(),
            n_eligible: a.n_eligible,
            mean_p_z,
            density: Measure::new(a.density.rho, a.density.sigma_rho, "TLS/(um^3*GHz)"),
            tan_delta_calc,
            crossings: a.crossings.len(),
            crossing_rate: Measure::new(a.crossing_rate, (a.crossings.len() as f64).sqrt() / n, "1/trace"),
            loss_fit: None,
            fits: a.fits.iter().map(|f| FitRecord::new(f, a.eligibility.admits(f))).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub master: u64,
    pub ensemble: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultsDoc {
    pub format_version: u32,
    pub tool: String,
    /// Unix time of writing, s. Excluded from reproducibility comparisons.
    pub generated_at: u64,
    pub kind: String,
    pub scenario: Option<String>,
    pub steps: Vec<String>,
    pub seeds: Seeds,
    pub config: RunConfig,
    pub rows: Vec<Row>,
    /// Loss fits not tied to a sweep.
    pub loss_fits: Vec<LossRecord>,
}

impl ResultsDoc {
    pub fn new(kind: &str, config: &RunConfig, ensemble_seed: u64) -> Self {
        ResultsDoc {
            format_version: RESULTS_VERSION,
            tool: format!("tls-spectro {}", env!("CARGO_PKG_VERSION")),
            generated_at: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            kind: kind.to_string(),
            scenario: None,
            steps: Vec::new(),
            seeds: Seeds {
                master: config.seed,
                ensemble: ensemble_seed,
            },
            config: config.clone(),
            rows: Vec::new(),
            loss_fits: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("results serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        super::write_atomic(path, self.to_json().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Copy with the timestamp zeroed, for comparing runs.
    pub fn without_timestamp(&self) -> Self {
        ResultsDoc {
            generated_at: 0,
            ..self.clone()
        }
    }
}
