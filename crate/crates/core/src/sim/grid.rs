use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DeviceParams;

/// Uniformly spaced, strictly monotone axis. Values are always recomputed as
/// `start + step·i` so an axis read back from a file is bit-identical.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Axis {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !(step != 0.0 && step.is_finite() && start.is_finite()) || len == 0 {
            return Err(Error::Argument(format!("axis needs a non-zero finite step and len > 0, got start {start} step {step} len {len}")));
        }
        Ok(Axis { start, step, len })
    }

    pub fn value(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.value(i)).collect()
    }

    pub fn first(&self) -> f64 {
        self.start
    }

    pub fn last(&self) -> f64 {
        self.value(self.len - 1)
    }

    /// [min, max] of the axis.
    pub fn range(&self) -> [f64; 2] {
        let (a, b) = (self.first(), self.last());
        [a.min(b), a.max(b)]
    }

    /// Fractional index of the physical coordinate `x`.
    pub fn index_of(&self, x: f64) -> f64 {
        (x - self.start) / self.step
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepDirection {
    #[default]
    Up,
    Down,
}

impl SweepDirection {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepDirection::Up => "up",
            SweepDirection::Down => "down",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "up" => Some(SweepDirection::Up),
            "down" => Some(SweepDirection::Down),
            _ => None,
        }
    }
}

/// Payload, row-major `[bias][freq]`.
#[derive(Clone, Debug, PartialEq)]
pub enum GridData {
    Complex(Vec<Complex64>),
    Real(Vec<f64>),
}

impl GridData {
    pub fn len(&self) -> usize {
        match self {
            GridData::Complex(v) => v.len(),
            GridData::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, GridData::Complex(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridMeta {
    pub seed: u64,
    pub direction: SweepDirection,
    pub device: DeviceParams,
}

/// Transmission versus (bias, frequency). Trace `i` was recorded at bias
/// `biases.value(i)` starting at time `t0 + i·trace_time_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumGrid {
    pub freqs: Axis,
    pub biases: Axis,
    pub data: GridData,
    pub trace_time_s: f64,
    pub t0_s: f64,
    pub meta: GridMeta,
}

impl SpectrumGrid {
    pub fn new(freqs: Axis, biases: Axis, data: GridData, trace_time_s: f64, t0_s: f64, meta: GridMeta) -> Result<Self> {
        if data.len() != freqs.len * biases.len {
            return Err(Error::Argument(format!(
                "payload has {} values, expected {} x {}",
                data.len(),
                biases.len,
                freqs.len
            )));
        }
        if !(trace_time_s > 0.0) {
            return Err(Error::Argument("trace_time_s must be > 0".into()));
        }
        Ok(SpectrumGrid {
            freqs,
            biases,
            data,
            trace_time_s,
            t0_s,
            meta,
        })
    }

    pub fn n_freq(&self) -> usize {
        self.freqs.len
    }

    pub fn n_bias(&self) -> usize {
        self.biases.len
    }

    pub fn timestamp(&self, trace: usize) -> f64 {
        self.t0_s + self.trace_time_s * trace as f64
    }

    /// |S21| in dB, row-major. Real payloads are taken as already in dB.
    pub fn magnitude_db(&self) -> Vec<f64> {
        match &self.data {
            GridData::Complex(v) => v.iter().map(|z| 20.0 * z.norm().log10()).collect(),
            GridData::Real(v) => v.clone(),
        }
    }

    /// One trace as complex S21; `None` for real payloads.
    pub fn trace(&self, i: usize) -> Option<&[Complex64]> {
        match &self.data {
            GridData::Complex(v) => Some(&v[i * self.n_freq()..(i + 1) * self.n_freq()]),
            GridData::Real(_) => None,
        }
    }
}
