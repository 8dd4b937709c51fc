//! Forward model: complex transmission of a notch-coupled resonator dressed
//! by a TLS ensemble, swept in gate bias.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Mode, TlsEnsemble};
use crate::error::{Error, Result};
use crate::loss::{saturated_loss, LossCurve, LossParams};
use crate::model::{self, DeviceParams};
use crate::rng;
use crate::units::{HBAR, MHZ};

pub mod grid;
pub mod notch_fit;

pub use grid::{Axis, GridData, GridMeta, SpectrumGrid, SweepDirection};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Bias range [v_start, v_stop) with spacing v_step, V.
    pub v_start: f64,
    pub v_stop: f64,
    pub v_step: f64,
    pub f_center: f64,
    /// Full frequency span; the axis includes both edges.
    pub f_span: f64,
    pub f_points: usize,
    pub trace_time_s: f64,
    /// Mean intracavity photon number during the sweep.
    pub n_photon: f64,
    /// Standard deviation of each noise quadrature on linear S21.
    pub noise_sd: f64,
    pub seed: u64,
    pub direction: SweepDirection,
    /// Electrical delay applied as a linear phase, s.
    pub cable_delay_s: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            v_start: 0.0,
            v_stop: 50e-3,
            v_step: 100e-6,
            f_center: DeviceParams::default().f_c,
            f_span: 12.0 * MHZ,
            f_points: 1001,
            trace_time_s: 360.0,
            n_photon: 0.0,
            noise_sd: 0.002,
            seed: 0,
            direction: SweepDirection::Up,
            cable_delay_s: 0.0,
        }
    }
}

impl SweepConfig {
    /// Reduced sweep used for quick runs: 0–20 mV in 200 traces of 401 points.
    pub fn desk() -> Self {
        SweepConfig {
            v_stop: 20e-3,
            f_points: 401,
            ..SweepConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("sweep: {m}")));
        if !(self.v_step > 0.0) {
            return bad("v_step must be > 0");
        }
        if !(self.v_stop > self.v_start) {
            return bad("v_stop must exceed v_start");
        }
        if self.n_bias() < 2 {
            return bad("at least two bias points are needed");
        }
        if self.f_points < 2 {
            return bad("f_points must be >= 2");
        }
        if !(self.f_span > 0.0 && self.f_center > 0.0) {
            return bad("f_center and f_span must be > 0");
        }
        if !(self.trace_time_s > 0.0) {
            return bad("trace_time_s must be > 0");
        }
        if !(self.n_photon >= 0.0) {
            return bad("n_photon must be >= 0");
        }
        if !(self.noise_sd >= 0.0) {
            return bad("noise_sd must be >= 0");
        }
        Ok(())
    }

    pub fn n_bias(&self) -> usize {
        ((self.v_stop - self.v_start) / self.v_step).round() as usize
    }

    pub fn freq_axis(&self) -> Axis {
        let step = self.f_span / (self.f_points - 1) as f64;
        Axis {
            start: self.f_center - 0.5 * self.f_span,
            step,
            len: self.f_points,
        }
    }

    /// Biases in acquisition order.
    pub fn bias_axis(&self) -> Axis {
        let n = self.n_bias();
        match self.direction {
            SweepDirection::Up => Axis { start: self.v_start, step: self.v_step, len: n },
            SweepDirection::Down => Axis {
                start: self.v_start + self.v_step * (n - 1) as f64,
                step: -self.v_step,
                len: n,
            },
        }
    }
}

/// One TLS as seen by a single trace.
#[derive(Clone, Copy, Debug)]
struct Pole {
    nu: f64,
    half_gamma: f64,
    /// (2Q_l/f_c)·g_eff²·saturation.
    weight: f64,
}

fn poles(device: &DeviceParams, ens: &TlsEnsemble, offsets: &[f64], v_g: f64, n_photon: f64) -> Vec<Pole> {
    let e_g = model::gate_field(v_g, device);
    let pref = 2.0 * device.q_loaded() / device.f_c;
    ens.members
        .iter()
        .zip(offsets)
        .filter_map(|(tls, &off)| {
            let g = model::effective_coupling(tls, e_g, device);
            if g == 0.0 {
                return None;
            }
            let n_c = tls.gamma * tls.gamma / (8.0 * g * g);
            let sat = 1.0 / (1.0 + n_photon / n_c);
            Some(Pole {
                nu: model::tls_frequency(tls, e_g) + off,
                half_gamma: 0.5 * tls.gamma,
                weight: pref * g * g * sat,
            })
        })
        .collect()
}

fn transmission(device: &DeviceParams, poles: &[Pole], f: f64, cable_delay_s: f64) -> Complex64 {
    let q_l = device.q_loaded();
    let mut den = Complex64::new(1.0, 2.0 * q_l * (f - device.f_c) / device.f_c);
    for p in poles {
        den += p.weight / Complex64::new(p.half_gamma, f - p.nu);
    }
    let s = Complex64::new(1.0, 0.0) - (q_l / device.q_c) / den;
    if cable_delay_s == 0.0 {
        s
    } else {
        s * Complex64::from_polar(1.0, -2.0 * PI * f * cable_delay_s)
    }
}

/// Noiseless S21 at bias `v_g` for the ensemble's present offsets.
pub fn s21_clean(device: &DeviceParams, ens: &TlsEnsemble, v_g: f64, n_photon: f64, freqs: &[f64]) -> Vec<Complex64> {
    let offsets = ens.offsets();
    let ps = poles(device, ens, &offsets, v_g, n_photon);
    freqs.iter().map(|&f| transmission(device, &ps, f, 0.0)).collect()
}

/// S21 over `freqs` with additive complex Gaussian noise of the given
/// per-quadrature standard deviation.
pub fn s21_trace<R: Rng + ?Sized>(
    device: &DeviceParams,
    ens: &TlsEnsemble,
    v_g: f64,
    n_photon: f64,
    freqs: &[f64],
    noise_sd: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    let mut s = s21_clean(device, ens, v_g, n_photon, freqs);
    add_noise(&mut s, noise_sd, rng);
    s
}

fn add_noise<R: Rng + ?Sized>(s: &mut [Complex64], sd: f64, rng: &mut R) {
    if sd == 0.0 {
        return;
    }
    for z in s {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *z += Complex64::new(sd * re, sd * im);
    }
}

fn trace_at(device: &DeviceParams, ens: &TlsEnsemble, offsets: &[f64], cfg: &SweepConfig, freqs: &[f64], bias_key: u64, v: f64) -> Vec<Complex64> {
    let ps = poles(device, ens, offsets, v, cfg.n_photon);
    let mut s: Vec<Complex64> = freqs.iter().map(|&f| transmission(device, &ps, f, cfg.cable_delay_s)).collect();
    // Noise is keyed by bias position so a steady sweep does not depend on
    // acquisition order.
    let mut r = rng::substream(cfg.seed, "trace_noise", bias_key);
    add_noise(&mut s, cfg.noise_sd, &mut r);
    s
}

/// Records one trace per bias. Steady ensembles are computed in parallel;
/// jittering ensembles are stepped trace by trace, each trace seeing the
/// offsets present when it started.
pub fn voltage_sweep(device: &DeviceParams, ens: &mut TlsEnsemble, cfg: &SweepConfig) -> Result<SpectrumGrid> {
    device.validate()?;
    cfg.validate()?;
    let freqs_axis = cfg.freq_axis();
    let bias_axis = cfg.bias_axis();
    let freqs = freqs_axis.values();
    let n = bias_axis.len;
    let key = |i: usize| -> (u64, f64) {
        let up = match cfg.direction {
            SweepDirection::Up => i,
            SweepDirection::Down => n - 1 - i,
        };
        (up as u64, bias_axis.value(i))
    };
    let t0 = ens.clock;
    let rows: Vec<Vec<Complex64>> = match ens.mode {
        Mode::Steady => {
            let offsets = ens.offsets();
            let snapshot: &TlsEnsemble = ens;
            let rows = (0..n)
                .into_par_iter()
                .map(|i| {
                    let (k, v) = key(i);
                    trace_at(device, snapshot, &offsets, cfg, &freqs, k, v)
                })
                .collect();
            ens.evolve(cfg.trace_time_s * n as f64)?;
            rows
        }
        Mode::Jitter => {
            let mut rows = Vec::with_capacity(n);
            for i in 0..n {
                let (k, v) = key(i);
                let offsets = ens.offsets();
                rows.push(trace_at(device, ens, &offsets, cfg, &freqs, k, v));
                ens.evolve(cfg.trace_time_s)?;
            }
            rows
        }
    };
    let data = GridData::Complex(rows.into_iter().flatten().collect());
    let meta = GridMeta {
        seed: cfg.seed,
        direction: cfg.direction,
        device: *device,
    };
    SpectrumGrid::new(freqs_axis, bias_axis, data, cfg.trace_time_s, t0, meta)
}

/// How well a single TLS shows up in a sweep, ignoring every other member.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    /// Consecutive traces around the vertex in which the TLS lies inside the
    /// window on its own side of the excluded band around f_c.
    pub traces: usize,
    /// Depth of its dip at the vertex relative to the bare resonator, dB (≤ 0).
    pub depth_db: f64,
}

pub fn visibility(device: &DeviceParams, tls: &model::TlsParams, cfg: &SweepConfig, exclude_hz: f64) -> Visibility {
    let fa = cfg.freq_axis();
    let (lo, hi) = if tls.delta0 < device.f_c {
        (fa.first(), device.f_c - exclude_hz)
    } else {
        (device.f_c + exclude_hz, fa.last())
    };
    let ba = cfg.bias_axis();
    let mut vs = ba.values();
    vs.sort_by(f64::total_cmp);
    let inside: Vec<bool> = vs
        .iter()
        .map(|&v| (lo..=hi).contains(&model::tls_frequency(tls, model::gate_field(v, device))))
        .collect();
    let traces = match tls.vertex_bias(device) {
        Some(vv) if (lo..=hi).contains(&tls.delta0) && (vs[0]..=vs[vs.len() - 1]).contains(&vv) => {
            let k = vs.partition_point(|&v| v < vv).min(vs.len() - 1);
            let k = if k > 0 && (vv - vs[k - 1]).abs() < (vs[k] - vv).abs() { k - 1 } else { k };
            if inside[k] {
                let left = inside[..k].iter().rev().take_while(|&&b| b).count();
                let right = inside[k + 1..].iter().take_while(|&&b| b).count();
                left + 1 + right
            } else {
                0
            }
        }
        _ => 0,
    };
    let bare = model::TlsParams { delta: 0.0, ..*tls };
    let one = TlsEnsemble::from_members(vec![bare], 0);
    let none = TlsEnsemble::from_members(Vec::new(), 0);
    let half = 5.0 * (tls.gamma + model::coupling_g(tls.p_z, device));
    let freqs: Vec<f64> = (0..=400).map(|i| tls.delta0 - half + 2.0 * half * i as f64 / 400.0).collect();
    let with = s21_clean(device, &one, 0.0, cfg.n_photon, &freqs);
    let without = s21_clean(device, &none, 0.0, cfg.n_photon, &freqs);
    let depth_db = with
        .iter()
        .zip(&without)
        .map(|(a, b)| 20.0 * (a.norm() / b.norm()).log10())
        .fold(0.0, f64::min);
    Visibility { traces, depth_db }
}

/// Mean intracavity photon number for applied power `p_applied` (W),
/// n̄ = 2·P·Q_l²/(Q_c·ħ·ω_c²).
pub fn photon_number(p_applied: f64, device: &DeviceParams) -> Result<f64> {
    if !(p_applied >= 0.0) {
        return Err(Error::Argument("applied power must be >= 0".into()));
    }
    Ok(p_applied * photons_per_watt(device))
}

/// Inverse of [`photon_number`].
pub fn power_for_photons(n_photon: f64, device: &DeviceParams) -> Result<f64> {
    if !(n_photon >= 0.0) {
        return Err(Error::Argument("photon number must be >= 0".into()));
    }
    Ok(n_photon / photons_per_watt(device))
}

fn photons_per_watt(device: &DeviceParams) -> f64 {
    let q_l = device.q_loaded();
    let w = device.omega_c();
    2.0 * q_l * q_l / (device.q_c * HBAR * w * w)
}

/// Samples the saturation law on `n_grid` with multiplicative Gaussian noise
/// of relative size `noise_sd`.
pub fn power_sweep<R: Rng + ?Sized>(truth: &LossParams, n_grid: &[f64], noise_sd: f64, rng: &mut R) -> Result<LossCurve> {
    if n_grid.iter().any(|&n| !(n > 0.0)) || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("photon grid must be positive and ascending".into()));
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::Argument("noise_sd must be >= 0".into()));
    }
    let tan_delta = n_grid
        .iter()
        .map(|&n| {
            let e: f64 = StandardNormal.sample(rng);
            saturated_loss(n, truth) * (1.0 + noise_sd * e)
        })
        .collect();
    Ok(LossCurve {
        n_photon: n_grid.to_vec(),
        tan_delta,
    })
}

/// Log-spaced photon grid with `n` points from `lo` to `hi`.
pub fn log_photon_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n.max(2) - 1) as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TlsParams;
    use crate::units::GHZ;

    fn empty() -> TlsEnsemble {
        TlsEnsemble::from_members(Vec::new(), 0)
    }

    #[test]
    fn bare_resonator_limits() {
        let d = DeviceParams::default();
        let s = s21_clean(&d, &empty(), 0.0, 0.0, &[d.f_c, d.f_c + 1.0 * GHZ]);
        assert!((s[0].re - (1.0 - d.q_loaded() / d.q_c)).abs() < 1e-15);
        assert!(s[0].im.abs() < 1e-15);
        assert!((s[1].norm() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn sweep_shape_and_clock() {
        let d = DeviceParams::default();
        let cfg = SweepConfig { v_stop: 1e-3, f_points: 11, ..SweepConfig::desk() };
        let mut e = empty();
        let g = voltage_sweep(&d, &mut e, &cfg).unwrap();
        assert_eq!(g.n_bias(), 10);
        assert_eq!(g.n_freq(), 11);
        assert_eq!(e.clock, 3600.0);
        assert_eq!(SweepConfig::default().n_bias(), 500);
    }

    #[test]
    fn photon_number_inverse() {
        let d = DeviceParams::default();
        assert_eq!(photon_number(0.0, &d).unwrap(), 0.0);
        let p = power_for_photons(1.0, &d).unwrap();
        assert!((photon_number(p, &d).unwrap() - 1.0).abs() < 1e-12);
        assert!((photon_number(2.0 * p, &d).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn saturation_removes_tls() {
        let d = DeviceParams::default();
        let t = TlsParams::new(d.f_c, 0.0, 0.5, crate::ensemble::GAMMA_DEFAULT);
        let ens = TlsEnsemble::from_members(vec![t], 0);
        let bare = s21_clean(&d, &empty(), 0.0, 0.0, &[d.f_c]);
        let strong = s21_clean(&d, &ens, 0.0, 1e9, &[d.f_c]);
        assert!((strong[0] - bare[0]).norm() < 1e-4);
        let weak = s21_clean(&d, &ens, 0.0, 0.0, &[d.f_c]);
        assert!((weak[0] - bare[0]).norm() > 0.1);
    }
}
