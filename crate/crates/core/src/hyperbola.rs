//! Hyperbola fits to ROI pixels and single-trace avoided-crossing detection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::{self, LmOptions, Loss};
use crate::model::{self, DeviceParams};
use crate::pipeline::{ProcessedGrid, Roi};
use crate::pipeline::filters;
use crate::pipeline::segment::median_mad;
use crate::sim::SpectrumGrid;
use crate::units::{GHZ, MHZ};

/// f(V) = sqrt(Δ0² + (p_z·(V − V_v)/(d0·h))²), Hz.
pub fn hyperbola(v: f64, delta0: f64, v_vertex: f64, p_z: f64, device: &DeviceParams) -> f64 {
    delta0.hypot(model::tuning_rate(p_z, device) * (v - v_vertex))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolaFit {
    pub delta0_hz: f64,
    pub v_vertex: f64,
    pub p_z: f64,
    pub residual_rms: f64,
    /// Covariance of (delta0_hz, v_vertex, p_z) in Hz, V, e·Å.
    pub covariance: [[f64; 3]; 3],
    pub roi_id: usize,
    pub n_points: usize,
    pub n_biases: usize,
    /// Points below and above the fitted vertex bias.
    pub arms: [usize; 2],
    /// σ(Δ0)/Δ0 exceeds one half: the vertex is not constrained by the data.
    pub delta0_uncertain: bool,
}

impl HyperbolaFit {
    pub fn sigma(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.covariance[i][i].sqrt())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolaInit {
    pub delta0_hz: f64,
    pub v_vertex: f64,
    pub p_z: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    /// Cauchy residual scale, Hz.
    pub loss_scale: f64,
    pub min_points: usize,
    pub min_biases: usize,
    /// Undo the level repulsion by the resonator before fitting. Observed
    /// dips sit at f with (f − f_c)(f − ε) = g_eff²; without the correction
    /// the arms look flatter than they are and p_z comes out low.
    pub undress: bool,
    /// Distance from the curve within which a point counts as explained by
    /// it when several curves are peeled from one region, Hz.
    pub inlier_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            loss_scale: 0.1 * MHZ,
            min_points: 6,
            min_biases: 3,
            undress: true,
            inlier_tol: 0.08 * MHZ,
        }
    }
}

fn distinct(mut xs: Vec<f64>) -> usize {
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.len()
}

/// Vertex at `(vv, f0)` and slope from the median two-point secant through
/// it and its nearest neighbours in bias. Far points may belong to another
/// curve.
fn guess_from_vertex(points: &[(f64, f64)], vv: f64, f0: f64, device: &DeviceParams) -> Option<HyperbolaInit> {
    let mut near: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0 != vv && p.1 > f0).collect();
    near.sort_by(|a, b| (a.0 - vv).abs().total_cmp(&(b.0 - vv).abs()));
    near.truncate(GUESS_NEIGHBOURS);
    let mut rates: Vec<f64> = near
        .iter()
        .map(|&(v, f)| (f * f - f0 * f0).sqrt() / (v - vv).abs())
        .collect();
    if rates.is_empty() {
        return None;
    }
    rates.sort_by(f64::total_cmp);
    Some(HyperbolaInit {
        delta0_hz: f0,
        v_vertex: vv,
        p_z: rates[rates.len() / 2] / model::tuning_rate(1.0, device),
    })
}

const GUESS_NEIGHBOURS: usize = 6;
const VERTEX_CANDIDATES: usize = 8;

/// Starting points with the vertex placed at each of the lowest few points
/// in distinct traces. A stray point from a neighbouring feature can be the
/// lowest one; the robust loss then decides between the starts.
fn initial_guesses(points: &[(f64, f64)], device: &DeviceParams) -> Vec<HyperbolaInit> {
    let mut by_f: Vec<(f64, f64)> = points.to_vec();
    by_f.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut seen: Vec<f64> = Vec::new();
    let mut out = Vec::new();
    for &(v, f) in &by_f {
        if seen.contains(&v) {
            continue;
        }
        seen.push(v);
        out.extend(guess_from_vertex(points, v, f, device));
        if seen.len() == VERTEX_CANDIDATES {
            break;
        }
    }
    out
}

const UNDRESS_PASSES: usize = 3;
/// Below this the curve is a flat line through the points, e·Å.
const MIN_P_Z: f64 = 1e-3;

/// Bare TLS frequency behind a dip observed at `f`.
fn undress(f: f64, fit: &HyperbolaFit, device: &DeviceParams) -> f64 {
    let g = model::coupling_g(fit.p_z, device) * fit.delta0_hz / f;
    let det = f - device.f_c;
    // Close to the resonator the mapping is singular; such points are
    // excluded upstream and are left as they are here.
    if det.abs() < 2.0 * g {
        return f;
    }
    f - g * g / det
}

/// Robust fit of the hyperbola to (V, f) points.
pub fn fit_hyperbola(
    points: &[(f64, f64)],
    device: &DeviceParams,
    init: Option<HyperbolaInit>,
    opts: &FitOptions,
) -> Result<HyperbolaFit> {
    check_counts(points, opts)?;
    match init {
        Some(start) => fit_from(points, device, start, opts),
        None => fit_multi(points, device, opts),
    }
}

/// Best of several local fits, ranked by how many points the curve explains.
/// A curve that strings together pieces of two traces explains few of them
/// closely.
fn fit_multi(points: &[(f64, f64)], device: &DeviceParams, opts: &FitOptions) -> Result<HyperbolaFit> {
    let mut best: Option<((usize, f64), HyperbolaFit)> = None;
    let mut first_err = None;
    for start in initial_guesses(points, device) {
        match grow(points, device, start, opts) {
            Ok(f) => {
                let (n, c) = support(points, &f, device, opts);
                if best.as_ref().is_none_or(|((bn, bc), _)| n > *bn || (n == *bn && c < *bc)) {
                    best = Some(((n, c), f));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some((_, f)), _) => Ok(f),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::Unfittable("slope indistinguishable from zero".into())),
    }
}

const GROW_PASSES: usize = 12;

/// Fit to the points nearest the starting vertex in bias, then repeatedly
/// refit to every point the current curve passes close to.
fn grow(points: &[(f64, f64)], device: &DeviceParams, start: HyperbolaInit, opts: &FitOptions) -> Result<HyperbolaFit> {
    let mut subset: Vec<(f64, f64)> = points.to_vec();
    subset.sort_by(|a, b| (a.0 - start.v_vertex).abs().total_cmp(&(b.0 - start.v_vertex).abs()));
    subset.truncate((GUESS_NEIGHBOURS + 1).max(opts.min_points));
    let mut fit = fit_from(&subset, device, start, opts)?;
    for _ in 0..GROW_PASSES {
        let next: Vec<(f64, f64)> = points
            .iter()
            .copied()
            .filter(|&p| distance(p, &fit, device, opts) <= GROW_FACTOR * opts.inlier_tol)
            .collect();
        if next.len() < opts.min_points {
            return Err(Error::Unfittable("curve explains too few points".into()));
        }
        if next == subset {
            break;
        }
        subset = next;
        fit = fit_from(&subset, device, start_of(&fit), opts)?;
    }
    Ok(fit)
}

/// Growth admits points a little farther out than the final inlier test so
/// a curve fitted to a few points near the vertex can reach along the arms.
const GROW_FACTOR: f64 = 3.0;

fn start_of(fit: &HyperbolaFit) -> HyperbolaInit {
    HyperbolaInit {
        delta0_hz: fit.delta0_hz,
        v_vertex: fit.v_vertex,
        p_z: fit.p_z,
    }
}

/// |model − bare| for one observed point.
fn distance(p: (f64, f64), fit: &HyperbolaFit, device: &DeviceParams, opts: &FitOptions) -> f64 {
    let (v, f) = p;
    let f = if opts.undress { undress(f, fit, device) } else { f };
    (hyperbola(v, fit.delta0_hz, fit.v_vertex, fit.p_z, device) - f).abs()
}

fn fit_from(points: &[(f64, f64)], device: &DeviceParams, start: HyperbolaInit, opts: &FitOptions) -> Result<HyperbolaFit> {
    let mut fit = fit_bare(points, device, Some(start), opts)?;
    if !opts.undress {
        return Ok(fit);
    }
    for _ in 0..UNDRESS_PASSES {
        let bare: Vec<(f64, f64)> = points.iter().map(|&(v, f)| (v, undress(f, &fit, device))).collect();
        fit = fit_bare(&bare, device, Some(start_of(&fit)), opts)?;
    }
    Ok(fit)
}

/// Points within `inlier_tol` of the curve, and the robust cost over them.
/// Points within `inlier_tol` of the curve, and the robust cost over them.
fn support(points: &[(f64, f64)], fit: &HyperbolaFit, device: &DeviceParams, opts: &FitOptions) -> (usize, f64) {
    let loss = Loss::Cauchy { scale: opts.loss_scale };
    let mut n = 0;
    let mut cost = 0.0;
    for &p in points {
        let r = distance(p, fit, device, opts);
        if r <= opts.inlier_tol {
            n += 1;
            cost += loss.rho(r);
        }
    }
    (n, cost)
}

fn check_counts(points: &[(f64, f64)], opts: &FitOptions) -> Result<usize> {
    if points.len() < opts.min_points {
        return Err(Error::Unfittable(format!("{} points, need {}", points.len(), opts.min_points)));
    }
    let n = distinct(points.iter().map(|p| p.0).collect());
    if n < opts.min_biases {
        return Err(Error::Unfittable(format!("{n} distinct biases, need {}", opts.min_biases)));
    }
    Ok(n)
}

fn fit_bare(
    points: &[(f64, f64)],
    device: &DeviceParams,
    init: Option<HyperbolaInit>,
    opts: &FitOptions,
) -> Result<HyperbolaFit> {
    let n_biases = check_counts(points, opts)?;
    let init = match init {
        Some(i) => i,
        None => initial_guesses(points, device)
            .into_iter()
            .next()
            .ok_or_else(|| Error::Unfittable("slope indistinguishable from zero".into()))?,
    };
    if !(init.p_z > 0.0 && init.delta0_hz > 0.0) {
        return Err(Error::Unfittable("initial guess is not physical".into()));
    }
    // Work in GHz, mV and e·Å so the parameters are of order one.
    let rate1 = model::tuning_rate(1.0, device);
    let to_mhz = |hz: f64| hz / MHZ;
    let resid = |p: &DVector<f64>| {
        DVector::from_iterator(
            points.len(),
            points.iter().map(|&(v, f)| {
                let model = (p[0] * GHZ).hypot(p[2] * rate1 * (v - p[1] * 1e-3));
                to_mhz(model - f)
            }),
        )
    };
    let jac = |p: &DVector<f64>| {
        let mut j = DMatrix::zeros(points.len(), 3);
        for (k, &(v, _)) in points.iter().enumerate() {
            let a = p[0] * GHZ;
            let x = p[2] * rate1 * (v - p[1] * 1e-3);
            let f = a.hypot(x);
            j[(k, 0)] = to_mhz(a / f * GHZ);
            j[(k, 1)] = to_mhz(-x / f * p[2] * rate1 * 1e-3);
            j[(k, 2)] = to_mhz(x / f * rate1 * (v - p[1] * 1e-3));
        }
        j
    };
    let p0 = DVector::from_vec(vec![init.delta0_hz / GHZ, init.v_vertex * 1e3, init.p_z]);
    let lm = LmOptions {
        loss: Loss::Cauchy { scale: to_mhz(opts.loss_scale) },
        max_iter: 300,
        ..LmOptions::default()
    };
    let rep = lsq::levenberg_marquardt(resid, Some(jac), p0, &lm)?;
    let p = &rep.params;
    // A negative p_z describes the same curve; fold it.
    let (delta0_hz, v_vertex, p_z) = (p[0].abs() * GHZ, p[1] * 1e-3, p[2].abs());
    if !(p_z > MIN_P_Z && delta0_hz > 0.0) || !p.iter().all(|x| x.is_finite()) {
        return Err(Error::Unfittable("fit collapsed to a degenerate curve".into()));
    }
    let scale = [GHZ, 1e-3, 1.0];
    let mut covariance = [[0.0; 3]; 3];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c = rep.covariance[(i, j)] * scale[i] * scale[j];
        }
    }
    let residual_rms = (rep.residuals.norm_squared() / points.len() as f64).sqrt() * MHZ;
    let sigma_d0 = covariance[0][0].sqrt();
    Ok(HyperbolaFit {
        delta0_hz,
        v_vertex,
        p_z,
        residual_rms,
        covariance,
        roi_id: 0,
        n_points: points.len(),
        n_biases,
        arms: [
            points.iter().filter(|p| p.0 < v_vertex).count(),
            points.iter().filter(|p| p.0 > v_vertex).count(),
        ],
        delta0_uncertain: !(sigma_d0 <= 0.5 * delta0_hz),
    })
}

/// Peels hyperbolas off a point set one at a time: fit, keep the points
/// the curve explains, refit on those alone, and continue with the rest.
/// Regions where two TLS traces touch come out as two fits.
pub fn fit_hyperbolas(points: &[(f64, f64)], device: &DeviceParams, opts: &FitOptions) -> Vec<HyperbolaFit> {
    let mut rest = points.to_vec();
    let mut out = Vec::new();
    while rest.len() >= opts.min_points {
        let Ok(fit) = fit_hyperbola(&rest, device, None, opts) else { break };
        let (inliers, outliers): (Vec<_>, Vec<_>) = rest
            .iter()
            .partition(|&&p| distance(p, &fit, device, opts) <= opts.inlier_tol);
        if inliers.len() < opts.min_points {
            break;
        }
        if let Ok(f) = fit_hyperbola(&inliers, device, Some(start_of(&fit)), opts) {
            out.push(f);
        }
        rest = outliers;
    }
    out
}

/// Physical (V, f) coordinates of ROI pixels.
pub fn roi_points(roi: &Roi, pg: &ProcessedGrid) -> Vec<(f64, f64)> {
    roi.pixels
        .iter()
        .map(|&(i, j)| (pg.biases.value(i), pg.freqs.value(j)))
        .collect()
}

/// Ridge centres inside an ROI: in each trace crossing the ROI box, every
/// local minimum of `background` that stands clear of the noise in the box,
/// refined to sub-pixel precision with a parabola through the minimum and its
/// neighbours. The mask only locates the region; it covers the walls of a
/// dip rather than its centre and drops out where the dip is shallow.
pub fn ridge_points(roi: &Roi, background: &ProcessedGrid) -> Vec<(f64, f64)> {
    let nf = background.n_freq();
    let b = roi.bbox;
    let local: Vec<f64> = (b.bias0..=b.bias1)
        .flat_map(|i| background.row(i)[b.freq0..=b.freq1].iter().copied())
        .collect();
    let (med, mad) = median_mad(&local);
    let floor = med - RIDGE_SIGMA * mad;
    let w = RIDGE_MERGE_PX;
    let mut out = Vec::new();
    for i in b.bias0..=b.bias1 {
        let row = background.row(i);
        for j in b.freq0..=b.freq1 {
            let x = row[j];
            if !(x < floor) {
                continue;
            }
            let lo = j.saturating_sub(w);
            let hi = (j + w).min(nf - 1);
            // Strict on the left so a flat-bottomed pair yields one minimum.
            if row[lo..j].iter().any(|&y| y <= x) || row[j + 1..=hi].iter().any(|&y| y < x) {
                continue;
            }
            let mut pos = j as f64;
            if j > 0 && j + 1 < nf {
                let (a, c) = (row[j - 1], row[j + 1]);
                let den = a - 2.0 * x + c;
                if den > 0.0 {
                    pos += (0.5 * (a - c) / den).clamp(-0.5, 0.5);
                }
            }
            out.push((background.biases.value(i), background.freqs.start + background.freqs.step * pos));
        }
    }
    out
}

const RIDGE_SIGMA: f64 = 4.0;
const RIDGE_MERGE_PX: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub trace: usize,
    pub bias: f64,
    pub center_f: f64,
    pub splitting: f64,
    /// Shallower of the two dips below the trace baseline, dB.
    pub depth_db: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingParams {
    pub min_split: f64,
    pub max_split: f64,
    /// Minimum depth of each dip below the baseline, dB.
    pub min_depth: f64,
    /// Minimum rise of the intervening maximum above the shallower dip, dB.
    pub min_prominence: f64,
    /// Gaussian pre-smoothing along frequency, px.
    pub smooth_px: f64,
}

impl Default for CrossingParams {
    fn default() -> Self {
        CrossingParams {
            min_split: 0.4 * MHZ,
            max_split: 4.0 * MHZ,
            min_depth: 1.0,
            min_prominence: 0.5,
            smooth_px: 1.0,
        }
    }
}

/// Double-minimum signatures in one trace. `trace_db` is measured relative
/// to its off-resonant baseline (0 dB away from any feature).
pub fn detect_crossings(trace_db: &[f64], freqs: &[f64], params: &CrossingParams) -> Vec<CrossingEvent> {
    let n = trace_db.len();
    if n < 3 || freqs.len() != n {
        return Vec::new();
    }
    let y = filters::gaussian_rows(trace_db, n, params.smooth_px);
    let minima: Vec<usize> = (1..n - 1).filter(|&k| y[k] < y[k - 1] && y[k] <= y[k + 1]).collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for w in minima.windows(2) {
        let (a, b) = (w[0], w[1]);
        let split = (freqs[b] - freqs[a]).abs();
        let (da, db) = (-y[a], -y[b]);
        if split < params.min_split || split > params.max_split || da.min(db) < params.min_depth {
            continue;
        }
        let top = y[a..=b].iter().cloned().fold(f64::MIN, f64::max);
        if top - y[a].max(y[b]) < params.min_prominence {
            continue;
        }
        pairs.push((da + db, a, b));
    }
    pairs.sort_by(|p, q| q.0.total_cmp(&p.0));
    let mut used = vec![false; n];
    let mut out = Vec::new();
    for (_, a, b) in pairs {
        if used[a] || used[b] {
            continue;
        }
        used[a] = true;
        used[b] = true;
        out.push(CrossingEvent {
            trace: 0,
            bias: 0.0,
            center_f: 0.5 * (freqs[a] + freqs[b]),
            splitting: (freqs[b] - freqs[a]).abs(),
            depth_db: (-y[a]).min(-y[b]),
        });
    }
    out.sort_by(|p, q| p.center_f.total_cmp(&q.center_f));
    out
}

/// Per-trace baseline: the median of the trace in dB.
fn baseline_corrected(row: &[f64]) -> Vec<f64> {
    let mut s = row.to_vec();
    s.sort_by(f64::total_cmp);
    let med = s[s.len() / 2];
    row.iter().map(|x| x - med).collect()
}

/// Runs crossing detection on every trace of a grid.
pub fn detect_grid_crossings(grid: &SpectrumGrid, params: &CrossingParams) -> Vec<CrossingEvent> {
    let db = grid.magnitude_db();
    let freqs = grid.freqs.values();
    let nf = grid.n_freq();
    let mut out = Vec::new();
    for (i, row) in db.chunks_exact(nf).enumerate() {
        for mut ev in detect_crossings(&baseline_corrected(row), &freqs, params) {
            ev.trace = i;
            ev.bias = grid.biases.value(i);
            out.push(ev);
        }
    }
    out
}

/// Events per trace.
pub fn crossing_rate(n_events: usize, n_traces: usize) -> Result<f64> {
    if n_traces == 0 {
        return Err(Error::Argument("no traces".into()));
    }
    Ok(n_events as f64 / n_traces as f64)
}

/// Expected fraction of traces showing a hyperbola, n·width/range. Values
/// above one are clamped and flagged: hyperbolas would then overlap.
pub fn hyperbola_occupancy(n_tls: usize, mean_width: f64, v_range: f64) -> Result<(f64, bool)> {
    if !(mean_width >= 0.0 && v_range > 0.0) {
        return Err(Error::Argument("width must be >= 0 and range > 0".into()));
    }
    let p = n_tls as f64 * (mean_width / v_range);
    Ok(if p > 1.0 { (1.0, true) } else { (p, false) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(d0: f64, vv: f64, p: f64, dev: &DeviceParams) -> Vec<(f64, f64)> {
        (0..40)
            .map(|k| {
                let v = vv - 2e-3 + k as f64 * 1e-4;
                (v, hyperbola(v, d0, vv, p, dev))
            })
            .collect()
    }

    #[test]
    fn noiseless_recovery() {
        let dev = DeviceParams::default();
        let pts = sample(4.2e9, 10e-3, 0.24, &dev);
        let opts = FitOptions { undress: false, ..FitOptions::default() };
        let fit = fit_hyperbola(&pts, &dev, None, &opts).unwrap();
        assert!((fit.delta0_hz / 4.2e9 - 1.0).abs() < 1e-6);
        assert!((fit.v_vertex / 10e-3 - 1.0).abs() < 1e-6);
        assert!((fit.p_z / 0.24 - 1.0).abs() < 1e-6, "{}", fit.p_z);
        assert!(fit.residual_rms < 1e-6 * 4.2e9);
    }

    /// TLS-like branch of the 2×2 Hamiltonian [[f_c, g], [g, ε]].
    fn dressed(eps: f64, g: f64, f_c: f64) -> f64 {
        let det = eps - f_c;
        0.5 * (f_c + eps) + det.signum() * (0.25 * det * det + g * g).sqrt()
    }

    #[test]
    fn undressing_removes_level_repulsion() {
        let dev = DeviceParams::default();
        let (d0, vv, p) = (dev.f_c - 4e6, 5e-3, 0.5);
        let pts: Vec<(f64, f64)> = sample(d0, vv, p, &dev)
            .into_iter()
            .map(|(v, eps)| (v, dressed(eps, model::coupling_g(p, &dev) * d0 / eps, dev.f_c)))
            .filter(|&(_, f)| f < dev.f_c - 2e6)
            .collect();
        assert!(pts.len() >= 10);
        let fit = fit_hyperbola(&pts, &dev, None, &FitOptions::default()).unwrap();
        assert!((fit.p_z / p - 1.0).abs() < 2e-3, "{}", fit.p_z);
        assert!((fit.delta0_hz - d0).abs() < 2e3, "{}", fit.delta0_hz - d0);
        let raw = fit_hyperbola(&pts, &dev, None, &FitOptions { undress: false, ..FitOptions::default() }).unwrap();
        assert!((raw.p_z / p - 1.0).abs() > 5.0 * (fit.p_z / p - 1.0).abs());
    }

    #[test]
    fn two_touching_curves_are_separated() {
        let dev = DeviceParams::default();
        let mut pts = sample(dev.f_c - 5e6, 6e-3, 0.5, &dev);
        pts.extend(sample(dev.f_c - 5.5e6, 7.5e-3, 0.4, &dev));
        let opts = FitOptions { undress: false, ..FitOptions::default() };
        pts.retain(|&(_, f)| f < dev.f_c - 2e6);
        let mut fits = fit_hyperbolas(&pts, &dev, &opts);
        fits.sort_by(|a, b| a.v_vertex.total_cmp(&b.v_vertex));
        assert_eq!(fits.len(), 2);
        assert!((fits[0].p_z - 0.5).abs() < 1e-4 && (fits[1].p_z - 0.4).abs() < 1e-4);
    }

    #[test]
    fn degenerate_rois() {
        let dev = DeviceParams::default();
        let col: Vec<(f64, f64)> = (0..10).map(|k| (1e-3, 4.2e9 + k as f64 * 1e4)).collect();
        assert!(matches!(fit_hyperbola(&col, &dev, None, &FitOptions::default()), Err(Error::Unfittable(_))));
        let flat: Vec<(f64, f64)> = (0..10).map(|k| (k as f64 * 1e-4, 4.2e9)).collect();
        assert!(matches!(fit_hyperbola(&flat, &dev, None, &FitOptions::default()), Err(Error::Unfittable(_))));
    }

    #[test]
    fn occupancy_and_rate() {
        assert_eq!(hyperbola_occupancy(50, 0.75e-3, 200e-3).unwrap(), (0.1875, false));
        assert_eq!(hyperbola_occupancy(0, 0.75e-3, 200e-3).unwrap().0, 0.0);
        assert_eq!(hyperbola_occupancy(1000, 0.75e-3, 200e-3).unwrap(), (1.0, true));
        assert_eq!(crossing_rate(122, 500).unwrap(), 0.244);
        assert_eq!(crossing_rate(0, 10).unwrap(), 0.0);
    }

    #[test]
    fn double_dip_detected() {
        let freqs: Vec<f64> = (0..401).map(|k| 4.194e9 + k as f64 * 3e4).collect();
        let dip = |f: f64, c: f64| -10.0 / (1.0 + ((f - c) / 1e5).powi(2));
        let trace: Vec<f64> = freqs.iter().map(|&f| dip(f, 4.1995e9) + dip(f, 4.2008e9)).collect();
        let ev = detect_crossings(&trace, &freqs, &CrossingParams::default());
        assert_eq!(ev.len(), 1);
        assert!((ev[0].splitting - 1.3e6).abs() < 0.05e6, "{}", ev[0].splitting);
        let single: Vec<f64> = freqs.iter().map(|&f| dip(f, 4.2e9)).collect();
        assert!(detect_crossings(&single, &freqs, &CrossingParams::default()).is_empty());
    }
}
