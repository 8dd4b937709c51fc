//! Power-dependent TLS loss: the saturation law, its inverse fit and the
//! relaxation-time estimate from the critical photon number.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::{self, LmOptions, NoJacobian};

/// Parameters of tanδ(n̄) = tan0/sqrt(1 + n̄/n_c) + tan_e.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossParams {
    pub tan0: f64,
    pub n_c: f64,
    pub tan_e: f64,
}

impl LossParams {
    pub fn loss_tangent(&self, n_photon: f64) -> f64 {
        saturated_loss(n_photon, self)
    }
}

pub fn saturated_loss(n_photon: f64, p: &LossParams) -> f64 {
    p.tan0 / (1.0 + n_photon / p.n_c).sqrt() + p.tan_e
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub n_photon: Vec<f64>,
    pub tan_delta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossFit {
    pub tan0_tls: f64,
    pub n_c: f64,
    pub tan_e: f64,
    /// Covariance of (tan0_tls, n_c, tan_e).
    pub covariance: [[f64; 3]; 3],
    /// rms of the relative residuals.
    pub residual: f64,
    /// Set when the data span fewer than two decades of n̄; the covariance is
    /// then inflated by (2/decades)².
    pub ill_conditioned: bool,
    pub converged: bool,
}

impl LossFit {
    pub fn params(&self) -> LossParams {
        LossParams {
            tan0: self.tan0_tls,
            n_c: self.n_c,
            tan_e: self.tan_e,
        }
    }

    pub fn sigma(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.covariance[i][i].sqrt())
    }
}

/// n̄ where the curve crosses the midpoint between its extremes, interpolated
/// in log n̄.
fn half_drop(curve: &LossCurve) -> f64 {
    let hi = curve.tan_delta.iter().cloned().fold(f64::MIN, f64::max);
    let lo = curve.tan_delta.iter().cloned().fold(f64::MAX, f64::min);
    let mid = 0.5 * (hi + lo);
    for w in 0..curve.n_photon.len() - 1 {
        let (y0, y1) = (curve.tan_delta[w], curve.tan_delta[w + 1]);
        if (y0 - mid) * (y1 - mid) <= 0.0 && y0 != y1 {
            let t = (mid - y0) / (y1 - y0);
            let (l0, l1) = (curve.n_photon[w].ln(), curve.n_photon[w + 1].ln());
            return (l0 + t * (l1 - l0)).exp();
        }
    }
    (curve.n_photon[0] * curve.n_photon[curve.n_photon.len() - 1]).sqrt()
}

/// Least-squares fit of the saturation law using relative residuals, which
/// weights every decade of n̄ alike.
pub fn fit_loss_curve(curve: &LossCurve) -> Result<LossFit> {
    let n = curve.n_photon.len();
    if n != curve.tan_delta.len() {
        return Err(Error::Argument("n_photon and tan_delta lengths differ".into()));
    }
    if n < 5 {
        return Err(Error::IllConditioned(format!("{n} points; at least 5 are needed")));
    }
    if curve.n_photon.iter().any(|&x| !(x > 0.0 && x.is_finite()))
        || curve.tan_delta.iter().any(|&y| !(y > 0.0 && y.is_finite()))
    {
        return Err(Error::Argument("photon numbers and loss tangents must be positive and finite".into()));
    }
    if curve.n_photon.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("photon numbers must be strictly ascending".into()));
    }
    let decades = (curve.n_photon[n - 1] / curve.n_photon[0]).log10();

    let hi = curve.tan_delta.iter().cloned().fold(f64::MIN, f64::max);
    let lo = curve.tan_delta.iter().cloned().fold(f64::MAX, f64::min);
    let p0 = DVector::from_vec(vec![(hi - lo).max(1e-3 * hi), half_drop(curve).ln(), lo]);

    let xs = &curve.n_photon;
    let ys = &curve.tan_delta;
    let resid = |p: &DVector<f64>| {
        let params = LossParams {
            tan0: p[0],
            n_c: p[1].exp(),
            tan_e: p[2],
        };
        DVector::from_iterator(n, xs.iter().zip(ys).map(|(&x, &y)| saturated_loss(x, &params) / y - 1.0))
    };
    let rep = lsq::levenberg_marquardt(resid, None::<NoJacobian>, p0, &LmOptions { max_iter: 500, ..LmOptions::default() })?;
    let p = &rep.params;
    let n_c = p[1].exp();
    if !(p[0] >= 0.0 && p[2] >= 0.0) {
        return Err(Error::IllConditioned(format!("fit left the physical region: tan0 {}, tan_e {}", p[0], p[2])));
    }
    // Map the ln n_c column of the covariance to n_c.
    let scale = [1.0, n_c, 1.0];
    let inflate = if decades < 2.0 { (2.0 / decades.max(1e-3)).powi(2) } else { 1.0 };
    let mut covariance = [[0.0; 3]; 3];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c = rep.covariance[(i, j)] * scale[i] * scale[j] * inflate;
        }
    }
    Ok(LossFit {
        tan0_tls: p[0],
        n_c,
        tan_e: p[2],
        covariance,
        residual: (rep.residuals.norm_squared() / n as f64).sqrt(),
        ill_conditioned: decades < 2.0,
        converged: rep.converged,
    })
}

/// T1 from the critical photon number, assuming n_c = 1/(4g²T1T2) with
/// T2 = 2T1 and g the angular coupling 2π·g_hz.
pub fn t1_from_nc(n_c: f64, g_hz: f64) -> Result<f64> {
    if !(n_c > 0.0 && g_hz > 0.0) {
        return Err(Error::Argument("n_c and g must be > 0".into()));
    }
    Ok(1.0 / (2.0 * PI * g_hz * (8.0 * n_c).sqrt()))
}
