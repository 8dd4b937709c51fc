//! Quality-factor extraction from a single notch-type trace, used to check
//! that the forward model's bare internal loss is what was configured.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lsq::{self, LmOptions, NoJacobian};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NotchFit {
    pub f_r: f64,
    pub q_l: f64,
    pub q_c: f64,
    pub q_i: f64,
}

impl NotchFit {
    /// Internal loss tangent 1/Q_i.
    pub fn tan_delta(&self) -> f64 {
        1.0 / self.q_i
    }
}

/// Fits S21 = 1 − (Q_l/Q_c)/(1 + 2iQ_l(f − f_r)/f_r) to complex data.
pub fn fit_notch(freqs: &[f64], s21: &[Complex64]) -> Result<NotchFit> {
    if freqs.len() != s21.len() || freqs.len() < 5 {
        return Err(Error::Argument("notch fit needs at least 5 matching samples".into()));
    }
    let (imin, zmin) = s21
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .expect("non-empty");
    let f0 = freqs[imin];
    let depth = 1.0 - zmin.norm();
    if !(depth > 0.0) {
        return Err(Error::Unfittable("trace has no resonance dip".into()));
    }
    let half = 0.5 * depth * depth;
    let above: Vec<f64> = freqs
        .iter()
        .zip(s21)
        .filter(|(_, z)| (Complex64::new(1.0, 0.0) - **z).norm_sqr() >= half)
        .map(|(f, _)| *f)
        .collect();
    let width = (above.last().unwrap_or(&f0) - above.first().unwrap_or(&f0)).max(freqs[1] - freqs[0]);
    let q_l0 = f0 / width;
    let q_c0 = q_l0 / depth;
    let scale = freqs[1] - freqs[0];

    let m = freqs.len();
    let resid = |p: &DVector<f64>| {
        let q_l = p[0].exp();
        let q_c = p[1].exp();
        let f_r = f0 + p[2] * scale;
        let mut r = DVector::zeros(2 * m);
        for (k, (&f, z)) in freqs.iter().zip(s21).enumerate() {
            let model = Complex64::new(1.0, 0.0) - (q_l / q_c) / Complex64::new(1.0, 2.0 * q_l * (f - f_r) / f_r);
            let d = model - z;
            r[2 * k] = d.re;
            r[2 * k + 1] = d.im;
        }
        r
    };
    let p0 = DVector::from_vec(vec![q_l0.ln(), q_c0.ln(), 0.0]);
    let rep = lsq::levenberg_marquardt(resid, None::<NoJacobian>, p0, &LmOptions { max_iter: 500, ..LmOptions::default() })?;
    let q_l = rep.params[0].exp();
    let q_c = rep.params[1].exp();
    let inv_qi = 1.0 / q_l - 1.0 / q_c;
    if !(inv_qi > 0.0) {
        return Err(Error::Unfittable("fitted Q_c <= Q_l".into()));
    }
    Ok(NotchFit {
        f_r: f0 + rep.params[2] * scale,
        q_l,
        q_c,
        q_i: 1.0 / inv_qi,
    })
}
