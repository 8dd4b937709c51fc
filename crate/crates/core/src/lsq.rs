//! Levenberg–Marquardt least squares with optional robust losses.
//!
//! A robust loss is handled by iteratively reweighting: at every iterate
//! the residuals get weights w = ρ'(r)/(2r), the damped normal
//! equations are solved on the weighted problem, and a step is accepted only
//! if it lowers the true robust cost.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Loss {
    Linear,
    /// Soft-L1 with the given residual scale.
    SoftL1 { scale: f64 },
    /// Cauchy (Lorentzian) loss. Redescending: far outliers stop pulling.
    Cauchy { scale: f64 },
}

impl Loss {
    pub fn rho(&self, r: f64) -> f64 {
        match *self {
            Loss::Linear => r * r,
            Loss::SoftL1 { scale } => {
                let z = (r / scale).powi(2);
                2.0 * scale * scale * ((1.0 + z).sqrt() - 1.0)
            }
            Loss::Cauchy { scale } => scale * scale * (r / scale).powi(2).ln_1p(),
        }
    }

    fn weight(&self, r: f64) -> f64 {
        match *self {
            Loss::Linear => 1.0,
            Loss::SoftL1 { scale } => 1.0 / (1.0 + (r / scale).powi(2)).sqrt(),
            Loss::Cauchy { scale } => 1.0 / (1.0 + (r / scale).powi(2)),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Relative cost decrease below which iteration stops.
    pub ftol: f64,
    /// Relative step size below which iteration stops.
    pub xtol: f64,
    pub loss: Loss,
    pub lambda0: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iter: 200,
            ftol: 1e-15,
            xtol: 1e-14,
            loss: Loss::Linear,
            lambda0: 1e-3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LmReport {
    pub params: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Robust cost Σρ(r_i).
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// s²·(JᵀWJ)⁻¹ at the solution; infinite on the diagonal if singular.
    pub covariance: DMatrix<f64>,
    pub singular: bool,
}

/// Central-difference Jacobian of `f` at `p`.
pub fn numeric_jacobian<F>(f: &F, p: &DVector<f64>, r0_len: usize) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut jac = DMatrix::zeros(r0_len, p.len());
    for k in 0..p.len() {
        let h = 1e-6 * p[k].abs().max(1e-3);
        let mut hi = p.clone();
        let mut lo = p.clone();
        hi[k] += h;
        lo[k] -= h;
        let d = (f(&hi) - f(&lo)) / (2.0 * h);
        jac.set_column(k, &d);
    }
    jac
}

fn weighted_normal(jac: &DMatrix<f64>, r: &DVector<f64>, w: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let mut jw = jac.clone();
    for (i, mut row) in jw.row_iter_mut().enumerate() {
        row *= w[i];
    }
    let jtj = jac.transpose() * &jw;
    let jtr = jw.transpose() * r;
    (jtj, jtr)
}

/// Minimises Σρ(r_i(p)). `jac` may be `None` for a numeric Jacobian.
pub fn levenberg_marquardt<F, J>(f: F, jac: Option<J>, p0: DVector<f64>, opts: &LmOptions) -> Result<LmReport>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let n = p0.len();
    let mut p = p0;
    let mut r = f(&p);
    let m = r.len();
    if m < n {
        return Err(Error::IllConditioned(format!("{m} residuals for {n} parameters")));
    }
    let jacobian = |p: &DVector<f64>| match &jac {
        Some(j) => j(p),
        None => numeric_jacobian(&f, p, m),
    };
    let cost_of = |r: &DVector<f64>| r.iter().map(|&x| opts.loss.rho(x)).sum::<f64>();
    if !r.iter().all(|x| x.is_finite()) {
        return Err(Error::IllConditioned("non-finite residuals at the initial point".into()));
    }

    let mut cost = cost_of(&r);
    let mut lambda = opts.lambda0;
    let mut converged = false;
    let mut iterations = 0;
    let mut jm = jacobian(&p);

    while iterations < opts.max_iter {
        iterations += 1;
        let w = r.map(|x| opts.loss.weight(x));
        let (jtj, jtr) = weighted_normal(&jm, &r, &w);
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&jtr))) else {
                lambda *= 10.0;
                continue;
            };
            let trial = &p + &step;
            let rt = f(&trial);
            let ct = cost_of(&rt);
            if ct.is_finite() && ct <= cost {
                let small_step = step.norm() <= opts.xtol * (p.norm() + opts.xtol);
                let small_drop = (cost - ct) <= opts.ftol * cost;
                p = trial;
                r = rt;
                cost = ct;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if small_step || small_drop || cost == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No downhill step at any damping: a stationary point.
            converged = true;
            break;
        }
        if converged {
            break;
        }
        jm = jacobian(&p);
    }

    let jm = jacobian(&p);
    let w = r.map(|x| opts.loss.weight(x));
    let (jtj, _) = weighted_normal(&jm, &r, &w);
    let dof = (m - n).max(1) as f64;
    let s2 = r.iter().zip(w.iter()).map(|(x, wi)| wi * x * x).sum::<f64>() / dof;
    let (covariance, singular) = match jtj.clone().try_inverse() {
        Some(inv) if inv.iter().all(|x| x.is_finite()) => (inv * s2, false),
        _ => (DMatrix::from_diagonal_element(n, n, f64::INFINITY), true),
    };
    Ok(LmReport {
        params: p,
        residuals: r,
        cost,
        iterations,
        converged,
        covariance,
        singular,
    })
}

/// Convenience alias for callers without an analytic Jacobian.
pub type NoJacobian = fn(&DVector<f64>) -> DMatrix<f64>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * (-1.3 * x).exp() + 0.4).collect();
        let f = |p: &DVector<f64>| DVector::from_iterator(xs.len(), xs.iter().zip(&ys).map(|(x, y)| p[0] * (-p[1] * x).exp() + p[2] - y));
        let rep = levenberg_marquardt(f, None::<NoJacobian>, DVector::from_vec(vec![1.0, 0.5, 0.0]), &LmOptions::default()).unwrap();
        assert!((rep.params[0] - 2.5).abs() < 1e-8);
        assert!((rep.params[1] - 1.3).abs() < 1e-8);
        assert!((rep.params[2] - 0.4).abs() < 1e-8);
        assert!(rep.converged);
    }

    #[test]
    fn soft_l1_resists_outliers() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let mut ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 1.0).collect();
        ys[5] += 200.0;
        ys[30] -= 300.0;
        let f = |p: &DVector<f64>| DVector::from_iterator(xs.len(), xs.iter().zip(&ys).map(|(x, y)| p[0] * x + p[1] - y));
        let lin = levenberg_marquardt(f, None::<NoJacobian>, DVector::from_vec(vec![1.0, 0.0]), &LmOptions::default()).unwrap();
        let opts = LmOptions { loss: Loss::SoftL1 { scale: 1.0 }, max_iter: 500, ..LmOptions::default() };
        let rob = levenberg_marquardt(f, None::<NoJacobian>, DVector::from_vec(vec![1.0, 0.0]), &opts).unwrap();
        assert!((rob.params[0] - 3.0).abs() < (lin.params[0] - 3.0).abs());
        assert!((rob.params[0] - 3.0).abs() < 0.05, "{}", rob.params[0]);
    }

    #[test]
    fn cauchy_ignores_far_outliers() {
        let xs: Vec<f64> = (0..20).map(f64::from).collect();
        let mut ys: Vec<f64> = xs.iter().map(|x| 0.5 * x - 2.0).collect();
        ys[3] += 1e4;
        ys[17] -= 5e3;
        let f = |p: &DVector<f64>| DVector::from_iterator(xs.len(), xs.iter().zip(&ys).map(|(x, y)| p[0] * x + p[1] - y));
        let opts = LmOptions { loss: Loss::Cauchy { scale: 0.1 }, max_iter: 500, ..LmOptions::default() };
        let rep = levenberg_marquardt(f, None::<NoJacobian>, DVector::from_vec(vec![0.4, -1.5]), &opts).unwrap();
        assert!((rep.params[0] - 0.5).abs() < 1e-6, "{}", rep.params[0]);
        assert!((rep.params[1] + 2.0).abs() < 1e-5);
    }

    #[test]
    fn covariance_matches_linear_regression() {
        // For a straight line the Gauss–Newton covariance is exact.
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let noise = [0.1, -0.2, 0.05, 0.3, -0.1, 0.0, 0.2, -0.3, 0.1, -0.05];
        let ys: Vec<f64> = xs.iter().zip(noise).map(|(x, e)| 2.0 * x - 1.0 + e).collect();
        let f = |p: &DVector<f64>| DVector::from_iterator(10, xs.iter().zip(&ys).map(|(x, y)| p[0] * x + p[1] - y));
        let rep = levenberg_marquardt(f, None::<NoJacobian>, DVector::from_vec(vec![0.0, 0.0]), &LmOptions::default()).unwrap();
        let sxx: f64 = xs.iter().map(|x| (x - 4.5).powi(2)).sum();
        let s2 = rep.residuals.norm_squared() / 8.0;
        assert!((rep.covariance[(0, 0)] / (s2 / sxx) - 1.0).abs() < 1e-6);
    }
}
