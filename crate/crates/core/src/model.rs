//! Closed-form physics of the standard tunneling model and the TLS–resonator
//! coupling. Every function here is pure.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{E_ANGSTROM, EPS0, H, HBAR};

/// Geometry, dielectric and resonator parameters of the biased LC oscillator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    /// Dielectric thickness, m.
    pub d0: f64,
    /// Plate area of a single capacitor, m².
    pub cap_area: f64,
    /// Total oxide volume, m³.
    pub v_total: f64,
    /// Relative permittivity of the oxide.
    pub eps_r: f64,
    /// Bare resonator frequency, Hz.
    pub f_c: f64,
    /// Coupling quality factor.
    pub q_c: f64,
    /// Internal quality factor excluding the strongly coupled TLSs.
    pub q_i0: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            d0: 49e-9,
            cap_area: 5.3e-6 * 5.3e-6,
            v_total: 5.6e-18,
            eps_r: 10.0,
            // Inverts the rms-field relation at 53 V/m.
            f_c: 4.2e9,
            q_c: 6500.0,
            q_i0: 1.0e5,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.d0 > 0.0, "d0 must be > 0"),
            (self.cap_area > 0.0, "cap_area must be > 0"),
            (self.v_total > 0.0, "v_total must be > 0"),
            (self.eps_r >= 1.0, "eps_r must be >= 1"),
            (self.f_c > 0.0, "f_c must be > 0"),
            (self.q_c > 0.0, "q_c must be > 0"),
            (self.q_i0 > 0.0, "q_i0 must be > 0"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Config(format!("device: {msg}")));
            }
        }
        Ok(())
    }

    /// Absolute permittivity ε = ε_r ε0.
    pub fn permittivity(&self) -> f64 {
        self.eps_r * EPS0
    }

    pub fn omega_c(&self) -> f64 {
        2.0 * PI * self.f_c
    }

    /// Loaded quality factor, 1/Q_l = 1/Q_c + 1/Q_i0.
    pub fn q_loaded(&self) -> f64 {
        1.0 / (1.0 / self.q_c + 1.0 / self.q_i0)
    }

    /// Full resonator linewidth f_c/Q_l, Hz.
    pub fn linewidth(&self) -> f64 {
        self.f_c / self.q_loaded()
    }
}

/// Static tunneling parameters of one defect.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TlsParams {
    /// Tunneling energy Δ0/h, Hz.
    pub delta0: f64,
    /// Asymmetry energy at zero bias Δ/h, Hz (signed).
    pub delta: f64,
    /// Dipole projection on the bias field, e·Å, stored non-negative.
    pub p_z: f64,
    /// Full linewidth, Hz.
    pub gamma: f64,
}

impl TlsParams {
    /// Builds a TLS, folding a negative dipole sign into the asymmetry.
    pub fn new(delta0: f64, delta: f64, p_z: f64, gamma: f64) -> Self {
        let (delta, p_z) = if p_z < 0.0 { (-delta, -p_z) } else { (delta, p_z) };
        TlsParams {
            delta0,
            delta,
            p_z,
            gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta0 > 0.0) {
            return Err(Error::Argument("TLS delta0 must be > 0".into()));
        }
        if !(self.p_z >= 0.0) {
            return Err(Error::Argument("TLS p_z must be stored >= 0".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Argument("TLS gamma must be > 0".into()));
        }
        Ok(())
    }

    /// Bias-shifted asymmetry (Δ − 2 p·E_g)/h, Hz.
    pub fn asymmetry_at(&self, e_g: f64) -> f64 {
        self.delta - 2.0 * self.p_z * E_ANGSTROM * e_g / H
    }

    /// Gate voltage at which the hyperbola has its vertex.
    pub fn vertex_bias(&self, device: &DeviceParams) -> Option<f64> {
        (self.p_z > 0.0).then(|| self.delta / tuning_rate(self.p_z, device))
    }
}

/// Field across each capacitor of the bias bridge, E_g = V_g / (2 d0).
pub fn gate_field(v_g: f64, device: &DeviceParams) -> f64 {
    v_g / (2.0 * device.d0)
}

/// Rate at which the asymmetry moves with gate voltage, p_z/(d0 h) in Hz/V.
pub fn tuning_rate(p_z: f64, device: &DeviceParams) -> f64 {
    p_z * E_ANGSTROM / (device.d0 * H)
}

/// TLS transition frequency ε/h = sqrt(Δ0² + (Δ − 2 p_z E_g)²)/h.
pub fn tls_frequency(tls: &TlsParams, e_g: f64) -> f64 {
    tls.delta0.hypot(tls.asymmetry_at(e_g))
}

/// Zero-point rms field in the capacitors, sqrt(ħ ω_c / (2 ε V_T)).
pub fn rms_field(device: &DeviceParams) -> f64 {
    (HBAR * device.omega_c() / (2.0 * device.permittivity() * device.v_total)).sqrt()
}

/// TLS–oscillator coupling g/2π in Hz, g = p_z E_rms / ħ.
pub fn coupling_g(p_z: f64, device: &DeviceParams) -> f64 {
    p_z * E_ANGSTROM * rms_field(device) / HBAR / (2.0 * PI)
}

/// Width of the degenerate avoided crossing, 2·(g/2π), Hz.
pub fn splitting(p_z: f64, device: &DeviceParams) -> f64 {
    2.0 * coupling_g(p_z, device)
}

/// Transverse coupling (g/2π)·Δ0/ε at the given field. Equals `coupling_g`
/// at the vertex and falls off along the arms.
pub fn effective_coupling(tls: &TlsParams, e_g: f64, device: &DeviceParams) -> f64 {
    let eps = tls_frequency(tls, e_g);
    if eps == 0.0 {
        return 0.0;
    }
    coupling_g(tls.p_z, device) * tls.delta0 / eps
}

/// All gate voltages where the TLS frequency equals `f_target`, ascending.
pub fn resonance_biases(tls: &TlsParams, f_target: f64, device: &DeviceParams) -> Result<Vec<f64>> {
    if !(f_target > 0.0) {
        return Err(Error::Argument("f_target must be > 0".into()));
    }
    if tls.p_z == 0.0 {
        return Err(Error::BiasInsensitive);
    }
    let rate = tuning_rate(tls.p_z, device);
    let disc = f_target * f_target - tls.delta0 * tls.delta0;
    if disc < 0.0 {
        return Ok(Vec::new());
    }
    if disc == 0.0 {
        return Ok(vec![tls.delta / rate]);
    }
    let s = disc.sqrt();
    Ok(vec![(tls.delta - s) / rate, (tls.delta + s) / rate])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{GHZ, MHZ};
    use proptest::prelude::*;

    fn dev() -> DeviceParams {
        DeviceParams::default()
    }

    #[test]
    fn gate_field_values() {
        assert_eq!(gate_field(0.0, &dev()), 0.0);
        let e = gate_field(9.4e-3, &dev());
        assert!((e / 9.59e4 - 1.0).abs() < 1e-3, "{e}");
        let e = gate_field(10.0, &dev());
        assert!((e / 1.02e8 - 1.0).abs() < 1e-3, "{e}");
        assert_eq!(gate_field(-10.0, &dev()), -e);
    }

    #[test]
    fn tls_frequency_limits() {
        let t = TlsParams::new(4.0 * GHZ, 0.0, 0.5, 1e5);
        assert_eq!(tls_frequency(&t, 0.0), 4.0 * GHZ);
        let t = TlsParams::new(1e-6, 1.0 * GHZ, 0.5, 1e5);
        assert!((tls_frequency(&t, 0.0) - 1.0 * GHZ).abs() < 1.0);
        let t = TlsParams::new(4.0 * GHZ, 0.0, 0.5, 1e5);
        let f = tls_frequency(&t, gate_field(5.19e-3, &dev()));
        assert!((f / (4.2 * GHZ) - 1.0).abs() < 2e-4, "{f}");
    }

    #[test]
    fn negative_dipole_is_folded() {
        let a = TlsParams::new(4.0 * GHZ, 1.0 * GHZ, -0.3, 1e5);
        assert_eq!(a.p_z, 0.3);
        assert_eq!(a.delta, -GHZ);
        let b = TlsParams::new(4.0 * GHZ, -GHZ, 0.3, 1e5);
        let e = gate_field(3e-3, &dev());
        assert_eq!(tls_frequency(&a, e), tls_frequency(&b, e));
    }

    #[test]
    fn rms_field_scaling() {
        let d = dev();
        let e = rms_field(&d);
        assert!((e - 53.0).abs() < 2.0, "{e}");
        let d4 = DeviceParams { v_total: 4.0 * d.v_total, ..d };
        assert!((rms_field(&d4) / e - 0.5).abs() < 1e-12);
        let d78 = DeviceParams { v_total: 78e-18, ..d };
        let ratio = e / rms_field(&d78);
        assert!((ratio - (78.0f64 / 5.6).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn coupling_values() {
        let d = dev();
        assert_eq!(coupling_g(0.0, &d), 0.0);
        let s = splitting(0.5, &d);
        assert!((s - 1.3 * MHZ).abs() < 0.1 * MHZ, "{s}");
        assert!((coupling_g(1.0, &d) / coupling_g(0.5, &d) - 2.0).abs() < 1e-12);
        let direct = 0.5 * E_ANGSTROM * rms_field(&d) / HBAR / (2.0 * PI);
        assert_eq!(coupling_g(0.5, &d), direct);
    }

    #[test]
    fn effective_coupling_values() {
        let d = dev();
        let g = coupling_g(0.5, &d);
        let t = TlsParams::new(4.0 * GHZ, 1.0 * GHZ, 0.5, 1e5);
        let v = t.vertex_bias(&d).unwrap();
        let at_vertex = effective_coupling(&t, gate_field(v, &d), &d);
        assert!((at_vertex / g - 1.0).abs() < 1e-12);
        // Δ0 = 2.1 GHz with ε = 4.2 GHz halves the coupling.
        let t = TlsParams::new(2.1 * GHZ, (4.2f64.powi(2) - 2.1f64.powi(2)).sqrt() * GHZ, 0.5, 1e5);
        assert!((effective_coupling(&t, 0.0, &d) / g - 0.5).abs() < 1e-12);
        let t = TlsParams::new(1e-3, 1.0 * GHZ, 0.5, 1e5);
        assert!(effective_coupling(&t, 0.0, &d) < 1e-6);
    }

    #[test]
    fn resonance_bias_cases() {
        let d = dev();
        let t = TlsParams::new(4.2 * GHZ, 0.0, 0.5, 1e5);
        assert_eq!(resonance_biases(&t, 4.2 * GHZ, &d).unwrap(), vec![0.0]);
        let t = TlsParams::new(4.0 * GHZ, 0.0, 0.5, 1e5);
        let v = resonance_biases(&t, 4.2 * GHZ, &d).unwrap();
        assert_eq!(v.len(), 2);
        assert!((v[0] + 5.19e-3).abs() < 0.01e-3 && (v[1] - 5.19e-3).abs() < 0.01e-3, "{v:?}");
        let t = TlsParams::new(5.0 * GHZ, 0.0, 0.5, 1e5);
        assert!(resonance_biases(&t, 4.2 * GHZ, &d).unwrap().is_empty());
        let t = TlsParams::new(4.0 * GHZ, 0.0, 0.0, 1e5);
        assert!(matches!(resonance_biases(&t, 4.2 * GHZ, &d), Err(Error::BiasInsensitive)));
        assert!(resonance_biases(&t, -1.0, &d).is_err());
    }

    /// Bisection on Eq. 1 along the positive arm, independent of the
    /// closed-form inversion.
    #[test]
    fn resonance_bias_matches_bisection() {
        let d = dev();
        let t = TlsParams::new(4.0 * GHZ, 0.0, 0.5, 1e5);
        let (mut lo, mut hi) = (0.0, 0.1);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if tls_frequency(&t, gate_field(mid, &d)) < 4.2 * GHZ {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let v = resonance_biases(&t, 4.2 * GHZ, &d).unwrap();
        assert!((v[1] - lo).abs() < 1e-12, "{} vs {lo}", v[1]);
    }

    proptest! {
        #[test]
        fn frequency_bounded_below(
            d0 in 0.1f64..8.0, delta in -20.0f64..20.0, p in 0.0f64..1.5, v in -0.05f64..0.05
        ) {
            let t = TlsParams::new(d0 * GHZ, delta * GHZ, p, 1e5);
            let e = gate_field(v, &dev());
            let f = tls_frequency(&t, e);
            prop_assert!(f >= t.delta0);
            prop_assert!(f >= t.asymmetry_at(e).abs());
        }

        #[test]
        fn frequency_even_about_vertex(
            d0 in 0.1f64..8.0, delta in -20.0f64..20.0, p in 0.05f64..1.5, dv in 0.0f64..0.02
        ) {
            let d = dev();
            let t = TlsParams::new(d0 * GHZ, delta * GHZ, p, 1e5);
            let v0 = t.vertex_bias(&d).unwrap();
            let up = tls_frequency(&t, gate_field(v0 + dv, &d));
            let down = tls_frequency(&t, gate_field(v0 - dv, &d));
            prop_assert!((up - down).abs() <= 1e-9 * up);
            let at = tls_frequency(&t, gate_field(v0, &d));
            prop_assert!((at - t.delta0).abs() <= 1e-9 * t.delta0);
        }

        #[test]
        fn resonance_biases_round_trip(
            d0 in 0.5f64..4.19, delta in -10.0f64..10.0, p in 0.05f64..1.0
        ) {
            let d = dev();
            let t = TlsParams::new(d0 * GHZ, delta * GHZ, p, 1e5);
            let f = 4.2 * GHZ;
            for v in resonance_biases(&t, f, &d).unwrap() {
                let got = tls_frequency(&t, gate_field(v, &d));
                prop_assert!((got / f - 1.0).abs() < 1e-9);
            }
        }
    }
}
