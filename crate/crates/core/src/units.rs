//! Fixed physical constants (CODATA 2018 exact / recommended values).
//!
//! Energies cross module boundaries as frequencies (E/h, in Hz). Dipole
//! moments are carried in e·Å and converted to C·m only where a field enters.

/// Planck constant, J·s.
pub const H: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = H / (2.0 * std::f64::consts::PI);
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Elementary charge, C.
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// One ångström, m.
pub const ANGSTROM: f64 = 1e-10;
/// One e·Å expressed in C·m.
pub const E_ANGSTROM: f64 = E_CHARGE * ANGSTROM;

pub const GHZ: f64 = 1e9;
pub const MHZ: f64 = 1e6;
/// Cubic micrometre in m³.
pub const UM3: f64 = 1e-18;

/// Converts a density in TLS/(μm³·GHz) to TLS/(m³·Hz).
pub fn density_to_si(per_um3_ghz: f64) -> f64 {
    per_um3_ghz / (UM3 * GHZ)
}

/// Converts a density in TLS/(m³·Hz) back to TLS/(μm³·GHz).
pub fn density_from_si(per_m3_hz: f64) -> f64 {
    per_m3_hz * UM3 * GHZ
}
