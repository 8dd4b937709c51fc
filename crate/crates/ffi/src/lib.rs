//! C ABI over the simulator and analysis chain.
//!
//! Objects cross the boundary as opaque handles created and destroyed by
//! this library. Every fallible call returns a `TlsStatus`; on failure the
//! message is kept per thread and read with `tls_last_error`. Strings
//! returned to the caller are released with `tls_string_free`. No call
//! lets a panic unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use tls_spectro::error::Error;
use tls_spectro::io::config::RunConfig;
use tls_spectro::io::gridfile::{self, GridFormat};
use tls_spectro::io::results::ResultsDoc;
use tls_spectro::io::script::ScenarioScript;
use tls_spectro::model::{self, DeviceParams};
use tls_spectro::sim::{self, SpectrumGrid, SweepConfig};
use tls_spectro::{density, ensemble, hyperbola, scenario};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TlsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Format = 4,
    Io = 5,
    Unfittable = 6,
    NoEligible = 7,
    Internal = 8,
}

/// Run configuration.
pub struct TlsConfig(RunConfig);
/// Simulated or loaded spectrum grid.
pub struct TlsGrid(SpectrumGrid);
/// Results document.
pub struct TlsResults(ResultsDoc);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TlsStatus {
    match e {
        Error::Config(_) => TlsStatus::Config,
        Error::Argument(_) | Error::BiasInsensitive | Error::DegenerateGrid(_) | Error::IllConditioned(_) | Error::Untrained => {
            TlsStatus::InvalidArgument
        }
        Error::Unfittable(_) => TlsStatus::Unfittable,
        Error::NoEligible(_) => TlsStatus::NoEligible,
        Error::Format(_) | Error::Json { .. } => TlsStatus::Format,
        Error::Io { .. } => TlsStatus::Io,
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (TlsStatus, String)>) -> TlsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TlsStatus::Ok,
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            TlsStatus::Internal
        }
    }
}

fn lib<T>(r: tls_spectro::Result<T>) -> Result<T, (TlsStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (TlsStatus, String) {
    (TlsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (TlsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (TlsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (TlsStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (TlsStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn tls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The caller owns
/// the string.
#[no_mangle]
pub extern "C" fn tls_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn tls_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default configuration. Never null.
#[no_mangle]
pub extern "C" fn tls_config_new() -> *mut TlsConfig {
    Box::into_raw(Box::new(TlsConfig(RunConfig::default())))
}

/// # Safety
/// `cfg` must be null or a handle from `tls_config_new`, freed once.
#[no_mangle]
pub unsafe extern "C" fn tls_config_free(cfg: *mut TlsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Sets one dotted key (`sweep.v_stop`) to a JSON scalar or bare string.
/// The configuration is unchanged on failure.
///
/// # Safety
/// `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn tls_config_set(cfg: *mut TlsConfig, key: *const c_char, value: *const c_char) -> TlsStatus {
    guard(|| {
        let cfg = out_arg(cfg, "cfg")?;
        let pair = format!("{}={}", str_arg(key, "key")?, str_arg(value, "value")?);
        cfg.0 = lib(cfg.0.with_overrides(&[pair]))?;
        Ok(())
    })
}

/// Merges a JSON or key=value file over the configuration.
///
/// # Safety
/// `cfg` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tls_config_load(cfg: *mut TlsConfig, path: *const c_char) -> TlsStatus {
    guard(|| {
        let cfg = out_arg(cfg, "cfg")?;
        cfg.0 = lib(cfg.0.merged_with_file(Path::new(str_arg(path, "path")?)))?;
        Ok(())
    })
}

/// Effective configuration as JSON, owned by the caller.
///
/// # Safety
/// `cfg` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tls_config_json(cfg: *const TlsConfig, out: *mut *mut c_char) -> TlsStatus {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        let out = out_arg(out, "out")?;
        *out = into_c_string(serde_json::to_string_pretty(&cfg.0).expect("config serializes"));
        Ok(())
    })
}

/// Samples the configured ensemble and records one sweep.
///
/// # Safety
/// `cfg` must be a live handle; `out` writable. On success `*out` is a new
/// grid handle.
#[no_mangle]
pub unsafe extern "C" fn tls_simulate(cfg: *const TlsConfig, out: *mut *mut TlsGrid) -> TlsStatus {
    guard(|| {
        let cfg = &handle(cfg, "cfg")?.0;
        let out = out_arg(out, "out")?;
        let mut ens = lib(ensemble::sample_ensemble(&cfg.sweep_ensemble(), &cfg.device))?;
        ens.jitter = cfg.jitter;
        let sweep = SweepConfig {
            seed: scenario::sweep_seed(cfg.seed, 0),
            ..cfg.sweep.clone()
        };
        let grid = lib(sim::voltage_sweep(&cfg.device, &mut ens, &sweep))?;
        *out = Box::into_raw(Box::new(TlsGrid(grid)));
        Ok(())
    })
}

/// # Safety
/// `path` a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tls_grid_read(path: *const c_char, out: *mut *mut TlsGrid) -> TlsStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let grid = lib(gridfile::read_grid(Path::new(path)))?;
        *out = Box::into_raw(Box::new(TlsGrid(grid)));
        Ok(())
    })
}

/// Writes the grid in the binary encoding when `binary` is nonzero, text
/// otherwise.
///
/// # Safety
/// `grid` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tls_grid_write(grid: *const TlsGrid, path: *const c_char, binary: i32) -> TlsStatus {
    guard(|| {
        let grid = handle(grid, "grid")?;
        let format = if binary != 0 { GridFormat::Binary } else { GridFormat::Text };
        lib(gridfile::write_grid(&grid.0, Path::new(str_arg(path, "path")?), format))
    })
}

/// # Safety
/// `grid` must be a live handle; the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn tls_grid_dims(grid: *const TlsGrid, n_bias: *mut usize, n_freq: *mut usize) -> TlsStatus {
    guard(|| {
        let grid = handle(grid, "grid")?;
        *out_arg(n_bias, "n_bias")? = grid.0.n_bias();
        *out_arg(n_freq, "n_freq")? = grid.0.n_freq();
        Ok(())
    })
}

/// Copies |S21| in dB, row-major [bias][freq], into `buf` of `len` values.
///
/// # Safety
/// `grid` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tls_grid_magnitude_db(grid: *const TlsGrid, buf: *mut f64, len: usize) -> TlsStatus {
    guard(|| {
        let grid = handle(grid, "grid")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let db = grid.0.magnitude_db();
        if len != db.len() {
            return Err((TlsStatus::InvalidArgument, format!("buffer holds {len} values, grid has {}", db.len())));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(&db);
        Ok(())
    })
}

/// # Safety
/// `grid` must be null or a grid handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn tls_grid_free(grid: *mut TlsGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Full analysis of one grid with the configured parameters. The grid's own
/// device parameters are used.
///
/// # Safety
/// `grid` and `cfg` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tls_analyze(grid: *const TlsGrid, cfg: *const TlsConfig, out: *mut *mut TlsResults) -> TlsStatus {
    guard(|| {
        let grid = handle(grid, "grid")?;
        let mut cfg = handle(cfg, "cfg")?.0.clone();
        let out = out_arg(out, "out")?;
        cfg.device = grid.0.meta.device;
        let doc = lib(scenario::analyze_grid(&grid.0, &cfg, "grid"))?;
        *out = Box::into_raw(Box::new(TlsResults(doc)));
        Ok(())
    })
}

/// Runs a treatment script: a built-in name or a script file path.
///
/// # Safety
/// `script` a NUL-terminated string; `cfg` a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tls_scenario_run(script: *const c_char, cfg: *const TlsConfig, out: *mut *mut TlsResults) -> TlsStatus {
    guard(|| {
        let name = str_arg(script, "script")?;
        let cfg = &handle(cfg, "cfg")?.0;
        let out = out_arg(out, "out")?;
        let s = match ScenarioScript::builtin(name) {
            Some(s) => s,
            None => lib(ScenarioScript::load(Path::new(name)))?,
        };
        let doc = lib(scenario::run_scenario(&s, cfg))?;
        *out = Box::into_raw(Box::new(TlsResults(doc)));
        Ok(())
    })
}

/// # Safety
/// `res` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tls_results_row_count(res: *const TlsResults, out: *mut usize) -> TlsStatus {
    guard(|| {
        *out_arg(out, "out")? = handle(res, "res")?.0.rows.len();
        Ok(())
    })
}

/// Density of row `row` in TLS/(μm³·GHz) with its one-sigma uncertainty,
/// and the number of fitted hyperbolas in that row.
///
/// # Safety
/// `res` must be a live handle; the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn tls_results_row(
    res: *const TlsResults,
    row: usize,
    rho: *mut f64,
    sigma_rho: *mut f64,
    n_fits: *mut usize,
) -> TlsStatus {
    guard(|| {
        let doc = &handle(res, "res")?.0;
        let r = doc
            .rows
            .get(row)
            .ok_or_else(|| (TlsStatus::InvalidArgument, format!("row {row} of {}", doc.rows.len())))?;
        *out_arg(rho, "rho")? = r.density.value;
        *out_arg(sigma_rho, "sigma_rho")? = r.density.sigma;
        *out_arg(n_fits, "n_fits")? = r.n_fits;
        Ok(())
    })
}

/// The results document as JSON, owned by the caller.
///
/// # Safety
/// `res` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tls_results_json(res: *const TlsResults, out: *mut *mut c_char) -> TlsStatus {
    guard(|| {
        let doc = handle(res, "res")?;
        *out_arg(out, "out")? = into_c_string(doc.0.to_json());
        Ok(())
    })
}

/// # Safety
/// `res` must be null or a results handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn tls_results_free(res: *mut TlsResults) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Degenerate splitting 2g in Hz for dipole `p_z` (e·Å) on the default device.
///
/// # Safety
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tls_splitting_hz(p_z: f64, out: *mut f64) -> TlsStatus {
    guard(|| {
        if p_z.is_nan() || p_z < 0.0 {
            return Err((TlsStatus::InvalidArgument, "p_z must be >= 0".into()));
        }
        *out_arg(out, "out")? = model::splitting(p_z, &DeviceParams::default());
        Ok(())
    })
}

/// Low-power loss tangent for density `rho` (TLS/(μm³·GHz)) and mean
/// squared dipole `mean_pz_sq` ((e·Å)²) on the default device.
///
/// # Safety
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tls_loss_from_density(rho: f64, mean_pz_sq: f64, out: *mut f64) -> TlsStatus {
    guard(|| {
        *out_arg(out, "out")? = lib(density::loss_from_density(rho, mean_pz_sq, &DeviceParams::default()))?;
        Ok(())
    })
}

/// Expected traces showing a hyperbola; `clamped` is set to 1 when the
/// estimate exceeded one.
///
/// # Safety
/// The outputs writable.
#[no_mangle]
pub unsafe extern "C" fn tls_hyperbola_occupancy(n_tls: usize, mean_width_v: f64, v_range_v: f64, out: *mut f64, clamped: *mut i32) -> TlsStatus {
    guard(|| {
        let (p, c) = lib(hyperbola::hyperbola_occupancy(n_tls, mean_width_v, v_range_v))?;
        *out_arg(out, "out")? = p;
        *out_arg(clamped, "clamped")? = i32::from(c);
        Ok(())
    })
}
