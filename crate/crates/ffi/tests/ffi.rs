use std::ffi::{CStr, CString};
use std::ptr;

use tls_spectro_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = tls_last_error();
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string();
    unsafe { tls_string_free(p) };
    s
}

/// Small, fast sweep.
fn small_config() -> *mut TlsConfig {
    let cfg = tls_config_new();
    for (k, v) in [("seed", "11"), ("sweep.v_stop", "0.01"), ("sweep.f_points", "201")] {
        assert_eq!(unsafe { tls_config_set(cfg, c(k).as_ptr(), c(v).as_ptr()) }, TlsStatus::Ok, "{k}");
    }
    cfg
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(tls_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_arguments_are_reported_not_dereferenced() {
    let mut out = 0.0;
    assert_eq!(unsafe { tls_splitting_hz(0.5, ptr::null_mut()) }, TlsStatus::NullPointer);
    assert!(last_error().contains("out"));
    assert_eq!(unsafe { tls_config_set(ptr::null_mut(), c("seed").as_ptr(), c("1").as_ptr()) }, TlsStatus::NullPointer);
    assert_eq!(unsafe { tls_analyze(ptr::null(), ptr::null(), ptr::null_mut()) }, TlsStatus::NullPointer);
    assert_eq!(unsafe { tls_loss_from_density(-1.0, 1.0, &mut out) }, TlsStatus::InvalidArgument);
    unsafe {
        tls_config_free(ptr::null_mut());
        tls_grid_free(ptr::null_mut());
        tls_results_free(ptr::null_mut());
        tls_string_free(ptr::null_mut());
    }
}

#[test]
fn bad_config_keys_leave_the_config_unchanged() {
    let cfg = tls_config_new();
    assert_eq!(unsafe { tls_config_set(cfg, c("sweep.nope").as_ptr(), c("1").as_ptr()) }, TlsStatus::Config);
    assert!(last_error().contains("nope"));
    assert_eq!(unsafe { tls_config_set(cfg, c("seed").as_ptr(), c("\"x\"").as_ptr()) }, TlsStatus::Config);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { tls_config_json(cfg, &mut json) }, TlsStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_string();
    unsafe { tls_string_free(json) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["seed"], 0);
    unsafe { tls_config_free(cfg) };
}

#[test]
fn pure_functions_match_the_library() {
    let mut s = 0.0;
    assert_eq!(unsafe { tls_splitting_hz(0.5, &mut s) }, TlsStatus::Ok);
    // 2g/2π for a 0.5 eÅ dipole is about 1.28 MHz on the default device.
    assert!((s / 1.2810e6 - 1.0).abs() < 2e-3, "{s}");
    let (mut p, mut clamped) = (0.0, 0);
    assert_eq!(unsafe { tls_hyperbola_occupancy(3, 0.008, 0.02, &mut p, &mut clamped) }, TlsStatus::Ok);
    assert!((p - 0.75).abs() < 1e-9 || clamped == 1);
    assert_eq!(unsafe { tls_hyperbola_occupancy(100, 0.01, 0.02, &mut p, &mut clamped) }, TlsStatus::Ok);
    assert_eq!((p, clamped), (1.0, 1));
}

#[test]
fn simulate_write_read_analyze() {
    let cfg = small_config();
    let mut grid = ptr::null_mut();
    assert_eq!(unsafe { tls_simulate(cfg, &mut grid) }, TlsStatus::Ok, "{}", last_error());
    let (mut nb, mut nf) = (0usize, 0usize);
    assert_eq!(unsafe { tls_grid_dims(grid, &mut nb, &mut nf) }, TlsStatus::Ok);
    assert_eq!((nb, nf), (100, 201));
    let mut db = vec![0.0; nb * nf];
    assert_eq!(unsafe { tls_grid_magnitude_db(grid, db.as_mut_ptr(), db.len()) }, TlsStatus::Ok);
    assert!(db.iter().all(|x| x.is_finite() && *x <= 1.0));
    assert_eq!(unsafe { tls_grid_magnitude_db(grid, db.as_mut_ptr(), 3) }, TlsStatus::InvalidArgument);

    let dir = tempfile::tempdir().unwrap();
    let path = c(dir.path().join("g.bin").to_str().unwrap());
    assert_eq!(unsafe { tls_grid_write(grid, path.as_ptr(), 1) }, TlsStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { tls_grid_read(path.as_ptr(), &mut back) }, TlsStatus::Ok);
    let mut db2 = vec![0.0; nb * nf];
    assert_eq!(unsafe { tls_grid_magnitude_db(back, db2.as_mut_ptr(), db2.len()) }, TlsStatus::Ok);
    assert_eq!(db, db2);

    let mut res = ptr::null_mut();
    assert_eq!(unsafe { tls_analyze(back, cfg, &mut res) }, TlsStatus::Ok, "{}", last_error());
    let mut rows = 0;
    assert_eq!(unsafe { tls_results_row_count(res, &mut rows) }, TlsStatus::Ok);
    assert_eq!(rows, 1);
    let (mut rho, mut sigma, mut n) = (0.0, 0.0, 0usize);
    assert_eq!(unsafe { tls_results_row(res, 0, &mut rho, &mut sigma, &mut n) }, TlsStatus::Ok);
    assert!(rho >= 0.0 && sigma > 0.0);
    assert_eq!(unsafe { tls_results_row(res, 1, &mut rho, &mut sigma, &mut n) }, TlsStatus::InvalidArgument);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { tls_results_json(res, &mut json) }, TlsStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(json) }.to_str().unwrap()).unwrap();
    assert_eq!(v["kind"], "analyze");
    unsafe {
        tls_string_free(json);
        tls_results_free(res);
        tls_grid_free(back);
        tls_grid_free(grid);
        tls_config_free(cfg);
    }
}

#[test]
fn missing_files_are_io_errors() {
    let mut grid = ptr::null_mut();
    assert_eq!(unsafe { tls_grid_read(c("/nonexistent/g.bin").as_ptr(), &mut grid) }, TlsStatus::Io);
    assert!(grid.is_null());
    let cfg = tls_config_new();
    assert_eq!(unsafe { tls_config_load(cfg, c("/nonexistent/run.cfg").as_ptr()) }, TlsStatus::Io);
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { tls_scenario_run(c("/nonexistent/script").as_ptr(), cfg, &mut res) }, TlsStatus::Io);
    unsafe { tls_config_free(cfg) };
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/tls_spectro.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let names: Vec<&str> = src
        .lines()
        .filter_map(|l| l.trim().strip_prefix("pub ").and_then(|l| l.split("fn ").nth(1)))
        .filter_map(|l| l.split('(').next())
        .filter(|n| n.starts_with("tls_"))
        .collect();
    assert!(names.len() >= 20, "{names:?}");
    for n in names {
        assert!(header.contains(&format!("{n}(")), "{n} missing from header");
    }
    assert!(header.contains("typedef struct TlsGrid TlsGrid;"));
    assert!(header.contains("TLS_STATUS_NO_ELIGIBLE = 7"));
}
