//! Acceptance suite. Each criterion prints one PASS/FAIL line. The process
//! exits non-zero when a criterion fails that is not listed in
//! `KNOWN_FAILURES`, or when a listed one starts passing.

use std::time::Instant;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tls_spectro::analysis::{analyze, AnalysisParams};
use tls_spectro::density::loss_from_density;
use tls_spectro::ensemble::{sample_ensemble, CabsProtocol, DipoleDist, EnsembleSpec, TlsEnsemble, GAMMA_DEFAULT};
use tls_spectro::error::Error;
use tls_spectro::hyperbola::{crossing_rate, hyperbola_occupancy};
use tls_spectro::io::config::RunConfig;
use tls_spectro::io::gridfile::{decode_grid, encode_grid, FormatError, GridFormat};
use tls_spectro::io::script::ScenarioScript;
use tls_spectro::loss::{fit_loss_curve, t1_from_nc, LossCurve, LossParams};
use tls_spectro::model::{coupling_g, gate_field, rms_field, splitting, tuning_rate, DeviceParams, TlsParams};
use tls_spectro::scenario::run_scenario;
use tls_spectro::sim::{log_photon_grid, power_sweep, s21_clean, visibility, voltage_sweep, SweepConfig};
use tls_spectro::units::MHZ;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type MalformedCase = (&'static str, Vec<u8>, fn(&FormatError) -> bool);

/// Criteria that fail with a faithful implementation. The 300 K row of the
/// treatment table is inconsistent with its control row by about 20%, which
/// together with the control row's own offset puts it just past ±40%.
const KNOWN_FAILURES: [usize; 1] = [9];

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn coupling() -> Outcome {
    let s = splitting(0.5, &DeviceParams::default()) / MHZ;
    check((s - 1.3).abs() <= 0.1, format!("splitting {s:.4} MHz for 0.5 eÅ"))
}

fn fields() -> Outcome {
    let dev = DeviceParams::default();
    let e_rms = rms_field(&dev);
    let e_g = gate_field(10.0, &dev) / 1e6;
    check((e_rms - 53.0).abs() <= 2.0 && (e_g - 100.0).abs() <= 3.0, format!("E_rms {e_rms:.2} V/m, E_g(10 V) {e_g:.2} MV/m"))
}

/// Local minima of |S21| on a fine grid, refined by a parabola through the
/// three samples around each.
fn dips(freqs: &[f64], s: &[Complex64]) -> Vec<f64> {
    let m: Vec<f64> = s.iter().map(|z| z.norm()).collect();
    let h = freqs[1] - freqs[0];
    (1..m.len() - 1)
        .filter(|&i| m[i] < m[i - 1] && m[i] <= m[i + 1])
        .map(|i| {
            let (a, b, c) = (m[i - 1], m[i], m[i + 1]);
            freqs[i] + 0.5 * h * (a - c) / (a - 2.0 * b + c)
        })
        .collect()
}

fn splitting_oracle() -> Outcome {
    let dev = DeviceParams::default();
    let per_eangstrom = coupling_g(1.0, &dev);
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let g = r.random_range(0.5..3.0) * MHZ;
        let gamma = r.random_range(0.01..0.2) * g;
        let tls = TlsParams::new(dev.f_c, 0.0, g / per_eangstrom, gamma);
        let ens = TlsEnsemble::from_members(vec![tls], 0);
        let span = 3.0 * g;
        let n = 20_001;
        let freqs: Vec<f64> = (0..n).map(|k| dev.f_c - span + 2.0 * span * k as f64 / (n - 1) as f64).collect();
        let d = dips(&freqs, &s21_clean(&dev, &ens, 0.0, 0.0, &freqs));
        if d.len() != 2 {
            return Err(format!("{} dips for g {:.3} MHz", d.len(), g / MHZ));
        }
        // Lossless coupled-mode matrix in a frame rotating at f_c. Transmission
        // dips sit at its eigenvalues up to O(γ²/g²), whatever the cavity width.
        let m = Matrix2::new(0.0, g, g, 0.0);
        let ev = m.symmetric_eigen().eigenvalues;
        let expect = (ev[0] - ev[1]).abs();
        worst = worst.max(rel(d[1] - d[0], expect));
    }
    check(worst <= 0.01, format!("worst relative deviation {worst:.2e} over 100 instances"))
}

/// Ten TLSs with vertices spread over the sweep, each kept only if its arms
/// stay in the usable window for at least eight traces and its dip is at
/// least 0.3 dB deep.
fn visible_ten(dev: &DeviceParams, cfg: &SweepConfig, seed: u64) -> Vec<TlsParams> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let dist = DipoleDist::default();
    let mut members = Vec::new();
    while members.len() < 10 {
        let k = members.len() as f64;
        let off = r.random_range(-6e6..6e6);
        let p = dist.sample(&mut r);
        let v_vertex = 1e-3 + 1.8e-3 * k + r.random_range(0.0..0.6e-3);
        let t = TlsParams::new(dev.f_c + off, tuning_rate(p, dev) * v_vertex, p, GAMMA_DEFAULT);
        let vis = visibility(dev, &t, cfg, 2e6);
        if vis.traces >= 8 && vis.depth_db <= -0.3 {
            members.push(t);
        }
    }
    members
}

fn hyperbola_round_trip() -> Outcome {
    let dev = DeviceParams::default();
    let mut counts = Vec::new();
    for seed in 1..=5u64 {
        let cfg = SweepConfig { seed, noise_sd: 0.002, ..SweepConfig::desk() };
        let mut ens = TlsEnsemble::from_members(visible_ten(&dev, &cfg, seed), seed);
        let grid = voltage_sweep(&dev, &mut ens, &cfg).map_err(|e| e.to_string())?;
        let a = analyze(&grid, &AnalysisParams::default()).map_err(|e| e.to_string())?;
        let found = ens
            .members
            .iter()
            .filter(|m| {
                let v = m.vertex_bias(&dev).expect("biased TLS");
                a.fits.iter().any(|f| {
                    (f.delta0_hz - m.delta0).abs() < 2.0 * m.gamma && (f.v_vertex - v).abs() < 0.3e-3 && rel(f.p_z, m.p_z) < 0.1
                })
            })
            .count();
        counts.push(found);
    }
    check(counts.iter().all(|&c| c >= 8), format!("recovered per seed {counts:?} of 10"))
}

fn density_run(v_max: f64, seed: u64) -> Result<(f64, f64), String> {
    let dev = DeviceParams::default();
    let spec = EnsembleSpec { seed, ..EnsembleSpec::for_sweep(&dev, v_max) };
    let mut ens = sample_ensemble(&spec, &dev).map_err(|e| e.to_string())?;
    let cfg = SweepConfig { v_stop: v_max, seed, ..SweepConfig::desk() };
    let grid = voltage_sweep(&dev, &mut ens, &cfg).map_err(|e| e.to_string())?;
    let a = analyze(&grid, &AnalysisParams::default()).map_err(|e| e.to_string())?;
    Ok((a.density.rho, a.density.sigma_rho))
}

fn density_round_trip() -> Outcome {
    let truth = 75.0;
    let mut summary = Vec::new();
    for v_max in [40e-3, 160e-3] {
        let runs = (1..=5u64).map(|s| density_run(v_max, s)).collect::<Result<Vec<_>, _>>()?;
        let rho: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let sigma: Vec<f64> = runs.iter().map(|r| r.1).collect();
        summary.push((v_max, mean(&rho), mean(&sigma)));
    }
    let (_, r1, s1) = summary[0];
    let (_, r4, s4) = summary[1];
    // Quadrupling the bias range quadruples the expected count.
    let ratio = (s4 / r4) / (s1 / r1);
    let ok = summary.iter().all(|&(_, r, s)| (r - truth).abs() <= s) && (ratio - 0.5).abs() <= 0.3 * 0.5;
    check(
        ok,
        format!(
            "40 mV: {r1:.1} ± {s1:.1}, 160 mV: {r4:.1} ± {s4:.1} (means over 5 seeds); relative sigma ratio {ratio:.3} (1/√4 = 0.5)"
        ),
    )
}

fn counting_statistics() -> Outcome {
    let (occ, clamped) = hyperbola_occupancy(50, 0.75e-3, 200e-3).map_err(|e| e.to_string())?;
    let fixture = crossing_rate(122, 500).map_err(|e| e.to_string())?;
    let mut rates = Vec::new();
    let mut fits = 0;
    for seed in 1..=6u64 {
        let cfg = RunConfig { seed, ..RunConfig::default() };
        let mut ens = sample_ensemble(&cfg.scenario_ensemble(), &cfg.device).map_err(|e| e.to_string())?;
        ens.jitter = cfg.jitter;
        ens.apply_cabs(&CabsProtocol::default()).map_err(|e| e.to_string())?;
        let sweep = SweepConfig { seed, ..cfg.sweep.clone() };
        let grid = voltage_sweep(&cfg.device, &mut ens, &sweep).map_err(|e| e.to_string())?;
        let a = analyze(&grid, &cfg.analysis).map_err(|e| e.to_string())?;
        rates.push(a.crossing_rate);
        fits += a.fits.len();
    }
    let rate = mean(&rates);
    check(
        occ == 0.1875 && !clamped && fixture == 0.244 && (rate - 0.24).abs() <= 0.05 && fits == 0,
        format!("occupancy {occ}, fixture rate {fixture}, simulated post-treatment rate {rate:.3} over 6 sweeps, {fits} fits"),
    )
}

fn thermal_reversal() -> Outcome {
    let script = ScenarioScript::builtin("thermal_reversal").ok_or("missing built-in")?;
    let doc = run_scenario(&script, &RunConfig { seed: 1, ..RunConfig::default() }).map_err(|e| e.to_string())?;
    let n: Vec<usize> = doc.rows.iter().map(|r| r.n_fits).collect();
    let (first, last) = (&doc.rows[0].density, &doc.rows[2].density);
    let ok = n.len() == 3 && n[0] > 0 && n[1] == 0 && n[2] > 0 && (last.value - first.value).abs() <= first.sigma;
    check(
        ok,
        format!(
            "fits per sweep {n:?}; density {:.1} ± {:.1} -> {:.1} ± {:.1}",
            first.value, first.sigma, last.value, last.sigma
        ),
    )
}

fn loss_fit() -> Outcome {
    let truth = LossParams { tan0: 1.88e-3, n_c: 0.022, tan_e: 0.5e-3 };
    let grid = log_photon_grid(1e-4, 1e3, 29);
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let clean = fit_loss_curve(&power_sweep(&truth, &grid, 0.0, &mut r).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let noiseless = [rel(clean.tan0_tls, truth.tan0), rel(clean.n_c, truth.n_c), rel(clean.tan_e, truth.tan_e)]
        .into_iter()
        .fold(0.0, f64::max);
    let mut worst_tan: f64 = 0.0;
    let mut worst_nc: f64 = 0.0;
    let mut tan0 = Vec::new();
    for _ in 0..20 {
        let curve: LossCurve = power_sweep(&truth, &grid, 0.03, &mut r).map_err(|e| e.to_string())?;
        let f = fit_loss_curve(&curve).map_err(|e| e.to_string())?;
        worst_tan = worst_tan.max(rel(f.tan0_tls, truth.tan0));
        worst_nc = worst_nc.max(rel(f.n_c, truth.n_c));
        tan0.push(f.tan0_tls);
    }
    let baseline = mean(&tan0);
    check(
        noiseless <= 1e-6 && worst_tan <= 0.05 && worst_nc <= 0.25 && (baseline - 1.88e-3).abs() <= 0.1e-3,
        format!(
            "noiseless {noiseless:.1e}; 3% noise worst tan0 {worst_tan:.3}, worst n_c {worst_nc:.3} over 20 curves; mean tan0 {:.3}e-3",
            baseline * 1e3
        ),
    )
}

fn table_consistency() -> Outcome {
    let dev = DeviceParams::default();
    // (label, density, mean p_z, printed calculated loss ×1e-3)
    let rows = [
        ("control", 75.0, 0.49, 0.21),
        ("aged", 93.0, 0.31, 0.12),
        ("10 K", 92.0, 0.24, 0.07),
        ("300 K", 71.0, 0.45, 0.14),
        ("353 K", 106.0, 0.38, 0.17),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (label, rho, p, printed) in rows {
        let calc = loss_from_density(rho, p * p, &dev).map_err(|e| e.to_string())? * 1e3;
        let dev_rel = calc / printed - 1.0;
        ok &= dev_rel.abs() <= 0.4;
        parts.push(format!("{label} {calc:.3} ({:+.1}%)", 100.0 * dev_rel));
    }
    let t1 = t1_from_nc(0.021, 0.64 * MHZ).map_err(|e| e.to_string())? * 1e6;
    ok &= (0.1..=3.0).contains(&t1);
    check(ok, format!("{}; T1 {t1:.2} μs", parts.join(", ")))
}

fn drop_line(text: &str, prefix: &str) -> String {
    text.split_inclusive('\n').filter(|l| !l.starts_with(prefix)).collect()
}

fn determinism_and_formats() -> Outcome {
    let dev = DeviceParams::default();
    let cfg = SweepConfig { seed: 4, v_stop: 5e-3, ..SweepConfig::desk() };
    let make = || -> tls_spectro::Result<_> {
        let spec = EnsembleSpec { seed: 4, ..EnsembleSpec::for_sweep(&dev, 5e-3) };
        let mut ens = sample_ensemble(&spec, &dev)?;
        voltage_sweep(&dev, &mut ens, &cfg)
    };
    let (a, b) = (make().map_err(|e| e.to_string())?, make().map_err(|e| e.to_string())?);
    let mut problems = Vec::new();
    for format in [GridFormat::Binary, GridFormat::Text] {
        let bytes = encode_grid(&a, format);
        if bytes != encode_grid(&b, format) {
            problems.push(format!("{format:?} grid bytes differ between runs"));
        }
        match decode_grid(&bytes) {
            Ok(back) if back == a => {}
            Ok(_) => problems.push(format!("{format:?} round trip not exact")),
            Err(e) => problems.push(format!("{format:?} round trip: {e}")),
        }
    }

    let script = ScenarioScript::parse("cooldown\nsweep\ncabs\nsweep\npower_sweep\n", "determinism").map_err(|e| e.to_string())?;
    let run_cfg = RunConfig::default()
        .with_overrides(&["seed=5".into(), "sweep.v_stop=0.005".into(), "sweep.f_points=201".into()])
        .map_err(|e| e.to_string())?;
    let docs = [run_scenario(&script, &run_cfg), run_scenario(&script, &run_cfg)];
    match docs {
        [Ok(x), Ok(y)] if x.without_timestamp().to_json() == y.without_timestamp().to_json() => {}
        [Ok(_), Ok(_)] => problems.push("results documents differ".into()),
        [Err(e), _] | [_, Err(e)] => problems.push(e.to_string()),
    }

    let good = encode_grid(&a, GridFormat::Binary);
    let text = String::from_utf8_lossy(&encode_grid(&a, GridFormat::Text)).into_owned();
    let cases: Vec<MalformedCase> = vec![
        ("bad magic", [b"XGRD0001", &good[8..]].concat(), |e| matches!(e, FormatError::BadMagic { .. })),
        ("unknown key", text.replacen("seed=", "sead=", 1).into_bytes(), |e| matches!(e, FormatError::UnknownKey { .. })),
        ("missing key", drop_line(&text, "t0_s=").into_bytes(), |e| matches!(e, FormatError::MissingKey { .. })),
        ("bad version", text.replacen("format_version=1", "format_version=9", 1).into_bytes(), |e| {
            matches!(e, FormatError::UnsupportedVersion { .. })
        }),
        ("truncated", good[..good.len() - 5].to_vec(), |e| matches!(e, FormatError::Truncated { .. })),
    ];
    for (name, bytes, expected) in cases {
        match decode_grid(&bytes) {
            Err(e) if expected(&e) => {}
            Err(e) => problems.push(format!("{name}: unexpected {e}")),
            Ok(_) => problems.push(format!("{name}: accepted")),
        }
    }
    let wrapped: Error = FormatError::BadMagic { offset: 0 }.into();
    if !matches!(wrapped, Error::Format(_)) {
        problems.push("format errors are not typed".into());
    }
    if problems.is_empty() {
        Ok("grids byte-identical (binary, text), round trips exact, results identical, 5 malformed inputs rejected".into())
    } else {
        Err(problems.join("; "))
    }
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("coupling", coupling),
        ("field formulas", fields),
        ("splitting oracle", splitting_oracle),
        ("hyperbola round trip", hyperbola_round_trip),
        ("density round trip", density_round_trip),
        ("counting statistics", counting_statistics),
        ("thermal-cycle reversal", thermal_reversal),
        ("loss fit", loss_fit),
        ("table consistency", table_consistency),
        ("determinism and formats", determinism_and_formats),
    ];
    let (mut failed, mut unexpected) = (0, 0);
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        let known = KNOWN_FAILURES.contains(&n);
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        let (tag, detail) = match (&outcome, known) {
            (Ok(d), false) => ("PASS", d),
            (Ok(d), true) => ("PASS (listed as a known failure)", d),
            (Err(d), false) => ("FAIL", d),
            (Err(d), true) => ("FAIL (known)", d),
        };
        println!("criterion {n:>2} {tag} {name}: {detail} [{secs:.1} s]");
        failed += usize::from(outcome.is_err());
        unexpected += usize::from(outcome.is_err() != known);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if unexpected > 0 {
        std::process::exit(1);
    }
}
