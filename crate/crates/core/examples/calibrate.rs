//! Measures the detection efficiency of the default analysis on sampled
//! Steady ensembles at P0 = 75 TLS/(μm³·GHz).
//!
//! cargo run --release --example calibrate -- [v_max_mV] [first_seed] [n_seeds]

use tls_spectro::analysis::{analyze, AnalysisParams};
use tls_spectro::density::DensityOptions;
use tls_spectro::ensemble::{sample_ensemble, EnsembleSpec};
use tls_spectro::model::DeviceParams;
use tls_spectro::sim::{voltage_sweep, SweepConfig};

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let v_max = args.first().copied().unwrap_or(20.0) * 1e-3;
    let first = args.get(1).copied().unwrap_or(101.0) as u64;
    let n = args.get(2).copied().unwrap_or(20.0) as u64;
    let device = DeviceParams::default();
    let params = AnalysisParams {
        density: DensityOptions { efficiency: 1.0, ..DensityOptions::default() },
        ..AnalysisParams::default()
    };
    let (mut sum_rho, mut sum_truth, mut sum_rel) = (0.0, 0.0, 0.0);
    let mut rhos = Vec::new();
    let mut sigmas = Vec::new();
    for seed in first..first + n {
        let spec = EnsembleSpec { seed, ..EnsembleSpec::for_sweep(&device, v_max) };
        let mut ens = sample_ensemble(&spec, &device).expect("ensemble");
        let cfg = SweepConfig { v_stop: v_max, seed, ..SweepConfig::desk() };
        let grid = voltage_sweep(&device, &mut ens, &cfg).expect("sweep");
        let a = analyze(&grid, &params).expect("analysis");
        let truth = ens
            .members
            .iter()
            .filter(|m| a.eligibility.band.contains(m.delta0) && m.vertex_bias(&device).is_some_and(|v| (0.0..=v_max).contains(&v)))
            .count();
        println!(
            "seed {seed}: members {} truth-eligible {truth} detected {} rho {:.1} sigma {:.1}",
            ens.len(),
            a.n_eligible,
            a.density.rho,
            a.density.sigma_rho
        );
        sum_rho += a.density.rho;
        rhos.push(a.density.rho);
        sigmas.push(a.density.sigma_rho);
        sum_truth += truth as f64;
        if a.density.rho > 0.0 {
            sum_rel += a.density.sigma_rho / a.density.rho;
        }
    }
    let k = n as f64;
    let m = sum_rho / k;
    let sd = (rhos.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
    let rms_sigma = (sigmas.iter().map(|s| s * s).sum::<f64>() / k).sqrt();
    println!("scatter sd/mean {:.3}; rms reported sigma / mean {:.3}", sd / m, rms_sigma / m);
    println!(
        "mean rho {:.2} -> efficiency {:.4}; mean truth-eligible {:.2}; mean rel sigma {:.3}",
        sum_rho / k,
        sum_rho / k / 75.0,
        sum_truth / k,
        sum_rel / k
    );
}
