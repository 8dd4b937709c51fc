//! Runs a treatment script against one evolving ensemble and collects a
//! treatment-table row per sweep.

use crate::analysis;
use crate::ensemble::{sample_ensemble, CabsProtocol, TlsEnsemble};
use crate::error::{Error, Result};
use crate::io::config::RunConfig;
use crate::io::results::{LossRecord, ResultsDoc, Row};
use crate::io::script::{ScenarioScript, Step};
use crate::loss;
use crate::rng;
use crate::sim::{self, SpectrumGrid, SweepConfig};

/// Noise seed of the `k`-th sweep of a run.
pub fn sweep_seed(master: u64, k: usize) -> u64 {
    rng::child_seed(master, &format!("sweep/{k}"))
}

/// Analyses one grid into a single-row document.
pub fn analyze_grid(grid: &SpectrumGrid, cfg: &RunConfig, label: &str) -> Result<ResultsDoc> {
    let a = analysis::analyze(grid, &cfg.analysis)?;
    let mut doc = ResultsDoc::new("analyze", cfg, grid.meta.seed);
    doc.rows.push(Row::from_analysis(label, grid.meta.seed, &a, &grid.meta.device));
    Ok(doc)
}

pub fn run_scenario(script: &ScenarioScript, cfg: &RunConfig) -> Result<ResultsDoc> {
    script.validate()?;
    cfg.validate()?;
    let spec = cfg.scenario_ensemble();
    spec.validate()?;
    let mut doc = ResultsDoc::new("scenario", cfg, spec.seed);
    doc.scenario = Some(script.name.clone());
    doc.steps = script.steps.iter().map(|s| s.to_string()).collect();

    let mut ens: Option<TlsEnsemble> = None;
    let mut pending: Vec<String> = Vec::new();
    let mut n_sweeps = 0;
    let mut n_power: u64 = 0;
    for step in &script.steps {
        let e = || Error::Config(format!("step {step} before cooldown"));
        match *step {
            Step::Cooldown => {
                let mut fresh = sample_ensemble(&spec, &cfg.device)?;
                fresh.jitter = cfg.jitter;
                ens = Some(fresh);
            }
            Step::Sweep => {
                let ens = ens.as_mut().ok_or_else(e)?;
                let seed = sweep_seed(cfg.seed, n_sweeps);
                let sweep = SweepConfig { seed, ..cfg.sweep.clone() };
                let grid = sim::voltage_sweep(&cfg.device, ens, &sweep)?;
                let a = analysis::analyze(&grid, &cfg.analysis)?;
                let label = match (pending.is_empty(), n_sweeps) {
                    (true, 0) => "control".to_string(),
                    (true, _) => "repeat".to_string(),
                    (false, _) => pending.join(" + "),
                };
                doc.rows.push(Row::from_analysis(&label, seed, &a, &cfg.device));
                pending.clear();
                n_sweeps += 1;
            }
            Step::Cabs { stage_temp_k } => {
                let proto = CabsProtocol {
                    stage_temp: stage_temp_k.unwrap_or(cfg.cabs.stage_temp),
                    ..cfg.cabs
                };
                ens.as_mut().ok_or_else(e)?.apply_cabs(&proto)?;
                pending.push(step.to_string());
            }
            Step::ThermalCycle { peak_k } => {
                ens.as_mut().ok_or_else(e)?.thermal_cycle(peak_k, cfg.thermal.redraw.as_ref())?;
                pending.push(step.to_string());
            }
            Step::Age { months } => {
                ens.as_mut().ok_or_else(e)?.age(months, cfg.age.scale_per_month)?;
                pending.push(step.to_string());
            }
            Step::PowerSweep => {
                let p = &cfg.power;
                let grid = sim::log_photon_grid(p.n_lo, p.n_hi, p.n_points);
                let mut r = rng::substream(cfg.seed, "power_sweep", n_power);
                let curve = sim::power_sweep(&p.truth, &grid, p.noise_sd, &mut r)?;
                let fit = LossRecord::from(&loss::fit_loss_curve(&curve)?);
                match doc.rows.last_mut() {
                    Some(row) => row.loss_fit = Some(fit),
                    None => doc.loss_fits.push(fit),
                }
                n_power += 1;
            }
        }
    }
    Ok(doc)
}
