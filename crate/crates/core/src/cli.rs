//! Command-line surface. `run` returns the process exit code: 0 on success,
//! 1 for invalid input or usage, 2 for filesystem failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::ensemble::sample_ensemble;
use crate::error::{Error, Result};
use crate::io::config::RunConfig;
use crate::io::gridfile::{read_grid, write_grid, GridFormat};
use crate::io::results::{LossRecord, ResultsDoc};
use crate::io::script::ScenarioScript;
use crate::io::write_atomic;
use crate::loss::{fit_loss_curve, LossCurve};
use crate::report;
use crate::scenario;
use crate::sim::{voltage_sweep, SweepConfig};

#[derive(Parser, Debug)]
#[command(name = "tls-spectro", version, about = "Simulate and analyse bias-swept TLS resonator spectra")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON or key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Single configuration override, key=value with dotted keys. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output path; standard output when omitted (except for grids).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Grid file encoding.
    #[arg(long, global = true, default_value = "binary", value_parser = ["text", "binary"])]
    format: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample an ensemble, sweep it and write a grid file.
    Simulate,
    /// Run the analysis chain on a grid file.
    Analyze { grid: PathBuf },
    /// Fit the saturation law to a loss curve (CSV of n_photon,tan_delta or JSON).
    FitLoss { curve: PathBuf },
    /// Run a treatment script; a path or a built-in name (paper_sequence, thermal_reversal).
    Scenario { script: String },
    /// Print a results document as a table.
    Report {
        results: PathBuf,
        /// Also write a density plot as SVG.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}

fn load_config(g: &Global) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &g.config {
        cfg = cfg.merged_with_file(p)?;
    }
    cfg = cfg.with_overrides(&g.set)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn read_curve(path: &Path) -> Result<LossCurve> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim_start().starts_with('{') {
        return serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        });
    }
    let mut curve = LossCurve::default();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = || Error::Config(format!("{}:{}: expected n_photon,tan_delta", path.display(), n + 1));
        let (a, b) = line.split_once(',').ok_or_else(bad)?;
        curve.n_photon.push(a.trim().parse().map_err(|_| bad())?);
        curve.tan_delta.push(b.trim().parse().map_err(|_| bad())?);
    }
    Ok(curve)
}

fn execute(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    let cfg = load_config(g)?;
    match &cli.command {
        Command::Simulate => {
            let out = g.out.as_deref().ok_or_else(|| Error::Argument("simulate needs --out <path>".into()))?;
            let spec = cfg.sweep_ensemble();
            let mut ens = sample_ensemble(&spec, &cfg.device)?;
            ens.jitter = cfg.jitter;
            let sweep = SweepConfig {
                seed: scenario::sweep_seed(cfg.seed, 0),
                ..cfg.sweep.clone()
            };
            let grid = voltage_sweep(&cfg.device, &mut ens, &sweep)?;
            let format = GridFormat::parse(&g.format).expect("clap restricts the format");
            write_grid(&grid, out, format)
        }
        Command::Analyze { grid } => {
            let grid_data = read_grid(grid)?;
            let mut cfg = cfg;
            cfg.device = grid_data.meta.device;
            let label = grid.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let doc = scenario::analyze_grid(&grid_data, &cfg, &label)?;
            emit(g.out.as_deref(), &doc.to_json())
        }
        Command::FitLoss { curve } => {
            let fit = fit_loss_curve(&read_curve(curve)?)?;
            let mut doc = ResultsDoc::new("fit-loss", &cfg, cfg.seed);
            doc.loss_fits.push(LossRecord::from(&fit));
            emit(g.out.as_deref(), &doc.to_json())
        }
        Command::Scenario { script } => {
            let s = match ScenarioScript::builtin(script) {
                Some(s) => s,
                None => ScenarioScript::load(Path::new(script))?,
            };
            let doc = scenario::run_scenario(&s, &cfg)?;
            emit(g.out.as_deref(), &doc.to_json())
        }
        Command::Report { results, plot } => {
            let doc = ResultsDoc::read(results)?;
            if let Some(p) = plot {
                write_atomic(p, report::density_svg(&doc).as_bytes())?;
            }
            emit(g.out.as_deref(), &report::text_table(&doc))
        }
    }
}
