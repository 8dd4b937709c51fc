//! Run configuration. A file is either one JSON document or `key = value`
//! lines with dotted keys (`sweep.v_stop = 0.04`). Either form only needs
//! the keys it changes: it is merged over the defaults and then parsed
//! strictly, so unknown keys are errors.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::AnalysisParams;
use crate::ensemble::{CabsProtocol, DipoleDist, EnsembleSpec, JitterParams};
use crate::error::{Error, Result};
use crate::loss::LossParams;
use crate::model::DeviceParams;
use crate::sim::SweepConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSweepConfig {
    pub truth: LossParams,
    pub n_lo: f64,
    pub n_hi: f64,
    pub n_points: usize,
    /// Relative noise on each loss value.
    pub noise_sd: f64,
}

impl Default for PowerSweepConfig {
    fn default() -> Self {
        PowerSweepConfig {
            truth: LossParams {
                tan0: 1.88e-3,
                n_c: 0.022,
                tan_e: 0.5e-3,
            },
            n_lo: 1e-4,
            n_hi: 1e3,
            n_points: 29,
            noise_sd: 0.03,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalConfig {
    /// Re-draw every dipole from this distribution after a reset.
    pub redraw: Option<DipoleDist>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgeConfig {
    pub scale_per_month: f64,
}

impl Default for AgeConfig {
    fn default() -> Self {
        AgeConfig { scale_per_month: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub device: DeviceParams,
    pub sweep: SweepConfig,
    /// Explicit ensemble; when absent one is derived from the sweep range.
    pub ensemble: Option<EnsembleSpec>,
    pub jitter: JitterParams,
    pub cabs: CabsProtocol,
    pub analysis: AnalysisParams,
    pub power: PowerSweepConfig,
    pub thermal: ThermalConfig,
    pub age: AgeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            device: DeviceParams::default(),
            sweep: SweepConfig {
                f_points: 401,
                ..SweepConfig::default()
            },
            ensemble: None,
            jitter: JitterParams::default(),
            cabs: CabsProtocol::default(),
            analysis: AnalysisParams::default(),
            power: PowerSweepConfig::default(),
            thermal: ThermalConfig::default(),
            age: AgeConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.sweep.validate()?;
        if let Some(e) = &self.ensemble {
            e.validate()?;
        }
        self.jitter.validate()?;
        self.cabs.validate()?;
        let p = &self.power;
        if !(p.n_lo > 0.0 && p.n_hi > p.n_lo && p.n_points >= 2 && p.noise_sd >= 0.0) {
            return Err(Error::Config(format!("power: invalid photon grid or noise {p:?}")));
        }
        if !(self.age.scale_per_month > 0.0) {
            return Err(Error::Config("age.scale_per_month must be > 0".into()));
        }
        Ok(())
    }

    /// Applies a JSON or key=value document over `self`.
    pub fn merged_with_text(&self, text: &str, origin: &str) -> Result<Self> {
        let patch = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?
        } else {
            parse_key_values(text, origin)?
        };
        self.merged(&patch, origin)
    }

    pub fn merged_with_file(&self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.merged_with_text(&text, &path.display().to_string())
    }

    /// Applies `key=value` overrides, as given on the command line.
    pub fn with_overrides(&self, pairs: &[String]) -> Result<Self> {
        let mut patch = Value::Object(Default::default());
        for pair in pairs {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {pair:?} is not key=value")))?;
            set_path(&mut patch, k.trim(), parse_scalar(v.trim()), "--set")?;
        }
        self.merged(&patch, "--set")
    }

    fn merged(&self, patch: &Value, origin: &str) -> Result<Self> {
        let mut base = serde_json::to_value(self).expect("config serializes");
        merge(&mut base, patch);
        let cfg: RunConfig = serde_json::from_value(base).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The ensemble a plain simulation uses.
    pub fn sweep_ensemble(&self) -> EnsembleSpec {
        self.ensemble.clone().unwrap_or_else(|| EnsembleSpec {
            seed: self.seed,
            ..EnsembleSpec::for_sweep(&self.device, self.sweep.v_stop.abs().max(self.sweep.v_start.abs()))
        })
    }

    /// The ensemble a treatment scenario evolves.
    pub fn scenario_ensemble(&self) -> EnsembleSpec {
        self.ensemble.clone().unwrap_or_else(|| EnsembleSpec {
            seed: self.seed,
            ..EnsembleSpec::for_scenario(&self.device, self.sweep.v_stop.abs().max(self.sweep.v_start.abs()))
        })
    }
}

/// Objects merge key by key; anything else replaces. A null in the patch
/// clears an optional field.
fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}

fn parse_scalar(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string()))
}

fn set_path(root: &mut Value, key: &str, value: Value, origin: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("{origin}: malformed key {key:?}")));
    }
    let mut cur = root;
    for p in &parts[..parts.len() - 1] {
        let obj = cur.as_object_mut().ok_or_else(|| Error::Config(format!("{origin}: {key:?} descends into a value")))?;
        cur = obj.entry(p.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = cur.as_object_mut().ok_or_else(|| Error::Config(format!("{origin}: {key:?} descends into a value")))?;
    obj.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_key_values(text: &str, origin: &str) -> Result<Value> {
    let mut patch = Value::Object(Default::default());
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{origin}:{}: expected key = value", n + 1)))?;
        set_path(&mut patch, k.trim(), parse_scalar(v.trim()), &format!("{origin}:{}", n + 1))?;
    }
    Ok(patch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_values_merge_over_defaults() {
        let c = RunConfig::default()
            .merged_with_text("seed = 7\nsweep.v_stop = 0.04 # wider\n\ndevice.q_c = 7000", "t")
            .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.sweep.v_stop, 0.04);
        assert_eq!(c.device.q_c, 7000.0);
        assert_eq!(c.sweep.f_points, RunConfig::default().sweep.f_points);
    }

    #[test]
    fn json_and_overrides() {
        let c = RunConfig::default().merged_with_text(r#"{"seed": 3, "sweep": {"noise_sd": 0.0}}"#, "t").unwrap();
        assert_eq!((c.seed, c.sweep.noise_sd), (3, 0.0));
        let d = c.with_overrides(&["seed=9".into()]).unwrap();
        assert_eq!((d.seed, d.sweep.noise_sd), (9, 0.0));
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let base = RunConfig::default();
        assert!(base.merged_with_text("sweep.v_stopp = 1", "t").is_err());
        assert!(base.merged_with_text("seed 7", "t").is_err());
        assert!(base.merged_with_text("seed = \"seven\"", "t").is_err());
        assert!(base.merged_with_text("sweep.v_step = -1", "t").is_err());
        assert!(base.with_overrides(&["seed".into()]).is_err());
    }
}
