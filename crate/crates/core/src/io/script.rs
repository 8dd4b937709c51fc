//! Treatment scripts. Text form is one step per line, `#` starts a comment,
//! and an argument follows the name either after a space or in
//! parentheses:
//!
//! ```text
//! cooldown
//! sweep
//! cabs            # at the configured stage temperature
//! cabs 353        # stage temperature override, K
//! thermal_cycle(10)
//! power_sweep
//! age 5           # months
//! ```
//!
//! A JSON document `{"name": ..., "steps": [{"step": "sweep"}, ...]}` is
//! accepted too.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    /// Fresh steady ensemble drawn from the configured spec.
    Cooldown,
    Sweep,
    Cabs {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stage_temp_k: Option<f64>,
    },
    ThermalCycle { peak_k: f64 },
    PowerSweep,
    Age { months: f64 },
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Cooldown => write!(f, "cooldown"),
            Step::Sweep => write!(f, "sweep"),
            Step::Cabs { stage_temp_k: None } => write!(f, "cabs"),
            Step::Cabs { stage_temp_k: Some(t) } => write!(f, "cabs({t} K)"),
            Step::ThermalCycle { peak_k } => write!(f, "thermal_cycle({peak_k} K)"),
            Step::PowerSweep => write!(f, "power_sweep"),
            Step::Age { months } => write!(f, "age({months} months)"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    pub name: String,
    pub steps: Vec<Step>,
}

impl ScenarioScript {
    pub fn validate(&self) -> Result<()> {
        if self.steps.first() != Some(&Step::Cooldown) {
            return Err(Error::Config(format!("scenario {:?} must begin with cooldown", self.name)));
        }
        let mut swept = false;
        for (i, s) in self.steps.iter().enumerate() {
            let bad = |m: &str| Err(Error::Config(format!("scenario {:?} step {}: {m}", self.name, i + 1)));
            match *s {
                Step::Sweep => swept = true,
                Step::PowerSweep if !swept => return bad("power_sweep needs an earlier sweep to report against"),
                Step::ThermalCycle { peak_k } if !(peak_k >= 0.0) => return bad("peak temperature must be >= 0 K"),
                Step::Cabs { stage_temp_k: Some(t) } if !(t >= 0.0) => return bad("stage temperature must be >= 0 K"),
                Step::Age { months } if !(months >= 0.0) => return bad("months must be >= 0"),
                _ => {}
            }
        }
        Ok(())
    }

    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let script = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(format!("{name}: {e}")))?
        } else {
            let steps = text
                .lines()
                .enumerate()
                .filter_map(|(n, l)| {
                    let l = l.split('#').next().unwrap_or("").trim();
                    (!l.is_empty()).then(|| parse_step(l).map_err(|m| Error::Config(format!("{name}:{}: {m}", n + 1))))
                })
                .collect::<Result<_>>()?;
            ScenarioScript {
                name: name.to_string(),
                steps,
            }
        };
        script.validate()?;
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::parse(&text, &name)
    }

    /// A built-in script by name, or None.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "paper_sequence" => Some(paper_sequence()),
            "thermal_reversal" => Some(thermal_reversal()),
            _ => None,
        }
    }
}

fn parse_step(line: &str) -> std::result::Result<Step, String> {
    let (name, arg) = match line.split_once('(') {
        Some((n, rest)) => {
            let a = rest.strip_suffix(')').ok_or_else(|| format!("unclosed parenthesis in {line:?}"))?;
            (n.trim(), Some(a.trim()))
        }
        None => match line.split_once(char::is_whitespace) {
            Some((n, a)) => (n, Some(a.trim())),
            None => (line, None),
        },
    };
    let num = |what: &str| -> std::result::Result<f64, String> {
        let a = arg.ok_or_else(|| format!("{name} needs {what}"))?;
        let a = a.trim_end_matches('K').trim_end_matches("months").trim();
        a.parse().map_err(|_| format!("{name}: {a:?} is not a number"))
    };
    let none = |s: Step| match arg {
        Some(a) if !a.is_empty() => Err(format!("{name} takes no argument, got {a:?}")),
        _ => Ok(s),
    };
    match name {
        "cooldown" => none(Step::Cooldown),
        "sweep" => none(Step::Sweep),
        "power_sweep" => none(Step::PowerSweep),
        "cabs" => Ok(Step::Cabs {
            stage_temp_k: match arg {
                Some(a) if !a.is_empty() => Some(num("a stage temperature")?),
                _ => None,
            },
        }),
        "thermal_cycle" => Ok(Step::ThermalCycle {
            peak_k: num("a peak temperature")?,
        }),
        "age" => Ok(Step::Age { months: num("a duration")? }),
        other => Err(format!("unknown step {other:?}")),
    }
}

/// Control, CABS, 10 K cycle, 300 K cycle, then alternating bias at 353 K:
/// five sweeps, each followed by a power sweep.
pub fn paper_sequence() -> ScenarioScript {
    use Step::*;
    ScenarioScript {
        name: "paper_sequence".into(),
        steps: vec![
            Cooldown,
            Sweep,
            PowerSweep,
            Cabs { stage_temp_k: None },
            Sweep,
            PowerSweep,
            ThermalCycle { peak_k: 10.0 },
            Sweep,
            PowerSweep,
            ThermalCycle { peak_k: 300.0 },
            Sweep,
            PowerSweep,
            Cabs { stage_temp_k: Some(353.0) },
            Sweep,
            PowerSweep,
        ],
    }
}

/// Sweep, CABS, sweep, 10 K cycle, sweep.
pub fn thermal_reversal() -> ScenarioScript {
    use Step::*;
    ScenarioScript {
        name: "thermal_reversal".into(),
        steps: vec![Cooldown, Sweep, Cabs { stage_temp_k: None }, Sweep, ThermalCycle { peak_k: 10.0 }, Sweep],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_forms_agree() {
        let a = ScenarioScript::parse("cooldown\nsweep\ncabs\nthermal_cycle(10)\nsweep # again\n", "a").unwrap();
        let b = ScenarioScript::parse("cooldown\n\nsweep\ncabs()\nthermal_cycle 10 K\nsweep\n", "a").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.steps[3], Step::ThermalCycle { peak_k: 10.0 });
    }

    #[test]
    fn json_round_trip() {
        let s = paper_sequence();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(ScenarioScript::parse(&text, "x").unwrap(), s);
    }

    #[test]
    fn invalid_scripts() {
        for bad in ["sweep\n", "cooldown\npower_sweep\n", "cooldown\nanneal\n", "cooldown\nthermal_cycle\n", "cooldown\nsweep 3\n", "cooldown\nage(x)\n"] {
            assert!(ScenarioScript::parse(bad, "bad").is_err(), "{bad:?}");
        }
    }
}
