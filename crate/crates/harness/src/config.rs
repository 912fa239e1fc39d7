use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use genctrl_core::dynamics::{Scenario, ScenarioConfig, ScenarioKind};
use genctrl_core::grape::{GrapeConfig, GrapeMethod};
use genctrl_rl::TrainConfig;
use serde::{Deserialize, Serialize};

/// Everything a run can be configured with. Relative paths are resolved
/// against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    /// Input pulse (JSON) for commands that evaluate or shift a given pulse.
    #[serde(default)]
    pub pulse: Option<PathBuf>,
    /// Trained actor checkpoint.
    #[serde(default)]
    pub actor: Option<PathBuf>,
    #[serde(default)]
    pub grape: GrapeSection,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub shift: Option<ShiftSection>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub t_sweep: Option<TSweepConfig>,
    #[serde(default)]
    pub adaptive: Option<AdaptiveConfig>,
}

impl RunConfig {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            scenario: ScenarioConfig::new(kind),
            pulse: None,
            actor: None,
            grape: GrapeSection::default(),
            train: None,
            shift: None,
            sweep: None,
            t_sweep: None,
            adaptive: None,
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Ok(self.scenario.build()?)
    }

    fn resolve(&mut self, base: &Path) {
        for p in [&mut self.pulse, &mut self.actor].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let scenario = self.scenario()?;
        self.grape.to_config().validate()?;
        if let Some(t) = &self.train {
            t.validate()?;
        }
        if let Some(s) = &self.sweep {
            s.validate(scenario.kind)?;
        }
        if let Some(t) = &self.t_sweep {
            if let Some(g) = &t.grid {
                g.validate("t_sweep.grid")?;
            }
            if !matches!(t.method, Method::NoControl | Method::Grape) {
                bail!("t_sweep.method must be no-control or grape");
            }
        }
        if let Some(a) = &self.adaptive {
            if a.rounds == 0 {
                bail!("adaptive.rounds must be at least 1");
            }
            if matches!(a.method, Method::RlGeneralize) {
                bail!("adaptive.method must be no-control, grape or analytic-shift");
            }
        }
        Ok(())
    }
}

/// Reads and validates a JSON run configuration; unknown keys are rejected.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg: RunConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    cfg.resolve(path.parent().unwrap_or(Path::new(".")));
    cfg.validate().with_context(|| format!("validating {}", path.display()))?;
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialPulse {
    Zero,
    Random,
}

/// GRAPE settings; missing fields take the defaults of the chosen method.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrapeSection {
    #[serde(default)]
    pub method: Option<GrapeMethod>,
    #[serde(default)]
    pub learning_rate: Option<f64>,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub adam_betas: Option<(f64, f64)>,
    #[serde(default)]
    pub adam_eps: Option<f64>,
    #[serde(default)]
    pub clip_to_bounds: Option<bool>,
    /// Zero for example 1 and random for example 2 unless set.
    #[serde(default)]
    pub initial: Option<InitialPulse>,
}

impl GrapeSection {
    pub fn to_config(&self) -> GrapeConfig {
        let mut c = match self.method.unwrap_or(GrapeMethod::Adam) {
            GrapeMethod::Gd => GrapeConfig::gd(),
            GrapeMethod::Adam => GrapeConfig::adam(),
        };
        if let Some(v) = self.learning_rate {
            c.learning_rate = v;
        }
        if let Some(v) = self.iterations {
            c.iterations = v;
        }
        if let Some(v) = self.adam_betas {
            c.adam_betas = v;
        }
        if let Some(v) = self.adam_eps {
            c.adam_eps = v;
        }
        if let Some(v) = self.clip_to_bounds {
            c.clip_to_bounds = v;
        }
        c
    }

    pub fn initial_for(&self, kind: ScenarioKind) -> InitialPulse {
        self.initial.unwrap_or(match kind {
            ScenarioKind::Example1 => InitialPulse::Zero,
            ScenarioKind::Example2 => InitialPulse::Random,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSection {
    /// Parameter point to carry the pulse to.
    pub target: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NoControl,
    Grape,
    RlGeneralize,
    AnalyticShift,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::NoControl => "no-control",
            Method::Grape => "grape",
            Method::RlGeneralize => "rl-generalize",
            Method::AnalyticShift => "analytic-shift",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Field strength `B′` (example 1).
    B,
    /// Field direction `(ϑ′, φ′)` on a product grid (example 1).
    Direction,
    Omega1,
    Omega2,
    G,
    /// Target time `T`.
    T,
    /// Dephasing rate, applied to every noisy qubit.
    Gamma,
}

impl SweepAxis {
    pub fn moves_params(self) -> bool {
        !matches!(self, SweepAxis::T | SweepAxis::Gamma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range { min: f64, max: f64, count: usize },
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::Range { min, max, count } => linspace(*min, *max, *count),
        }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        match self {
            Grid::Values(v) if v.is_empty() => bail!("{what} is empty"),
            Grid::Values(v) if v.iter().any(|x| !x.is_finite()) => bail!("{what} holds a non-finite value"),
            Grid::Range { count, .. } if *count < 2 => bail!("{what} needs count >= 2"),
            Grid::Range { min, max, .. } if !(min.is_finite() && max.is_finite() && min < max) => {
                bail!("{what} needs finite min < max")
            }
            _ => Ok(()),
        }
    }
}

pub fn linspace(min: f64, max: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![min];
    }
    (0..count)
        .map(|k| if k + 1 == count { max } else { min + (max - min) * k as f64 / (count - 1) as f64 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    /// Values along the axis; `ϑ′` values for the direction grid.
    #[serde(default)]
    pub grid: Option<Grid>,
    /// `φ′` values for the direction grid.
    #[serde(default)]
    pub phi_grid: Option<Grid>,
    pub methods: Vec<Method>,
}

impl SweepConfig {
    pub fn validate(&self, kind: ScenarioKind) -> Result<()> {
        if self.methods.is_empty() {
            bail!("sweep.methods is empty");
        }
        let ok = match self.axis {
            SweepAxis::B | SweepAxis::Direction => kind == ScenarioKind::Example1,
            SweepAxis::Omega1 | SweepAxis::Omega2 | SweepAxis::G => kind == ScenarioKind::Example2,
            SweepAxis::T | SweepAxis::Gamma => true,
        };
        if !ok {
            bail!("sweep axis {:?} does not apply to {:?}", self.axis, kind);
        }
        if !self.axis.moves_params() && self.methods.contains(&Method::AnalyticShift) {
            bail!("analytic-shift needs a parameter axis");
        }
        if let Some(g) = &self.grid {
            g.validate("sweep.grid")?;
        }
        if let Some(g) = &self.phi_grid {
            if self.axis != SweepAxis::Direction {
                bail!("sweep.phi_grid only applies to the direction axis");
            }
            g.validate("sweep.phi_grid")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TSweepConfig {
    /// Target times; defaults to 0.5 through 8 in steps of Δt = 0.1.
    #[serde(default)]
    pub grid: Option<Grid>,
    #[serde(default = "no_control")]
    pub method: Method,
}

fn no_control() -> Method {
    Method::NoControl
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveConfig {
    /// Hidden parameter values the estimator stub samples around.
    pub true_params: [f64; 3],
    /// Defaults to the scenario parameters.
    #[serde(default)]
    pub initial_guess: Option<[f64; 3]>,
    pub method: Method,
    pub rounds: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"scenario": {"kind": "example1"}}"#).unwrap();
        let s = cfg.scenario().unwrap();
        assert_eq!(s.noise[0].rate, 0.2);
        assert_eq!((s.horizon.total, s.horizon.dt, s.u_max), (5.0, 0.1, 3.0));
        assert_eq!(cfg.grape.to_config(), GrapeConfig::adam());
    }

    #[test]
    fn rejections() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"scenario": {"kind": "example1"}, "extra": 1}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"scenario": {"kind": "example1", "colour": 1}}"#).is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"scenario": {"kind": "example1", "T": 5, "dt": 0.3}}"#).unwrap();
        assert!(cfg.validate().is_err());
        let cfg: RunConfig = serde_json::from_str(
            r#"{"scenario": {"kind": "example1"}, "sweep": {"axis": "g", "methods": ["no-control"]}}"#,
        )
        .unwrap();
        assert!(cfg.validate().is_err());
        let cfg: RunConfig = serde_json::from_str(
            r#"{"scenario": {"kind": "example1"}, "sweep": {"axis": "b", "grid": {"min": 0, "max": 1, "count": 1}, "methods": ["no-control"]}}"#,
        )
        .unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(Grid::Range { min: 0.0, max: 1.0, count: 3 }.points(), vec![0.0, 0.5, 1.0]);
        let g: Grid = serde_json::from_str("[1, 2]").unwrap();
        assert_eq!(g.points(), vec![1.0, 2.0]);
    }
}
