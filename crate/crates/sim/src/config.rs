use std::path::Path;

use cqi_core::contspace::{Grid, PropagatorKernel};
use cqi_core::postulates::{InitialState, Readout, Region};
use cqi_core::C64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Chain,
    DetectorCompare,
    TwoPoint,
    Zeno,
    TimeReversedZeno,
    Epr,
    RealismScenario,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::Chain,
        Kind::DetectorCompare,
        Kind::TwoPoint,
        Kind::Zeno,
        Kind::TimeReversedZeno,
        Kind::Epr,
        Kind::RealismScenario,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Chain => "chain",
            Kind::DetectorCompare => "detector-compare",
            Kind::TwoPoint => "two-point",
            Kind::Zeno => "zeno",
            Kind::TimeReversedZeno => "time-reversed-zeno",
            Kind::Epr => "epr",
            Kind::RealismScenario => "realism-scenario",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Kind::Chain => "observer chains: entropy arrow and chain-rule distributions",
            Kind::DetectorCompare => "weakly coupled detector: P_Born, P_RR and P_CQI per refinement level",
            Kind::TwoPoint => "two separated squares: RR excess against the predicted cross term",
            Kind::Zeno => "single-measurement Zeno halving as epsilon is halved",
            Kind::TimeReversedZeno => "time shift recovered after the reversed Zeno interaction",
            Kind::Epr => "EPR pair entropies and no-communication over random local unitaries",
            Kind::RealismScenario => "Alice and Bob reduced states on three slices",
        }
    }

    /// Kinds whose pipeline runs on a configuration-space grid.
    pub fn uses_grid(self) -> bool {
        matches!(self, Kind::DetectorCompare | Kind::TwoPoint)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: String,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default = "empty_object")]
    pub params: serde_json::Value,
    #[serde(default)]
    pub grid: Option<Grid>,
    #[serde(default)]
    pub seed: u64,
    pub output: OutputSpec,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::config(&path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn params<T: DeserializeOwned>(&self) -> Result<T, SimError> {
        serde_json::from_value(self.params.clone()).map_err(|e| SimError::config("params", e))
    }

    /// Structural validation: parameters parse, grid only where it is used.
    pub fn validate(&self) -> Result<(), SimError> {
        if self.output.path.trim().is_empty() {
            return Err(SimError::Config("output.path: must not be empty".into()));
        }
        if let Some(g) = &self.grid {
            if !self.kind.uses_grid() {
                return Err(SimError::Config(format!("grid: kind `{}` does not use a grid", self.kind.name())));
            }
            g.validate().map_err(|e| SimError::config("grid", e))?;
        }
        match self.kind {
            Kind::Chain => self.params::<ChainParams>()?.validate(),
            Kind::DetectorCompare => self.params::<DetectorParams>().map(|_| ()),
            Kind::TwoPoint => self.params::<TwoPointParams>().map(|_| ()),
            Kind::Zeno => self.params::<ZenoParams>()?.validate(),
            Kind::TimeReversedZeno => self.params::<TimeReversedParams>().map(|_| ()),
            Kind::Epr => self.params::<EprParams>().map(|_| ()),
            Kind::RealismScenario => self.params::<RealismParams>().map(|_| ()),
        }
    }
}

/// A complex number written as `0.6` or `[0.6, 0.0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Complex {
    Real(f64),
    Pair([f64; 2]),
}

impl Complex {
    pub fn value(self) -> C64 {
        match self {
            Complex::Real(r) => C64::new(r, 0.0),
            Complex::Pair([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomChains {
    pub count: usize,
    #[serde(default = "four")]
    pub max_dim: usize,
    #[serde(default = "four")]
    pub max_observers: usize,
}

fn four() -> usize {
    4
}

/// Either one explicit chain or a batch of random ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainParams {
    pub initial: Option<Vec<Complex>>,
    /// Row-major overlap matrices `U_ij = ⟨b_j|a_i⟩`.
    pub overlaps: Option<Vec<Vec<Vec<Complex>>>>,
    pub random: Option<RandomChains>,
}

impl ChainParams {
    pub fn validate(&self) -> Result<(), SimError> {
        match (&self.initial, &self.random) {
            (Some(_), Some(_)) => Err(SimError::Config("params: give either `initial` or `random`, not both".into())),
            (None, None) => Err(SimError::Config("params: missing field `initial` (or `random`)".into())),
            (None, Some(_)) if self.overlaps.is_some() => {
                Err(SimError::Config("params.overlaps: only valid with `initial`".into()))
            }
            (None, Some(r)) => {
                if r.count == 0 {
                    return Err(SimError::Config("params.random.count: must be positive".into()));
                }
                if r.max_dim < 2 || r.max_dim > 6 {
                    return Err(SimError::Config(format!("params.random.max_dim: {} not in 2..=6", r.max_dim)));
                }
                if r.max_observers < 1 || r.max_observers > 6 {
                    return Err(SimError::Config(format!(
                        "params.random.max_observers: {} not in 1..=6",
                        r.max_observers
                    )));
                }
                Ok(())
            }
            (Some(_), None) => Ok(()),
        }
    }
}

/// Overrides of the benchmark detector experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorParams {
    pub kernel: Option<PropagatorKernel>,
    pub psi0: Option<InitialState>,
    pub t0: Option<f64>,
    pub region_r: Option<Region>,
    pub r_dt: Option<f64>,
    pub coupling_alpha: Option<f64>,
    pub potential_v: Option<f64>,
    pub readout: Option<Readout>,
    pub pert_tol: Option<f64>,
    pub xcheck_tol: Option<f64>,
    pub offdiag_tol: Option<f64>,
    /// Square sides (centred on `shrink_center`) for the small-region sequence.
    pub shrink_sides: Option<Vec<f64>>,
    pub shrink_center: Option<[f64; 2]>,
    /// Later readout positions at which `P_CQI` is recomputed.
    pub readout_shifts: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoPointParams {
    pub a: [f64; 2],
    pub b: [f64; 2],
    /// Square side; two grid spacings when absent.
    pub side: Option<f64>,
    pub kernel: Option<PropagatorKernel>,
    pub psi0: Option<InitialState>,
    pub coupling_alpha: Option<f64>,
    pub potential_v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZenoParams {
    pub omega: f64,
    pub epsilon: Option<f64>,
    /// `ωε`; alternative to `epsilon`.
    pub omega_epsilon: Option<f64>,
    #[serde(default = "four")]
    pub halvings: usize,
}

impl ZenoParams {
    pub fn validate(&self) -> Result<(), SimError> {
        match (self.epsilon, self.omega_epsilon) {
            (Some(_), Some(_)) => Err(SimError::Config("params: give either `epsilon` or `omega_epsilon`".into())),
            (None, None) => Err(SimError::Config("params: missing field `epsilon` (or `omega_epsilon`)".into())),
            _ => Ok(()),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or_else(|| self.omega_epsilon.unwrap_or(0.0) / self.omega)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeReversedParams {
    pub omega: f64,
    #[serde(default = "default_tr_epsilon")]
    pub epsilon: f64,
    pub thetas: Option<Vec<f64>>,
    /// Evenly spaced angles over `[−π/4, π/4]` when `thetas` is absent.
    #[serde(default = "fifty")]
    pub n_theta: usize,
}

fn default_tr_epsilon() -> f64 {
    0.01
}

fn fifty() -> usize {
    50
}

impl TimeReversedParams {
    pub fn thetas(&self) -> Vec<f64> {
        if let Some(t) = &self.thetas {
            return t.clone();
        }
        let q = std::f64::consts::FRAC_PI_4;
        match self.n_theta {
            0 => Vec::new(),
            1 => vec![0.0],
            n => (0..n).map(|i| -q + 2.0 * q * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EprParams {
    pub alpha: Complex,
    pub beta: Complex,
    #[serde(default = "five_hundred")]
    pub n_unitaries: usize,
}

fn five_hundred() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealismParams {
    pub alpha: Complex,
    pub beta: Complex,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<ExperimentConfig, SimError> {
        let c = ExperimentConfig::from_json(text)?;
        c.validate()?;
        Ok(c)
    }

    #[test]
    fn missing_omega_is_named() {
        let e = cfg(r#"{"kind":"zeno","params":{"epsilon":0.05},"output":{"path":"z.csv"}}"#).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(e.to_string().contains("omega"), "{e}");
    }

    #[test]
    fn unknown_fields_and_kinds() {
        let e = cfg(r#"{"kind":"zeno","params":{"omega":1,"epsilon":0.05,"omgea":2},"output":{"path":"z.csv"}}"#)
            .unwrap_err();
        assert!(e.to_string().contains("omgea"), "{e}");
        let e = cfg(r#"{"kind":"zen","output":{"path":"z.csv"}}"#).unwrap_err();
        assert!(e.to_string().contains("zen"), "{e}");
    }

    #[test]
    fn grid_only_for_grid_kinds() {
        let grid = r#"{"x_min":-20,"x_max":20,"nx":512,"t_min":0,"t_max":0,"nt":1}"#;
        let z = format!(
            r#"{{"kind":"zeno","params":{{"omega":1,"epsilon":0.05}},"grid":{grid},"output":{{"path":"z.csv"}}}}"#
        );
        assert!(cfg(&z).unwrap_err().to_string().starts_with("config error: grid"));
        let d = format!(r#"{{"kind":"detector-compare","grid":{grid},"output":{{"path":"d.json","format":"json"}}}}"#);
        let c = cfg(&d).unwrap();
        assert_eq!(c.output.format, Format::Json);
    }

    #[test]
    fn complex_forms() {
        let p: RealismParams = serde_json::from_str(r#"{"alpha":0.6,"beta":[0,0.8]}"#).unwrap();
        assert_eq!(p.alpha.value(), C64::new(0.6, 0.0));
        assert_eq!(p.beta.value(), C64::new(0.0, 0.8));
    }

    #[test]
    fn default_theta_sweep() {
        let p: TimeReversedParams = serde_json::from_str(r#"{"omega":2}"#).unwrap();
        let t = p.thetas();
        assert_eq!(t.len(), 50);
        assert_eq!(t[0], -std::f64::consts::FRAC_PI_4);
        assert!((t[49] - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn chain_params_exclusive() {
        let e = cfg(r#"{"kind":"chain","params":{},"output":{"path":"c.csv"}}"#).unwrap_err();
        assert!(e.to_string().contains("initial"));
        assert!(cfg(r#"{"kind":"chain","params":{"random":{"count":3}},"output":{"path":"c.csv"}}"#).is_ok());
    }
}
