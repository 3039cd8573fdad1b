//! Scenario files: a model, arrivals, a controller and run settings in one
//! TOML document.

use serde::{Deserialize, Serialize};

use crate::chain::AllocationChain;
use crate::error::{Error, Result};
use crate::grid::{discretize_with_cap, RateLevelGrid, DEFAULT_VECTOR_CAP};
use crate::lp::max_scaling;
use crate::model::LinkStateModel;
use crate::optimizer::{solve_vstar, ProgramSpec, SolveOptions};
use crate::region::RateRegion;
use crate::sim::{
    ArrivalProcess, ClockSampling, ControllerConfig, ControllerMode, HeuristicRegistry, SimConfig,
    Simulator,
};
use crate::whitespace::{WhitespaceModel, WhitespaceNetwork, WHITESPACE_STATE_LIMIT};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Per-link levels; overrides `epsilon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalKind {
    BernoulliScaled,
    DeterministicBatch,
    TraceReplay,
}

/// Arrival settings. Mean rates come from `rates`, or from `load`: a
/// fraction of the largest symmetric point `θ·1` of the throughput region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalSpec {
    pub kind: ArrivalKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
    /// Increment size `K` for Bernoulli arrivals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub increment: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default)]
    pub clock: ClockSampling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_interval: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_events: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_queues: Option<Vec<f64>>,
    /// Starting `v` for adaptive controllers; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_v: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Parameter for `stationary` and `mixing`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    /// Target TV distance for `mixing`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// Target rates for `solve-vstar`; the arrival means when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    /// Slack of the shifted program.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub horizon: f64,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RateRegion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<WhitespaceNetwork>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrivals: Option<ArrivalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerConfig>,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
}

fn one() -> usize {
    1
}

fn field(path: &str, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{path}: {e}"))
}

/// The state model a scenario describes.
#[derive(Debug, Clone)]
pub enum ScenarioModel {
    Grid(RateLevelGrid),
    Whitespace(WhitespaceModel),
}

impl ScenarioModel {
    pub fn as_model(&self) -> &(dyn LinkStateModel + Sync) {
        match self {
            ScenarioModel::Grid(g) => g,
            ScenarioModel::Whitespace(w) => w,
        }
    }

    pub fn num_links(&self) -> usize {
        self.as_model().num_links()
    }

    pub fn chain(&self, v: &[f64]) -> Result<AllocationChain> {
        match self {
            ScenarioModel::Grid(g) => AllocationChain::new(g, v),
            ScenarioModel::Whitespace(w) => AllocationChain::from_model(w, v, WHITESPACE_STATE_LIMIT),
        }
    }

    /// Every feasible rate vector.
    pub fn rate_vectors(&self) -> Result<Vec<Vec<f64>>> {
        match self {
            ScenarioModel::Grid(g) => Ok(g.vectors().to_vec()),
            ScenarioModel::Whitespace(_) => {
                Ok(self.chain(&vec![0.0; self.num_links()])?.rate_vectors().to_vec())
            }
        }
    }

    /// Largest `θ` with `θ·1` in the convex hull of the rate vectors.
    pub fn symmetric_capacity(&self) -> Result<f64> {
        let ones = vec![1.0; self.num_links()];
        max_scaling(&self.rate_vectors()?, &ones)
    }
}

impl Scenario {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        Ok(sc)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Checks everything a run would need and builds the model.
    pub fn validate(&self) -> Result<ScenarioModel> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(field("horizon", format!("must be positive, got {}", self.horizon)));
        }
        if self.replications == 0 {
            return Err(field("replications", "must be at least 1"));
        }
        let model = self.build_model()?;
        let n = model.num_links();
        let check_len = |path: &str, x: &Option<Vec<f64>>| match x {
            Some(x) if x.len() != n => Err(field(path, format!("expected {n} entries, got {}", x.len()))),
            _ => Ok(()),
        };
        check_len("simulation.initial_queues", &self.simulation.initial_queues)?;
        check_len("simulation.initial_v", &self.simulation.initial_v)?;
        check_len("analysis.v", &self.analysis.v)?;
        check_len("analysis.lambda", &self.analysis.lambda)?;
        if let Some(rho) = self.analysis.rho {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(field("analysis.rho", "must lie in (0, 1)"));
            }
        }
        if self.simulation.sample_interval.is_some_and(|s| !(s > 0.0)) {
            return Err(field("simulation.sample_interval", "must be positive"));
        }
        if let Some(c) = &self.controller {
            c.validate(&HeuristicRegistry::default())
                .map_err(|e| field("controller", strip(e)))?;
            if let ControllerMode::NonAdaptive { v: Some(v) } = &c.mode {
                check_len("controller.v", &Some(v.clone()))?;
            }
        }
        if self.arrivals.is_some() {
            self.arrival_process(&model)?;
        }
        Ok(model)
    }

    fn build_model(&self) -> Result<ScenarioModel> {
        match (&self.region, &self.network) {
            (Some(region), None) => {
                region.validate().map_err(|e| field("region", e))?;
                let g = self
                    .grid
                    .as_ref()
                    .ok_or_else(|| field("grid", "required with a region"))?;
                let (eps, levels) = match (g.epsilon, &g.levels) {
                    (_, Some(l)) => (g.epsilon.unwrap_or(0.0), Some(l.as_slice())),
                    (Some(e), None) => (e, None),
                    (None, None) => return Err(field("grid", "needs epsilon or levels")),
                };
                let grid = discretize_with_cap(region, eps, levels, g.cap.unwrap_or(DEFAULT_VECTOR_CAP))
                    .map_err(|e| field("grid", e))?;
                Ok(ScenarioModel::Grid(grid))
            }
            (None, Some(net)) => {
                if self.grid.is_some() {
                    return Err(field("grid", "not used with a network"));
                }
                Ok(ScenarioModel::Whitespace(
                    WhitespaceModel::new(net).map_err(|e| field("network", e))?,
                ))
            }
            (Some(_), Some(_)) => Err(field("region", "give either region or network, not both")),
            (None, None) => Err(field("region", "missing; give region or network")),
        }
    }

    /// Mean arrival rates, resolving `load` against the model.
    pub fn arrival_rates(&self, model: &ScenarioModel) -> Result<Vec<f64>> {
        let a = self
            .arrivals
            .as_ref()
            .ok_or_else(|| field("arrivals", "missing"))?;
        let n = model.num_links();
        match (&a.rates, a.load) {
            (Some(r), None) => {
                if r.len() != n {
                    return Err(field("arrivals.rates", format!("expected {n} entries, got {}", r.len())));
                }
                Ok(r.clone())
            }
            (None, Some(load)) => {
                if !(load >= 0.0 && load.is_finite()) {
                    return Err(field("arrivals.load", "must be finite and nonnegative"));
                }
                let theta = model.symmetric_capacity().map_err(|e| field("arrivals.load", e))?;
                Ok(vec![load * theta; n])
            }
            (Some(_), Some(_)) => Err(field("arrivals", "give rates or load, not both")),
            (None, None) if a.kind == ArrivalKind::TraceReplay => Ok(Vec::new()),
            (None, None) => Err(field("arrivals", "needs rates or load")),
        }
    }

    pub fn arrival_process(&self, model: &ScenarioModel) -> Result<ArrivalProcess> {
        let a = self
            .arrivals
            .as_ref()
            .ok_or_else(|| field("arrivals", "missing"))?;
        let n = model.num_links();
        let p = match a.kind {
            ArrivalKind::BernoulliScaled => ArrivalProcess::BernoulliScaled {
                rates: self.arrival_rates(model)?,
                increment: a.increment.unwrap_or(1.0),
            },
            ArrivalKind::DeterministicBatch => {
                let period = a
                    .period
                    .ok_or_else(|| field("arrivals.period", "required for deterministic_batch"))?;
                ArrivalProcess::DeterministicBatch {
                    batch: self
                        .arrival_rates(model)?
                        .iter()
                        .map(|r| r * period as f64)
                        .collect(),
                    period,
                }
            }
            ArrivalKind::TraceReplay => ArrivalProcess::TraceReplay {
                slots: a
                    .slots
                    .clone()
                    .ok_or_else(|| field("arrivals.slots", "required for trace_replay"))?,
            },
        };
        p.validate().map_err(|e| field("arrivals", strip(e)))?;
        if p.num_links() != n {
            return Err(field("arrivals", format!("expected {n} links, got {}", p.num_links())));
        }
        Ok(p)
    }

    /// Simulation settings with optional overrides.
    pub fn sim_config(&self, seed: Option<u64>, horizon: Option<f64>) -> SimConfig {
        SimConfig {
            horizon: horizon.unwrap_or(self.horizon),
            seed: seed.unwrap_or(self.seed),
            sample_interval: self.simulation.sample_interval,
            clock: self.simulation.clock,
            max_events: self.simulation.max_events,
            initial_queues: self.simulation.initial_queues.clone(),
            record_trace: true,
            record_intervals: true,
        }
    }

    /// Starting `v`: the configured one, `v*` of the arrival means for a
    /// non-adaptive controller without `v`, otherwise `initial_v` or zero.
    pub fn initial_v(&self, model: &ScenarioModel) -> Result<Vec<f64>> {
        let n = model.num_links();
        let ctl = self
            .controller
            .as_ref()
            .ok_or_else(|| field("controller", "missing"))?;
        match &ctl.mode {
            ControllerMode::NonAdaptive { v: Some(v) } => Ok(v.clone()),
            ControllerMode::NonAdaptive { v: None } => {
                let lambda = self.arrival_process(model)?.mean_rates();
                let chain = model.chain(&vec![0.0; n])?;
                let spec = ProgramSpec::from_chain(&chain, &lambda, 0.0)?;
                Ok(solve_vstar(&spec, &SolveOptions::default())?.v_star)
            }
            _ => Ok(self.simulation.initial_v.clone().unwrap_or_else(|| vec![0.0; n])),
        }
    }

    pub fn simulator<'m>(&self, model: &'m ScenarioModel) -> Result<Simulator<'m, dyn LinkStateModel + Sync + 'm>> {
        let ctl = self
            .controller
            .clone()
            .ok_or_else(|| field("controller", "missing"))?;
        let v0 = self.initial_v(model)?;
        Simulator::new(model.as_model(), self.arrival_process(model)?, ctl, v0)
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

/// Bundled scenario files by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("mac_rho09", include_str!("../scenarios/mac_rho09.toml")),
    ("mac_rho11", include_str!("../scenarios/mac_rho11.toml")),
    ("whitespace_3x2", include_str!("../scenarios/whitespace_3x2.toml")),
];

pub fn bundled(name: &str) -> Option<Scenario> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| Scenario::from_toml_str(text).expect("bundled scenario parses"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_validate() {
        for (name, _) in BUNDLED {
            let sc = bundled(name).unwrap();
            sc.validate().unwrap();
        }
    }

    #[test]
    fn mac_load_resolves_against_the_symmetric_point() {
        let sc = bundled("mac_rho09").unwrap();
        let m = sc.validate().unwrap();
        let r = sc.arrival_rates(&m).unwrap();
        assert!((r[0] - 0.63).abs() < 1e-9 && (r[1] - 0.63).abs() < 1e-9);
        let sc = bundled("mac_rho11").unwrap();
        let r = sc.arrival_rates(&sc.validate().unwrap()).unwrap();
        assert!((r[0] - 0.77).abs() < 1e-9);
    }

    #[test]
    fn errors_name_the_field() {
        let mut sc = bundled("mac_rho09").unwrap();
        sc.horizon = 0.0;
        assert!(sc.validate().unwrap_err().to_string().contains("horizon"));
        let mut sc = bundled("mac_rho09").unwrap();
        sc.analysis.v = Some(vec![1.0]);
        assert!(sc.validate().unwrap_err().to_string().contains("analysis.v"));
        let mut sc = bundled("mac_rho09").unwrap();
        sc.arrivals.as_mut().unwrap().load = Some(2.0);
        assert!(sc.validate().unwrap_err().to_string().contains("arrivals"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = Scenario::from_toml_str("horizon = 1.0\n[grid]\nepsilon = \"x\"\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn non_adaptive_without_v_solves_for_vstar() {
        let mut sc = bundled("mac_rho09").unwrap();
        sc.controller = Some(ControllerConfig {
            mode: ControllerMode::NonAdaptive { v: None },
            interval: 10.0,
        });
        sc.arrivals.as_mut().unwrap().load = Some(0.5);
        let m = sc.validate().unwrap();
        let v = sc.initial_v(&m).unwrap();
        let s = m.chain(&v).unwrap().offered_service();
        assert!((s[0] - 0.35).abs() < 1e-7 && (s[1] - 0.35).abs() < 1e-7);
    }
}
