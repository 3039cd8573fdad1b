//! Parameter controllers applied at interval boundaries.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How `v` evolves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ControllerMode {
    /// Fixed `v`. When absent in a scenario, `v*` is solved from the mean
    /// arrival rates.
    NonAdaptive {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        v: Option<Vec<f64>>,
    },
    /// `v_i ← [v_i + α(λ̂_i + ε/4 - ŝ_i)]_D`.
    AdaptiveTheoretical {
        epsilon: f64,
        alpha: f64,
        projection: f64,
    },
    /// `v_i ← h(...)` for a named rule from a [`HeuristicRegistry`].
    AdaptiveHeuristic {
        rule: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    #[serde(flatten)]
    pub mode: ControllerMode,
    /// Update interval `T`.
    pub interval: f64,
}

impl ControllerConfig {
    pub fn validate(&self, registry: &HeuristicRegistry) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("controller: {m}")));
        if !(self.interval > 0.0 && self.interval.is_finite()) {
            return bad(format!("interval must be positive, got {}", self.interval));
        }
        match &self.mode {
            ControllerMode::NonAdaptive { v } => {
                if v.as_ref().is_some_and(|v| v.iter().any(|x| !x.is_finite())) {
                    return bad("v must be finite".into());
                }
            }
            ControllerMode::AdaptiveTheoretical {
                epsilon,
                alpha,
                projection,
            } => {
                if !(*alpha > 0.0 && *projection > 0.0 && *epsilon >= 0.0) {
                    return bad("need alpha > 0, projection > 0, epsilon >= 0".into());
                }
            }
            ControllerMode::AdaptiveHeuristic { rule, alpha } => {
                if registry.get(rule).is_none() {
                    return bad(format!(
                        "unknown rule {rule:?}; registered: {:?}",
                        registry.names()
                    ));
                }
                if alpha.is_some_and(|a| !(a > 0.0)) {
                    return bad("alpha must be positive".into());
                }
            }
        }
        Ok(())
    }
}

/// `[θ]_D`: the closest point of `[-D, D]`.
pub fn project(theta: f64, d: f64) -> f64 {
    if theta >= 0.0 {
        theta.min(d)
    } else {
        theta.max(-d)
    }
}

/// Per-link quantities visible to an update rule at a boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleInput {
    pub v: f64,
    pub lambda_hat: f64,
    pub s_hat: f64,
    pub queue: f64,
    pub alpha: f64,
}

pub type RuleFn = Arc<dyn Fn(&RuleInput) -> f64 + Send + Sync>;

/// Named update rules.
#[derive(Clone)]
pub struct HeuristicRegistry {
    rules: BTreeMap<String, RuleFn>,
}

impl fmt::Debug for HeuristicRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HeuristicRegistry")
            .field("rules", &self.names())
            .finish()
    }
}

impl Default for HeuristicRegistry {
    /// Built-ins: `log1p_queue` (`v = log(1 + Q)`) and `gradient`
    /// (`v + α(λ̂ - ŝ)`, unprojected).
    fn default() -> Self {
        let mut r = HeuristicRegistry {
            rules: BTreeMap::new(),
        };
        r.register("log1p_queue", |x| x.queue.ln_1p());
        r.register("gradient", |x| x.v + x.alpha * (x.lambda_hat - x.s_hat));
        r
    }
}

impl HeuristicRegistry {
    pub fn register(
        &mut self,
        name: &str,
        rule: impl Fn(&RuleInput) -> f64 + Send + Sync + 'static,
    ) {
        self.rules.insert(name.to_string(), Arc::new(rule));
    }

    pub fn get(&self, name: &str) -> Option<&RuleFn> {
        self.rules.get(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.rules.keys().map(String::as_str).collect()
    }
}

/// A controller resolved against a registry.
#[derive(Clone)]
pub(crate) enum Controller {
    Fixed,
    Theoretical { epsilon: f64, alpha: f64, d: f64 },
    Heuristic { rule: RuleFn, alpha: f64 },
}

impl Controller {
    pub(crate) fn resolve(mode: &ControllerMode, registry: &HeuristicRegistry) -> Result<Self> {
        Ok(match mode {
            ControllerMode::NonAdaptive { .. } => Controller::Fixed,
            ControllerMode::AdaptiveTheoretical {
                epsilon,
                alpha,
                projection,
            } => Controller::Theoretical {
                epsilon: *epsilon,
                alpha: *alpha,
                d: *projection,
            },
            ControllerMode::AdaptiveHeuristic { rule, alpha } => Controller::Heuristic {
                rule: registry
                    .get(rule)
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("unknown rule {rule:?}")))?,
                alpha: alpha.unwrap_or(1.0),
            },
        })
    }

    /// New `v_i` given the interval's empirical rates and the queue at the
    /// boundary.
    pub(crate) fn update(&self, v: f64, lambda_hat: f64, s_hat: f64, queue: f64) -> f64 {
        match self {
            Controller::Fixed => v,
            Controller::Theoretical { epsilon, alpha, d } => {
                project(v + alpha * (lambda_hat + epsilon / 4.0 - s_hat), *d)
            }
            Controller::Heuristic { rule, alpha } => rule(&RuleInput {
                v,
                lambda_hat,
                s_hat,
                queue,
                alpha: *alpha,
            }),
        }
    }
}

/// Controller step for every link at once.
pub fn controller_update(
    mode: &ControllerMode,
    registry: &HeuristicRegistry,
    v: &[f64],
    lambda_hat: &[f64],
    s_hat: &[f64],
    queues: &[f64],
) -> Result<Vec<f64>> {
    let c = Controller::resolve(mode, registry)?;
    Ok((0..v.len())
        .map(|i| c.update(v[i], lambda_hat[i], s_hat[i], queues[i]))
        .collect())
}
