//! Queue simulation driven by the allocation chain.

mod accum;
pub mod arrivals;
pub mod controller;
pub mod engine;
pub mod params;

pub use arrivals::{ArrivalProcess, ArrivalSampler};
pub use controller::{
    controller_update, project, ControllerConfig, ControllerMode, HeuristicRegistry, RuleInput,
};
pub use engine::{
    integrate_service, ClockSampling, EventKind, IntervalRecord, Occupation, Run, SimConfig,
    SimRun, SimSummary, Simulator, TraceRecord,
};
pub use params::{theoretical_params, TheoreticalParams};
