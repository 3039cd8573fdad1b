//! Distributed rate allocation over discretized wireless rate regions.
//!
//! Links pick rate levels through exponential clocks whose parameters are
//! driven by queue state. For fixed parameters `v` the allocation process
//! is a reversible Markov chain with stationary law `π_v(r) ∝ exp(r·v)`;
//! the offered service rate under `π_v` matches any strictly feasible
//! arrival rate for a unique `v*`.
//!
//! Modules:
//! - [`region`] and [`grid`]: rate regions, feasibility and discretization.
//! - [`chain`], [`distribution`] and [`analysis`]: the allocation chain,
//!   its stationary law, uniformization, mixing and conductance.
//! - [`optimizer`]: the concave program whose maximizer is `v*`.
//! - [`sim`]: event-driven simulation with queues and controllers.
//! - [`whitespace`]: multi-band multi-radio scheduling.
//! - [`scenario`] and [`io`]: configuration files and output formats.

pub mod analysis;
pub mod chain;
pub mod distribution;
pub mod error;
pub mod grid;
pub mod io;
pub mod lp;
pub mod model;
pub mod optimizer;
pub mod region;
pub mod scenario;
pub mod sim;
pub mod whitespace;

pub use chain::{AllocationChain, Dtmc};
pub use distribution::{kl_divergence, tv_distance, Distribution};
pub use error::{Error, Result};
pub use grid::{discretize, RateLevelGrid};
pub use model::LinkStateModel;
pub use region::RateRegion;
pub use scenario::Scenario;
pub use sim::{ArrivalProcess, ControllerConfig, ControllerMode, SimConfig, Simulator};
pub use whitespace::{BandSchedule, WhitespaceModel, WhitespaceNetwork};
