//! Event-driven simulation of queues served by the allocation chain.
//!
//! Between consecutive events every rate is constant, so the fluid queue
//! integral is computed exactly. Events are clock ticks, arrivals at
//! integral times, controller boundaries `l·T`, trace samples and the
//! horizon. A queue that empties mid-interval simply stops being served;
//! no arrival can land before the next event.
//!
//! RNG layout for seed `s`: stream 0 drives the clocks, stream `1 + i`
//! drives link `i`'s arrivals. All streams are ChaCha8 keyed by `s`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::accum::Accum;
use super::arrivals::{ArrivalProcess, ArrivalSampler};
use super::controller::{Controller, ControllerConfig, HeuristicRegistry};
use crate::error::{Error, Result};
use crate::model::{LinkStateModel, LocalState};

/// How the next clock tick is drawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockSampling {
    /// One clock per (link, level), including the current level. Ticks
    /// towards infeasible or current levels are no-ops.
    #[default]
    Aggregate,
    /// Only ticks that change the allocation are drawn. Same law for the
    /// allocation path with far fewer events when `v` is large.
    Jump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub horizon: f64,
    pub seed: u64,
    /// Trace sample period; boundaries are always recorded when tracing.
    pub sample_interval: Option<f64>,
    pub clock: ClockSampling,
    /// Stop after this many clock ticks even if the horizon is not reached.
    pub max_events: Option<u64>,
    /// `Q(0)`; all zero when absent.
    pub initial_queues: Option<Vec<f64>>,
    pub record_trace: bool,
    pub record_intervals: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon: 1000.0,
            seed: 0,
            sample_interval: None,
            clock: ClockSampling::Aggregate,
            max_events: None,
            initial_queues: None,
            record_trace: false,
            record_intervals: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Start,
    Clock,
    Arrival,
    Boundary,
    Sample,
    End,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Start => "start",
            EventKind::Clock => "clock",
            EventKind::Arrival => "arrival",
            EventKind::Boundary => "boundary",
            EventKind::Sample => "sample",
            EventKind::End => "end",
        }
    }
}

/// Snapshot of the simulation at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub kind: EventKind,
    pub queues: Vec<f64>,
    pub rates: Vec<f64>,
    pub v: Vec<f64>,
    pub state: LocalState,
    /// Cumulative arrivals `A_i(t)`.
    pub arrivals: Vec<f64>,
    /// Cumulative served work.
    pub served: Vec<f64>,
}

/// One controller interval `[τ_l, τ_{l+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub start: f64,
    pub end: f64,
    pub lambda_hat: Vec<f64>,
    pub s_hat: Vec<f64>,
    /// `v` in force during the interval.
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occupation {
    pub state: LocalState,
    pub rates: Vec<f64>,
    /// Fraction of simulated time spent in `state`.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub seed: u64,
    /// Time actually simulated.
    pub duration: f64,
    pub clock_ticks: u64,
    pub transitions: u64,
    pub initial_queues: Vec<f64>,
    pub final_queues: Vec<f64>,
    /// `Q_i(t) / t` at the end.
    pub queue_slope: Vec<f64>,
    pub arrival_rate: Vec<f64>,
    pub throughput: Vec<f64>,
    /// Time average of the allocated rate regardless of queue state.
    pub offered: Vec<f64>,
    pub final_v: Vec<f64>,
    /// Largest `|A_i - served_i - (Q_i - Q_i(0))|` seen at any record.
    pub conservation_error: f64,
    pub occupation: Vec<Occupation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRun {
    pub summary: SimSummary,
    pub trace: Vec<TraceRecord>,
    pub intervals: Vec<IntervalRecord>,
}

/// Fluid service over `[from_t, to_t]` at constant `rate`: returns
/// `(served, queue_after)`.
pub fn integrate_service(queue: f64, rate: f64, from_t: f64, to_t: f64) -> Result<(f64, f64)> {
    if !(to_t >= from_t) {
        return Err(Error::Simulation(format!(
            "negative interval [{from_t}, {to_t}]"
        )));
    }
    let cap = rate * (to_t - from_t);
    if cap >= queue {
        Ok((queue, 0.0))
    } else {
        Ok((cap, queue - cap))
    }
}

/// A model, its arrivals and a controller.
#[derive(Debug, Clone)]
pub struct Simulator<'m, M: LinkStateModel + ?Sized> {
    model: &'m M,
    arrivals: ArrivalProcess,
    controller: ControllerConfig,
    registry: HeuristicRegistry,
    v0: Vec<f64>,
}

impl<'m, M: LinkStateModel + ?Sized> Simulator<'m, M> {
    /// `v0` is the starting parameter; it stays put in non-adaptive mode.
    pub fn new(
        model: &'m M,
        arrivals: ArrivalProcess,
        controller: ControllerConfig,
        v0: Vec<f64>,
    ) -> Result<Self> {
        Self::with_registry(model, arrivals, controller, v0, HeuristicRegistry::default())
    }

    pub fn with_registry(
        model: &'m M,
        arrivals: ArrivalProcess,
        controller: ControllerConfig,
        v0: Vec<f64>,
        registry: HeuristicRegistry,
    ) -> Result<Self> {
        let n = model.num_links();
        for got in [arrivals.num_links(), v0.len()] {
            if got != n {
                return Err(Error::DimensionMismatch { expected: n, got });
            }
        }
        arrivals.validate()?;
        controller.validate(&registry)?;
        if v0.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("initial v must be finite".into()));
        }
        Ok(Simulator {
            model,
            arrivals,
            controller,
            registry,
            v0,
        })
    }

    pub fn model(&self) -> &M {
        self.model
    }

    pub fn arrivals(&self) -> &ArrivalProcess {
        &self.arrivals
    }

    /// Prepared run, advanced one event at a time with [`Run::step`].
    pub fn start(&self, cfg: &SimConfig) -> Result<Run<'_, M>> {
        Run::new(self, cfg)
    }

    pub fn run(&self, cfg: &SimConfig) -> Result<SimRun> {
        let mut run = self.start(cfg)?;
        while run.step()?.is_some() {}
        Ok(run.finish())
    }

    /// Independent runs for each seed, in parallel.
    pub fn replicate(&self, cfg: &SimConfig, seeds: &[u64]) -> Vec<Result<SimRun>>
    where
        M: Sync,
    {
        seeds
            .par_iter()
            .map(|&seed| {
                let cfg = SimConfig {
                    seed,
                    ..cfg.clone()
                };
                self.run(&cfg)
            })
            .collect()
    }
}

/// In-flight simulation.
pub struct Run<'s, M: LinkStateModel + ?Sized> {
    model: &'s M,
    controller: Controller,
    interval: f64,
    cfg: SimConfig,
    clock_rng: ChaCha8Rng,
    sampler: ArrivalSampler,

    t: f64,
    state: LocalState,
    rates: Vec<f64>,
    v: Vec<f64>,
    queues: Vec<Accum>,
    q0: Vec<f64>,
    arrived: Vec<Accum>,
    served: Vec<Accum>,
    offered: Vec<Accum>,

    // Clock bookkeeping: per-link weights exp(r_ij v_i) for every level.
    weights: Vec<Vec<f64>>,
    next_clock: Option<f64>,
    moves: Vec<(usize, u32, f64)>,

    next_slot: u64,
    next_boundary: u64,
    next_sample: u64,
    boundary_arrived: Vec<f64>,
    boundary_offered: Vec<f64>,

    occ_index: HashMap<LocalState, usize>,
    occ: Vec<(LocalState, Accum)>,
    cur_occ: usize,

    clock_ticks: u64,
    transitions: u64,
    conservation_error: f64,
    trace: Vec<TraceRecord>,
    intervals: Vec<IntervalRecord>,
    slot_buf: Vec<f64>,
    done: bool,
}

impl<'s, M: LinkStateModel + ?Sized> Run<'s, M> {
    fn new(sim: &'s Simulator<'_, M>, cfg: &SimConfig) -> Result<Self> {
        if !(cfg.horizon > 0.0 && cfg.horizon.is_finite()) {
            return Err(Error::Config(format!(
                "horizon must be positive and finite, got {}",
                cfg.horizon
            )));
        }
        if cfg.sample_interval.is_some_and(|s| !(s > 0.0)) {
            return Err(Error::Config("sample_interval must be positive".into()));
        }
        let n = sim.model.num_links();
        let q0 = cfg.initial_queues.clone().unwrap_or_else(|| vec![0.0; n]);
        if q0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: q0.len(),
            });
        }
        if q0.iter().any(|q| !(*q >= 0.0 && q.is_finite())) {
            return Err(Error::Config("initial queues must be finite and >= 0".into()));
        }
        let mut clock_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        clock_rng.set_stream(0);
        let state = vec![0u32; n];
        let rates = sim.model.rate_vector(&state);
        let mut run = Run {
            model: sim.model,
            controller: Controller::resolve(&sim.controller.mode, &sim.registry)?,
            interval: sim.controller.interval,
            cfg: cfg.clone(),
            clock_rng,
            sampler: ArrivalSampler::new(sim.arrivals.clone(), cfg.seed, 1),
            t: 0.0,
            state: state.clone(),
            rates,
            v: sim.v0.clone(),
            queues: q0.iter().map(|&q| Accum::new(q)).collect(),
            q0,
            arrived: vec![Accum::default(); n],
            served: vec![Accum::default(); n],
            offered: vec![Accum::default(); n],
            weights: Vec::new(),
            next_clock: None,
            moves: Vec::new(),
            next_slot: 1,
            next_boundary: 1,
            next_sample: 1,
            boundary_arrived: vec![0.0; n],
            boundary_offered: vec![0.0; n],
            occ_index: HashMap::from([(state.clone(), 0)]),
            occ: vec![(state, Accum::default())],
            cur_occ: 0,
            clock_ticks: 0,
            transitions: 0,
            conservation_error: 0.0,
            trace: Vec::new(),
            intervals: Vec::new(),
            slot_buf: vec![0.0; n],
            done: false,
        };
        run.refresh_weights()?;
        run.record(EventKind::Start);
        Ok(run)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn queues(&self) -> Vec<f64> {
        self.queues.iter().map(Accum::value).collect()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn state(&self) -> &[u32] {
        &self.state
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn clock_ticks(&self) -> u64 {
        self.clock_ticks
    }

    fn refresh_weights(&mut self) -> Result<()> {
        let n = self.model.num_links();
        self.weights = (0..n)
            .map(|i| {
                self.model
                    .local_rates(i)
                    .iter()
                    .map(|r| (r * self.v[i]).exp())
                    .collect()
            })
            .collect();
        if self.weights.iter().flatten().any(|w| !w.is_finite()) {
            return Err(self.diagnostic("clock rate overflow"));
        }
        self.next_clock = None;
        Ok(())
    }

    fn diagnostic(&self, what: &str) -> Error {
        Error::Simulation(format!(
            "{what} at t={}: v={:?} Q={:?} state={:?}",
            self.t,
            self.v,
            self.queues(),
            self.state
        ))
    }

    fn total_clock_rate(&mut self) -> f64 {
        match self.cfg.clock {
            ClockSampling::Aggregate => self.weights.iter().flatten().sum(),
            ClockSampling::Jump => {
                self.moves.clear();
                for i in 0..self.state.len() {
                    for (j, &w) in self.weights[i].iter().enumerate() {
                        let j = j as u32;
                        if j != self.state[i] && self.model.admits(&self.state, i, j) {
                            self.moves.push((i, j, w));
                        }
                    }
                }
                self.moves.iter().map(|m| m.2).sum()
            }
        }
    }

    fn schedule_clock(&mut self) -> f64 {
        if let Some(c) = self.next_clock {
            return c;
        }
        let total = self.total_clock_rate();
        let c = if total > 0.0 {
            let e: f64 = self.clock_rng.sample(Exp1);
            self.t + e / total
        } else {
            f64::INFINITY
        };
        self.next_clock = Some(c);
        c
    }

    /// Picks the ticking clock and applies it. Returns whether the
    /// allocation changed.
    fn fire_clock(&mut self) -> bool {
        self.clock_ticks += 1;
        let (link, level) = match self.cfg.clock {
            ClockSampling::Aggregate => {
                let total: f64 = self.weights.iter().flatten().sum();
                let mut u = self.clock_rng.random::<f64>() * total;
                let mut pick = None;
                'outer: for (i, ws) in self.weights.iter().enumerate() {
                    for (j, &w) in ws.iter().enumerate() {
                        if u < w {
                            pick = Some((i, j as u32));
                            break 'outer;
                        }
                        u -= w;
                    }
                }
                // Rounding can leave u just past the last weight.
                pick.unwrap_or_else(|| {
                    let i = self.weights.len() - 1;
                    (i, self.weights[i].len() as u32 - 1)
                })
            }
            ClockSampling::Jump => {
                let total: f64 = self.moves.iter().map(|m| m.2).sum();
                let mut u = self.clock_rng.random::<f64>() * total;
                let mut pick = *self.moves.last().expect("jump with no moves");
                for &m in &self.moves {
                    if u < m.2 {
                        pick = m;
                        break;
                    }
                    u -= m.2;
                }
                (pick.0, pick.1)
            }
        };
        if level == self.state[link] || !self.model.admits(&self.state, link, level) {
            return false;
        }
        self.state[link] = level;
        self.rates[link] = self.model.local_rates(link)[level as usize];
        self.transitions += 1;
        self.cur_occ = match self.occ_index.get(&self.state) {
            Some(&k) => k,
            None => {
                let k = self.occ.len();
                self.occ_index.insert(self.state.clone(), k);
                self.occ.push((self.state.clone(), Accum::default()));
                k
            }
        };
        true
    }

    /// Serves queues at the current rates up to time `to`.
    fn advance(&mut self, to: f64) -> Result<()> {
        let dt = to - self.t;
        if dt > 0.0 {
            for i in 0..self.rates.len() {
                let r = self.rates[i];
                self.offered[i].add(r * dt);
                let q = self.queues[i].value();
                let (s, _) = integrate_service(q, r, self.t, to)?;
                if s == q {
                    self.queues[i] = Accum::default();
                } else {
                    self.queues[i].add(-s);
                }
                self.served[i].add(s);
            }
            self.occ[self.cur_occ].1.add(dt);
        }
        self.t = to;
        if !self.t.is_finite() || self.queues.iter().any(|q| !q.value().is_finite()) {
            return Err(self.diagnostic("non-finite state"));
        }
        Ok(())
    }

    fn apply_arrivals(&mut self) {
        let slot = self.next_slot;
        self.sampler.sample(slot, &mut self.slot_buf);
        for i in 0..self.slot_buf.len() {
            let a = self.slot_buf[i];
            if a != 0.0 {
                self.arrived[i].add(a);
                self.queues[i].add(a);
            }
        }
        self.next_slot += 1;
    }

    fn apply_boundary(&mut self) -> Result<()> {
        let t_len = self.interval;
        let n = self.v.len();
        let mut lambda_hat = vec![0.0; n];
        let mut s_hat = vec![0.0; n];
        for i in 0..n {
            let a = self.arrived[i].value();
            let o = self.offered[i].value();
            lambda_hat[i] = (a - self.boundary_arrived[i]) / t_len;
            s_hat[i] = (o - self.boundary_offered[i]) / t_len;
            self.boundary_arrived[i] = a;
            self.boundary_offered[i] = o;
        }
        if self.cfg.record_intervals {
            self.intervals.push(IntervalRecord {
                start: self.t - t_len,
                end: self.t,
                lambda_hat: lambda_hat.clone(),
                s_hat: s_hat.clone(),
                v: self.v.clone(),
            });
        }
        if !matches!(self.controller, Controller::Fixed) {
            let new_v: Vec<f64> = (0..n)
                .map(|i| {
                    self.controller
                        .update(self.v[i], lambda_hat[i], s_hat[i], self.queues[i].value())
                })
                .collect();
            if new_v.iter().any(|x| !x.is_finite()) {
                return Err(self.diagnostic("controller produced non-finite v"));
            }
            if new_v != self.v {
                self.v = new_v;
                self.refresh_weights()?;
            }
        }
        self.next_boundary += 1;
        Ok(())
    }

    fn record(&mut self, kind: EventKind) {
        let mut worst: f64 = 0.0;
        for i in 0..self.v.len() {
            let lhs = self.arrived[i].value() - self.served[i].value();
            let rhs = self.queues[i].value() - self.q0[i];
            worst = worst.max((lhs - rhs).abs());
        }
        self.conservation_error = self.conservation_error.max(worst);
        if self.cfg.record_trace {
            self.trace.push(TraceRecord {
                t: self.t,
                kind,
                queues: self.queues(),
                rates: self.rates.clone(),
                v: self.v.clone(),
                state: self.state.clone(),
                arrivals: self.arrived.iter().map(Accum::value).collect(),
                served: self.served.iter().map(Accum::value).collect(),
            });
        }
    }

    /// Applies the next event. `None` once the run has ended.
    pub fn step(&mut self) -> Result<Option<EventKind>> {
        if self.done {
            return Ok(None);
        }
        let clock = self.schedule_clock();
        let slot = self.next_slot as f64;
        let boundary = self.next_boundary as f64 * self.interval;
        let sample = self
            .cfg
            .sample_interval
            .map_or(f64::INFINITY, |s| self.next_sample as f64 * s);
        let horizon = self.cfg.horizon;

        // Ties: arrivals, then the controller, then samples.
        let next = clock.min(slot).min(boundary).min(sample).min(horizon);
        if next >= horizon && clock >= horizon {
            self.advance(horizon)?;
            return self.end();
        }
        self.advance(next)?;
        let kind = if slot <= next {
            self.apply_arrivals();
            if boundary <= next {
                self.apply_boundary()?;
                self.record(EventKind::Boundary);
            }
            EventKind::Arrival
        } else if boundary <= next {
            self.apply_boundary()?;
            self.record(EventKind::Boundary);
            EventKind::Boundary
        } else if sample <= next {
            self.next_sample += 1;
            self.record(EventKind::Sample);
            EventKind::Sample
        } else {
            self.next_clock = None;
            self.fire_clock();
            if self.cfg.max_events.is_some_and(|m| self.clock_ticks >= m) {
                return self.end();
            }
            EventKind::Clock
        };
        if kind != EventKind::Sample && sample <= next {
            self.next_sample += 1;
            self.record(EventKind::Sample);
        }
        Ok(Some(kind))
    }

    fn end(&mut self) -> Result<Option<EventKind>> {
        self.record(EventKind::End);
        self.done = true;
        Ok(Some(EventKind::End))
    }

    pub fn finish(self) -> SimRun {
        let dur = self.t;
        let per_t = |xs: &[Accum]| -> Vec<f64> {
            xs.iter()
                .map(|x| if dur > 0.0 { x.value() / dur } else { 0.0 })
                .collect()
        };
        let final_queues = self.queues();
        let mut occupation: Vec<Occupation> = self
            .occ
            .iter()
            .map(|(s, a)| Occupation {
                rates: self.model.rate_vector(s),
                state: s.clone(),
                fraction: if dur > 0.0 { a.value() / dur } else { 0.0 },
            })
            .collect();
        occupation.sort_by(|a, b| a.state.cmp(&b.state));
        let summary = SimSummary {
            seed: self.cfg.seed,
            duration: dur,
            clock_ticks: self.clock_ticks,
            transitions: self.transitions,
            queue_slope: final_queues
                .iter()
                .map(|q| if dur > 0.0 { q / dur } else { 0.0 })
                .collect(),
            initial_queues: self.q0.clone(),
            final_queues,
            arrival_rate: per_t(&self.arrived),
            throughput: per_t(&self.served),
            offered: per_t(&self.offered),
            final_v: self.v.clone(),
            conservation_error: self.conservation_error,
            occupation,
        };
        SimRun {
            summary,
            trace: self.trace,
            intervals: self.intervals,
        }
    }
}
