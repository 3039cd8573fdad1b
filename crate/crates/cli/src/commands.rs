use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use ratealloc::analysis::chain_mixing_bound;
use ratealloc::chain::EXACT_STATE_LIMIT;
use ratealloc::io::{write_distribution_csv, write_intervals_csv, write_trace_csv};
use ratealloc::optimizer::{solve_vstar as solve, ProgramSpec, SolveOptions, SolveReport};
use ratealloc::scenario::{bundled, ScenarioModel};
use ratealloc::sim::{SimRun, SimSummary};
use ratealloc::{tv_distance, ControllerMode, Distribution, LinkStateModel, Scenario};

use crate::output::{create, write_legend, write_toml};
use crate::{Common, ConfigError};

fn config_err(e: impl std::fmt::Display) -> anyhow::Error {
    ConfigError(e.to_string()).into()
}

/// Loads the scenario, applies overrides and validates it.
fn load(c: &Common) -> Result<(Scenario, ScenarioModel)> {
    let path = Path::new(&c.config);
    let mut sc = if path.exists() {
        Scenario::load(path).map_err(config_err)?
    } else if let Some(sc) = bundled(&c.config) {
        sc
    } else {
        return Err(config_err(format!("{}: no such file or bundled scenario", c.config)));
    };
    if let Some(s) = c.seed {
        sc.seed = s;
    }
    if let Some(h) = c.horizon {
        sc.horizon = h;
    }
    if let Some(r) = c.replications {
        sc.replications = r;
    }
    let model = sc.validate().map_err(config_err)?;
    Ok((sc, model))
}

fn labels(model: &ScenarioModel) -> Option<&dyn LinkStateModel> {
    match model {
        ScenarioModel::Whitespace(w) => Some(w),
        ScenarioModel::Grid(_) => None,
    }
}

fn analysis_v(sc: &Scenario, model: &ScenarioModel) -> Vec<f64> {
    sc.analysis.v.clone().unwrap_or_else(|| vec![0.0; model.num_links()])
}

#[derive(Serialize)]
struct RunReport {
    seed: u64,
    duration: f64,
    clock_ticks: u64,
    transitions: u64,
    queue_slope: Vec<f64>,
    queue_slope_sum: f64,
    throughput: Vec<f64>,
    arrival_rate: Vec<f64>,
    offered: Vec<f64>,
    final_queues: Vec<f64>,
    final_v: Vec<f64>,
    conservation_error: f64,
    /// TV distance between the time-occupation law and the stationary law
    /// at the fixed `v`.
    #[serde(skip_serializing_if = "Option::is_none")]
    occupation_tv: Option<f64>,
}

#[derive(Serialize)]
struct Aggregate {
    replications: usize,
    queue_slope_mean: Vec<f64>,
    queue_slope_sd: Vec<f64>,
    queue_slope_sum_mean: f64,
    throughput_mean: Vec<f64>,
    throughput_sd: Vec<f64>,
}

#[derive(Serialize)]
struct SimulateReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    scenario: Option<String>,
    horizon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    aggregate: Option<Aggregate>,
    runs: Vec<RunReport>,
}

fn occupation_tv(sc: &Scenario, model: &ScenarioModel, s: &SimSummary) -> Result<Option<f64>> {
    let fixed = matches!(
        sc.controller.as_ref().map(|c| &c.mode),
        Some(ControllerMode::NonAdaptive { .. })
    );
    if !fixed {
        return Ok(None);
    }
    let chain = model.chain(&s.final_v)?;
    if chain.len() > EXACT_STATE_LIMIT {
        return Ok(None);
    }
    let mut w = vec![0.0; chain.len()];
    for o in &s.occupation {
        let id = chain
            .state_id(&o.state)
            .context("occupied state missing from the chain")?;
        w[id] = o.fraction;
    }
    Ok(Some(tv_distance(&Distribution::from_weights(w), &chain.stationary())?))
}

fn run_report(sc: &Scenario, model: &ScenarioModel, s: &SimSummary) -> Result<RunReport> {
    Ok(RunReport {
        seed: s.seed,
        duration: s.duration,
        clock_ticks: s.clock_ticks,
        transitions: s.transitions,
        queue_slope: s.queue_slope.clone(),
        queue_slope_sum: s.queue_slope.iter().sum(),
        throughput: s.throughput.clone(),
        arrival_rate: s.arrival_rate.clone(),
        offered: s.offered.clone(),
        final_queues: s.final_queues.clone(),
        final_v: s.final_v.clone(),
        conservation_error: s.conservation_error,
        occupation_tv: occupation_tv(sc, model, s)?,
    })
}

fn mean_sd(rows: &[&Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let k = rows[0].len();
    let mean: Vec<f64> = (0..k).map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / n).collect();
    let sd = (0..k)
        .map(|i| {
            if rows.len() < 2 {
                return 0.0;
            }
            let ss: f64 = rows.iter().map(|r| (r[i] - mean[i]).powi(2)).sum();
            (ss / (n - 1.0)).sqrt()
        })
        .collect();
    (mean, sd)
}

fn write_run(dir: &Path, run: &SimRun, model: &ScenarioModel) -> Result<()> {
    write_trace_csv(create(dir, "trace.csv")?, &run.trace, labels(model))?;
    write_intervals_csv(create(dir, "intervals.csv")?, &run.intervals)?;
    Ok(())
}

pub fn simulate(c: &Common) -> Result<()> {
    let (sc, model) = load(c)?;
    let sim = sc.simulator(&model).map_err(config_err)?;
    let cfg = sc.sim_config(None, None);
    let seeds: Vec<u64> = (0..sc.replications as u64).map(|k| sc.seed.wrapping_add(k)).collect();
    let runs = sim
        .replicate(&cfg, &seeds)
        .into_iter()
        .zip(&seeds)
        .map(|(r, s)| r.with_context(|| format!("seed {s}")))
        .collect::<Result<Vec<SimRun>>>()?;

    let mut reports = Vec::new();
    for run in &runs {
        let dir = if runs.len() == 1 {
            c.out.clone()
        } else {
            c.out.join(format!("seed_{}", run.summary.seed))
        };
        write_run(&dir, run, &model)?;
        reports.push(run_report(&sc, &model, &run.summary)?);
    }
    let aggregate = (reports.len() > 1).then(|| {
        let slopes: Vec<&Vec<f64>> = reports.iter().map(|r| &r.queue_slope).collect();
        let thr: Vec<&Vec<f64>> = reports.iter().map(|r| &r.throughput).collect();
        let (queue_slope_mean, queue_slope_sd) = mean_sd(&slopes);
        let (throughput_mean, throughput_sd) = mean_sd(&thr);
        Aggregate {
            replications: reports.len(),
            queue_slope_sum_mean: queue_slope_mean.iter().sum(),
            queue_slope_mean,
            queue_slope_sd,
            throughput_mean,
            throughput_sd,
        }
    });
    for r in &reports {
        println!(
            "seed {}: Q/t {:?}, throughput {:?}",
            r.seed, r.queue_slope, r.throughput
        );
    }
    let report = SimulateReport {
        scenario: sc.name.clone(),
        horizon: cfg.horizon,
        aggregate,
        runs: reports,
    };
    let path = write_toml(&c.out, "summary.toml", &report)?;
    write_legend(&c.out)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn stationary(c: &Common) -> Result<()> {
    let (sc, model) = load(c)?;
    let chain = model.chain(&analysis_v(&sc, &model))?;
    let pi = chain.stationary();
    write_distribution_csv(create(&c.out, "stationary.csv")?, &chain, &pi, labels(&model))?;
    write_legend(&c.out)?;
    println!("{} states, wrote {}", chain.len(), c.out.join("stationary.csv").display());
    Ok(())
}

pub fn solve_vstar(c: &Common) -> Result<()> {
    let (sc, model) = load(c)?;
    let n = model.num_links();
    let lambda = match &sc.analysis.lambda {
        Some(l) => l.clone(),
        None => sc
            .arrival_process(&model)
            .map_err(config_err)?
            .mean_rates(),
    };
    let spec = match (&model, sc.analysis.epsilon) {
        (ScenarioModel::Grid(g), Some(eps)) => ProgramSpec::shifted(g, &lambda, eps),
        (_, eps) => ProgramSpec::from_chain(&model.chain(&vec![0.0; n])?, &lambda, eps.unwrap_or(0.0) / 4.0),
    }
    .map_err(config_err)?;
    let report: SolveReport = solve(&spec, &SolveOptions::default())?;
    write_toml(&c.out, "solve_report.toml", &report)?;
    let chain = model.chain(&report.v_star)?;
    write_distribution_csv(create(&c.out, "stationary.csv")?, &chain, &chain.stationary(), labels(&model))?;
    write_legend(&c.out)?;
    println!(
        "v* = {:?}, grad_norm = {:e}, iterations = {}",
        report.v_star, report.grad_norm, report.iterations
    );
    Ok(())
}

#[derive(Serialize)]
struct MixingReport {
    v: Vec<f64>,
    rho: f64,
    states: usize,
    uniformization: f64,
    steps: f64,
    alpha_min: f64,
    slem: f64,
    exact: bool,
}

pub fn mixing(c: &Common) -> Result<()> {
    let (sc, model) = load(c)?;
    let v = analysis_v(&sc, &model);
    let rho = sc.analysis.rho.unwrap_or(0.01);
    let chain = model.chain(&v)?;
    let b = chain_mixing_bound(&chain, rho)?;
    let report = MixingReport {
        v,
        rho,
        states: chain.len(),
        uniformization: chain.uniformization_constant(),
        steps: b.steps,
        alpha_min: b.alpha_min,
        slem: b.slem,
        exact: b.exact,
    };
    write_toml(&c.out, "mixing.toml", &report)?;
    println!("mixing steps <= {} (slem {}, exact {})", b.steps, b.slem, b.exact);
    Ok(())
}

#[derive(Serialize)]
struct WhitespaceReport {
    links: usize,
    bands: usize,
    schedules: usize,
    symmetric_capacity: f64,
    v: Vec<f64>,
    offered_service: Vec<f64>,
}

pub fn whitespace(c: &Common) -> Result<()> {
    let (sc, model) = load(c)?;
    let ScenarioModel::Whitespace(w) = &model else {
        return Err(config_err("network: missing; the whitespace command needs a network"));
    };
    let v = analysis_v(&sc, &model);
    let chain = model.chain(&v)?;
    let report = WhitespaceReport {
        links: w.network().num_links(),
        bands: w.network().num_bands(),
        schedules: chain.len(),
        symmetric_capacity: model.symmetric_capacity()?,
        v,
        offered_service: chain.offered_service(),
    };
    write_toml(&c.out, "whitespace.toml", &report)?;
    write_distribution_csv(create(&c.out, "stationary.csv")?, &chain, &chain.stationary(), Some(w))?;
    write_legend(&c.out)?;
    println!(
        "{} feasible schedules, symmetric capacity {}",
        report.schedules, report.symmetric_capacity
    );
    Ok(())
}

pub fn validate(c: &Common) -> Result<()> {
    let (sc, model) = load(c)?;
    let kind = match model {
        ScenarioModel::Grid(ref g) => format!("{} rate vectors", g.len()),
        ScenarioModel::Whitespace(_) => "white-space network".to_string(),
    };
    println!(
        "{}: ok, {} links, {kind}",
        sc.name.as_deref().unwrap_or(&c.config),
        model.num_links()
    );
    Ok(())
}
