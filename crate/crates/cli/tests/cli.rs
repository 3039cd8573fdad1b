use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ratealloc::analysis::chain_mixing_bound;
use ratealloc::{discretize, tv_distance, AllocationChain, Distribution, RateRegion};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ratealloc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn ok(args: &[&str], out: &Path) {
    let o = run(args, out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn toml_file(path: &Path) -> toml::Table {
    fs::read_to_string(path).unwrap().parse().unwrap()
}

fn floats(v: &toml::Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_float().unwrap()).collect()
}

#[test]
fn stationary_at_zero_is_uniform() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["stationary", "--config", "mac_rho09"], dir.path());
    let mut r = csv::Reader::from_path(dir.path().join("stationary.csv")).unwrap();
    let probs: Vec<f64> = r.records().map(|x| x.unwrap()[2].parse().unwrap()).collect();
    assert_eq!(probs.len(), 8);
    assert!(probs.iter().all(|&p| (p - 0.125).abs() < 1e-15));
    assert!(dir.path().join("legend.csv").exists());
}

#[test]
fn solve_vstar_reaches_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mac.toml");
    let text = ratealloc::scenario::BUNDLED[0].1.replace("v = [0.0, 0.0]", "v = [0.0, 0.0]\nlambda = [0.6, 0.6]");
    fs::write(&cfg, text).unwrap();
    ok(&["solve-vstar", "--config", cfg.to_str().unwrap()], dir.path());
    let rep = toml_file(&dir.path().join("solve_report.toml"));
    assert!(rep["grad_norm"].as_float().unwrap() <= 1e-8);
    let s = floats(&rep["s_at_vstar"]);
    assert!(s.iter().all(|x| (x - 0.6).abs() < 1e-7), "{s:?}");
}

// Matrix-power check: after the reported number of steps every start is
// within ρ of uniform.
#[test]
fn mixing_bound_is_finite_and_sufficient() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["mixing", "--config", "mac_rho09"], dir.path());
    let rep = toml_file(&dir.path().join("mixing.toml"));
    let steps = rep["steps"].as_float().unwrap();
    assert!(steps.is_finite() && steps > 0.0);

    let lv = vec![vec![0.0, 0.4, 1.0]; 2];
    let g = discretize(&RateRegion::gaussian_mac(3.0, 1.0, 2), 0.0, Some(&lv)).unwrap();
    let chain = AllocationChain::new(&g, &[0.0, 0.0]).unwrap();
    assert_eq!(chain_mixing_bound(&chain, 0.01).unwrap().steps, steps);
    let p = chain.uniformize().unwrap();
    let pi = chain.stationary();
    for x in 0..chain.len() {
        let mu = p.evolve(&Distribution::point_mass(chain.len(), x), steps.ceil() as u64);
        assert!(tv_distance(&mu, &pi).unwrap() <= 0.01);
    }
}

#[test]
fn zero_horizon_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--config", "mac_rho09", "--horizon", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("horizon"));
}

#[test]
fn parse_errors_point_at_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "seed = 1\nhorizon = oops\n").unwrap();
    let o = run(&["validate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let o = run(&["validate", "--config", "no_such_scenario"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn repeat_runs_write_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["simulate", "--config", "whitespace_3x2", "--seed", "9", "--horizon", "2000"];
    ok(&args, a.path());
    ok(&args, b.path());
    for f in ["trace.csv", "intervals.csv", "summary.toml", "legend.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let mut r = csv::Reader::from_path(a.path().join("trace.csv")).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["t", "link", "Q", "r", "v", "event_kind", "sigma"]);
}

#[test]
fn replications_write_per_seed_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["simulate", "--config", "mac_rho11", "--replications", "3", "--horizon", "5000", "--seed", "4"],
        dir.path(),
    );
    let rep = toml_file(&dir.path().join("summary.toml"));
    let runs = rep["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    for s in 4..7 {
        assert!(dir.path().join(format!("seed_{s}")).join("trace.csv").exists());
    }
    let agg = rep["aggregate"].as_table().unwrap();
    let mean = floats(&agg["queue_slope_mean"]);
    let by_hand: f64 = runs
        .iter()
        .map(|r| r["queue_slope"].as_array().unwrap()[0].as_float().unwrap())
        .sum::<f64>()
        / 3.0;
    assert!((mean[0] - by_hand).abs() < 1e-12);
}

#[test]
fn fixed_controller_reports_occupation_distance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fixed.toml");
    let text = ratealloc::scenario::BUNDLED[0]
        .1
        .replace("mode = \"adaptive_heuristic\"", "mode = \"non_adaptive\"")
        .replace("rule = \"log1p_queue\"\n", "")
        .replace("replications = 5", "replications = 1");
    fs::write(&cfg, text).unwrap();
    ok(&["simulate", "--config", cfg.to_str().unwrap(), "--horizon", "20000"], dir.path());
    let rep = toml_file(&dir.path().join("summary.toml"));
    let tv = rep["runs"][0]["occupation_tv"].as_float().unwrap();
    assert!(tv < 0.05, "{tv}");
}

#[test]
fn whitespace_command_lists_schedules() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["whitespace", "--config", "whitespace_3x2"], dir.path());
    let rep = toml_file(&dir.path().join("whitespace.toml"));
    assert_eq!(rep["schedules"].as_integer(), Some(19));
    let o = run(&["whitespace", "--config", "mac_rho09"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
