//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! criterion fails.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ratealloc::analysis::{chain_mixing_bound, conductance, conductance_lower_bound, null_space_stationary, slem};
use ratealloc::optimizer::{solve_vstar, ProgramSpec, SolveOptions};
use ratealloc::scenario::bundled;
use ratealloc::sim::{ArrivalProcess, ClockSampling, ControllerConfig, ControllerMode, SimConfig, SimRun, Simulator};
use ratealloc::whitespace::{is_feasible_schedule, whitespace_chain, BandSchedule, WhitespaceNetwork};
use ratealloc::{discretize, tv_distance, AllocationChain, Distribution, LinkStateModel, RateLevelGrid, RateRegion};

type Outcome = Result<String, String>;

fn mac() -> RateLevelGrid {
    let lv = vec![vec![0.0, 0.4, 1.0]; 2];
    discretize(&RateRegion::gaussian_mac(3.0, 1.0, 2), 0.0, Some(&lv)).unwrap()
}

fn random_v(rng: &mut ChaCha8Rng, n: usize, max: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-max..=max)).collect()
}

// exp(r·v) normalized with a max shift; independent of the library.
fn exp_form(vectors: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let lw: Vec<f64> = vectors
        .iter()
        .map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect();
    let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lw.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|x| x / z).collect()
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

// Single-coordinate neighbours and their destination-dependent rates.
fn oracle_rate(from: &[f64], to: &[f64], v: &[f64]) -> Option<f64> {
    let diff: Vec<usize> = (0..from.len()).filter(|&i| from[i] != to[i]).collect();
    match diff.as_slice() {
        [i] => Some((to[*i] * v[*i]).exp()),
        _ => None,
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let e = start.elapsed();
    if e <= limit {
        Ok(())
    } else {
        Err(format!("took {e:.2?}, limit {limit:?}"))
    }
}

fn detailed_balance() -> Outcome {
    let start = Instant::now();
    let g = mac();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut edges = 0;
    for _ in 0..50 {
        let v = random_v(&mut rng, 2, 10.0);
        let chain = AllocationChain::new(&g, &v).unwrap();
        let pi = chain.stationary();
        let p = pi.probs();
        let vecs = chain.rate_vectors();
        for x in 0..chain.len() {
            for y in 0..chain.len() {
                let Some(q_xy) = oracle_rate(&vecs[x], &vecs[y], &v) else { continue };
                let q_yx = oracle_rate(&vecs[y], &vecs[x], &v).unwrap();
                let lib = chain.transition_rate(x, y);
                if (lib - q_xy).abs() > 1e-12 * q_xy {
                    return Err(format!("rate {x}->{y} is {lib}, expected {q_xy}"));
                }
                let (a, b) = (p[x] * q_xy, p[y] * q_yx);
                worst = worst.max((a - b).abs() / a.max(b));
                edges += 1;
            }
        }
    }
    within(Duration::from_secs(1), start)?;
    check(worst <= 1e-12, format!("{edges} directed edges, worst relative gap {worst:.2e}"))
}

fn random_polytope_grid(rng: &mut ChaCha8Rng) -> RateLevelGrid {
    loop {
        let n = rng.random_range(2..=3);
        let m = rng.random_range(1..=3);
        let a: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.random_range(0.2..1.5)).collect())
            .collect();
        let b: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..2.0)).collect();
        let region = RateRegion::Polytope { a, b };
        let eps = rng.random_range(0.15..0.6);
        if let Ok(g) = discretize(&region, eps, None) {
            if (3..=200).contains(&g.len()) {
                return g;
            }
        }
    }
}

fn stationary_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut grids = vec![mac()];
    for _ in 0..5 {
        grids.push(random_polytope_grid(&mut rng));
    }
    let mut worst: f64 = 0.0;
    let mut sizes = Vec::new();
    for g in &grids {
        let v = random_v(&mut rng, g.num_links(), 3.0);
        let chain = AllocationChain::new(g, &v).unwrap();
        let closed = chain.stationary();
        let ns = null_space_stationary(&chain.rate_matrix().unwrap()).unwrap();
        worst = worst.max(tv_distance(&closed, &ns).unwrap());
        sizes.push(g.len());
    }
    within(Duration::from_secs(10), start)?;
    check(worst <= 1e-10, format!("state counts {sizes:?}, worst TV {worst:.2e}"))
}

fn conservation_of(run: &SimRun) -> f64 {
    let mut worst = run.summary.conservation_error;
    for rec in &run.trace {
        for i in 0..rec.queues.len() {
            let lhs = rec.arrivals[i] - rec.served[i];
            let rhs = rec.queues[i] - run.summary.initial_queues[i];
            worst = worst.max((lhs - rhs).abs());
        }
    }
    worst
}

fn simulation_vs_theory(conservation: &mut Vec<f64>) -> Outcome {
    let start = Instant::now();
    let g = mac();
    let mut lines = Vec::new();
    let mut ok = true;
    for v in [vec![0.0, 0.0], vec![1.0, 1.0], vec![3.0, -1.0]] {
        let pi = exp_form(g.vectors(), &v);
        let ctl = ControllerConfig {
            mode: ControllerMode::NonAdaptive { v: Some(v.clone()) },
            interval: 10.0,
        };
        let sim = Simulator::new(&g, ArrivalProcess::bernoulli(&[0.3, 0.2]), ctl, v.clone()).unwrap();
        let cfg = SimConfig {
            horizon: 1e12,
            seed: 42,
            clock: ClockSampling::Aggregate,
            max_events: Some(1_000_000),
            sample_interval: Some(5.0),
            record_trace: true,
            ..SimConfig::default()
        };
        let run = sim.run(&cfg).unwrap();
        let mut occ = vec![0.0; g.len()];
        for o in &run.summary.occupation {
            occ[g.state_id(&o.state).unwrap()] = o.fraction;
        }
        let d = tv(&occ, &pi);
        ok &= d <= 0.02 && run.summary.clock_ticks == 1_000_000;
        conservation.push(conservation_of(&run));
        lines.push(format!("v={v:?} TV={d:.4}"));
    }
    within(Duration::from_secs(30), start)?;
    check(ok, format!("10^6 ticks each: {}", lines.join(", ")))
}

// Independent log-partition objective.
fn oracle_objective(vectors: &[Vec<f64>], lambda: &[f64], v: &[f64]) -> f64 {
    let lw: Vec<f64> = vectors
        .iter()
        .map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect();
    let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = lw.iter().map(|x| (x - m).exp()).sum();
    lambda.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() - (m + z.ln())
}

fn optimizer_correctness() -> Outcome {
    let start = Instant::now();
    let g = mac();
    let lambda = [0.6, 0.6];
    let spec = ProgramSpec::new(&g, &lambda).unwrap();
    let a = solve_vstar(&spec, &SolveOptions::default()).map_err(|e| e.to_string())?;
    let b = solve_vstar(
        &spec,
        &SolveOptions {
            start: Some(vec![4.0, -3.0]),
            ..SolveOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let pi = exp_form(g.vectors(), &a.v_star);
    let s: Vec<f64> = (0..2)
        .map(|i| g.vectors().iter().zip(&pi).map(|(r, p)| r[i] * p).sum())
        .collect();
    let fit = s.iter().zip(&lambda).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let agree = a.v_star.iter().zip(&b.v_star).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut fd_worst: f64 = 0.0;
    let h = 1e-5;
    for _ in 0..20 {
        let v = random_v(&mut rng, 2, 3.0);
        let grad = spec.gradient(&v).unwrap();
        let gn = grad.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..2 {
            let mut up = v.clone();
            let mut dn = v.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (oracle_objective(g.vectors(), &lambda, &up) - oracle_objective(g.vectors(), &lambda, &dn)) / (2.0 * h);
            fd_worst = fd_worst.max((fd - grad[i]).abs() / gn);
        }
    }

    let mut max_form = f64::NEG_INFINITY;
    for _ in 0..100 {
        let v = random_v(&mut rng, 2, 3.0);
        let hess = spec.hessian(&v).unwrap();
        let u = random_v(&mut rng, 2, 1.0);
        let norm2: f64 = u.iter().map(|x| x * x).sum();
        let form: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| u[i] * hess[(i, j)] * u[j]).sum();
        max_form = max_form.max(form / norm2);
    }
    within(Duration::from_secs(10), start)?;
    check(
        fit <= 1e-6 && agree <= 1e-6 && fd_worst <= 1e-6 && max_form < 0.0,
        format!(
            "v*={:?}, |s-λ|={fit:.1e}, starts differ by {agree:.1e}, FD rel {fd_worst:.1e}, max uHu/|u|²={max_form:.3e}",
            a.v_star
        ),
    )
}

fn vstar_bound() -> Outcome {
    let start = Instant::now();
    let g = mac();
    let eps = 0.4;
    let mut lines = Vec::new();
    let mut ok = true;
    // K̄ and K_lo bracket the per-link maxima c_i, both 1 here.
    let c: Vec<f64> = (0..2).map(|i| g.vectors().iter().map(|r| r[i]).fold(0.0, f64::max)).collect();
    let (k_hi, k_lo, n) = (c[0].max(c[1]), c[0].min(c[1]), 2.0f64);
    let bound = 16.0 * k_hi / k_lo * (n / eps) * (2.0 * k_hi / eps).ceil().ln();
    for lambda in [[0.3f64, 0.3], [0.1, 0.3], [0.2, 0.25], [0.28, 0.12]] {
        if eps > 4.0 * lambda[0].min(lambda[1]) {
            return Err(format!("λ={lambda:?} violates ε <= 4λ_min"));
        }
        let spec = ProgramSpec::shifted(&g, &lambda, eps).unwrap();
        let lib_bound = spec.vstar_bound().unwrap();
        if (lib_bound - bound).abs() > 1e-9 {
            return Err(format!("library bound {lib_bound} vs {bound}"));
        }
        let r = solve_vstar(&spec, &SolveOptions::default()).map_err(|e| e.to_string())?;
        let vi = r.v_star.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        ok &= vi <= bound && r.bound_check == Some(true);
        lines.push(format!("λ={lambda:?} ‖v*‖={vi:.3}"));
    }
    within(Duration::from_secs(5), start)?;
    check(ok, format!("bound {bound:.2}; {}", lines.join(", ")))
}

// Every cut S (nonempty, proper); Φ takes the side with mass <= ½.
fn oracle_conductance(p: &DMatrix<f64>, pi: &[f64]) -> (f64, usize) {
    let n = pi.len();
    let mut best = f64::INFINITY;
    let mut cuts = 0;
    for mask in 1u32..(1 << n) - 1 {
        cuts += 1;
        let inside = |x: usize| mask >> x & 1 == 1;
        let mass: f64 = (0..n).filter(|&x| inside(x)).map(|x| pi[x]).sum();
        if mass > 0.5 + 1e-12 {
            continue;
        }
        let mut flow = 0.0;
        for x in (0..n).filter(|&x| inside(x)) {
            for y in (0..n).filter(|&y| !inside(y)) {
                flow += pi[x] * p[(x, y)];
            }
        }
        best = best.min(flow / mass);
    }
    (best, cuts)
}

fn conductance_sandwich() -> Outcome {
    let start = Instant::now();
    let g = mac();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut lines = Vec::new();
    let mut ok = true;
    for _ in 0..10 {
        let v = random_v(&mut rng, 2, 2.0);
        let chain = AllocationChain::new(&g, &v).unwrap();
        let dtmc = chain.uniformize().unwrap();
        let pi = exp_form(chain.rate_vectors(), &v);
        let (phi, cuts) = oracle_conductance(dtmc.matrix(), &pi);
        let lib_phi = conductance(&dtmc).unwrap();
        let lb = conductance_lower_bound(&chain);
        let sigma = slem(&dtmc, &Distribution::new(pi.clone()).unwrap());
        let good = cuts == 254
            && (phi - lib_phi).abs() <= 1e-12
            && phi >= lb
            && 1.0 - 2.0 * phi <= sigma
            && sigma <= 1.0 - phi * phi / 2.0;
        ok &= good;
        if !good || lines.len() < 3 {
            lines.push(format!(
                "v=({:.2},{:.2}) Φ={phi:.3e} lb={lb:.3e} σ={sigma:.4} in [{:.4},{:.4}]",
                v[0],
                v[1],
                1.0 - 2.0 * phi,
                1.0 - phi * phi / 2.0
            ));
        }
    }
    within(Duration::from_secs(10), start)?;
    check(ok, lines.join("; "))
}

fn mat_pow(p: &DMatrix<f64>, mut k: u64) -> DMatrix<f64> {
    let mut acc = DMatrix::identity(p.nrows(), p.ncols());
    let mut base = p.clone();
    while k > 0 {
        if k & 1 == 1 {
            acc = &acc * &base;
        }
        base = &base * &base;
        k >>= 1;
    }
    acc
}

fn mixing_bound() -> Outcome {
    let start = Instant::now();
    let g = mac();
    let rho = 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut lines = Vec::new();
    let mut ok = true;
    for _ in 0..5 {
        let v = random_v(&mut rng, 2, 2.0);
        let chain = AllocationChain::new(&g, &v).unwrap();
        let bound = chain_mixing_bound(&chain, rho).map_err(|e| e.to_string())?;
        let steps = bound.steps.ceil() as u64;
        let pk = mat_pow(chain.uniformize().unwrap().matrix(), steps);
        let pi = exp_form(chain.rate_vectors(), &v);
        // Rows of P^k are the laws after k steps from each point mass.
        let worst = (0..chain.len())
            .map(|x| tv(&pk.row(x).iter().copied().collect::<Vec<_>>(), &pi))
            .fold(0.0, f64::max);
        ok &= worst <= rho;
        lines.push(format!("{steps} steps → TV {worst:.2e}"));
    }
    within(Duration::from_secs(10), start)?;
    check(ok, lines.join(", "))
}

fn mac_experiment(conservation: &mut Vec<f64>) -> Outcome {
    let start = Instant::now();
    let seeds = [1, 2, 3, 4, 5];
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, load) in [("mac_rho09", 0.9), ("mac_rho11", 1.1)] {
        let sc = bundled(name).unwrap();
        let model = sc.validate().unwrap();
        let lambda = sc.arrival_rates(&model).unwrap();
        if lambda.iter().any(|l| (l - load * 0.7).abs() > 1e-9) {
            return Err(format!("{name}: λ={lambda:?}"));
        }
        let sim = sc.simulator(&model).unwrap();
        let cfg = sc.sim_config(None, Some(1e5));
        let runs = sim.replicate(&cfg, &seeds);
        let mut slopes = Vec::new();
        for r in runs {
            let r = r.map_err(|e| e.to_string())?;
            conservation.push(conservation_of(&r));
            let q = &r.summary.queue_slope;
            if load < 1.0 {
                let m = q.iter().copied().fold(0.0, f64::max);
                ok &= m <= 0.05;
                slopes.push(m);
            } else {
                let s: f64 = q.iter().sum();
                ok &= s >= 0.02;
                slopes.push(s);
            }
        }
        let what = if load < 1.0 { "max Q/t" } else { "ΣQ/t" };
        lines.push(format!(
            "ρ={load}: {what} {}",
            slopes.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
        ));
    }
    within(Duration::from_secs(120), start)?;
    check(ok, lines.join("; "))
}

fn whitespace_correspondence() -> Outcome {
    let start = Instant::now();
    let net = bundled("whitespace_3x2").unwrap().network.unwrap();
    let (n, m) = (net.num_links(), net.num_bands());
    if (n, m) != (3, 2) || net.radios.iter().any(|&a| a != 1) {
        return Err("instance is not 3 links, 2 bands, one radio each".into());
    }
    // Brute force: all 4^3 mask assignments, then πQ = 0 by dense LU.
    let mut scheds = Vec::new();
    for code in 0..(1u32 << (m * n)) {
        let masks: Vec<u32> = (0..n).map(|i| code >> (m * i) & 3).collect();
        let s = BandSchedule { masks };
        if is_feasible_schedule(&net, &s).unwrap() {
            scheds.push(s);
        }
    }
    let rate = |s: &BandSchedule, i: usize| -> f64 {
        (0..m).filter(|&b| s.is_on(i, b)).map(|b| net.efficiency[i][b] * net.bandwidths[b]).sum()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let v = random_v(&mut rng, n, 2.0);
        let k = scheds.len();
        let mut q = DMatrix::zeros(k, k);
        for x in 0..k {
            for y in 0..k {
                let diff: Vec<usize> = (0..n).filter(|&i| scheds[x].masks[i] != scheds[y].masks[i]).collect();
                if let [i] = diff.as_slice() {
                    q[(x, y)] = (rate(&scheds[y], *i) * v[*i]).exp();
                }
            }
            let out: f64 = q.row(x).sum();
            q[(x, x)] = -out;
        }
        let mut a = q.transpose();
        for j in 0..k {
            a[(k - 1, j)] = 1.0;
        }
        let mut rhs = nalgebra::DVector::zeros(k);
        rhs[k - 1] = 1.0;
        let brute = a.full_piv_lu().solve(&rhs).ok_or("singular generator")?;
        let vecs: Vec<Vec<f64>> = scheds.iter().map(|s| (0..n).map(|i| rate(s, i)).collect()).collect();
        let exp = exp_form(&vecs, &v);
        worst = worst.max(tv(brute.as_slice(), &exp));

        let (model, chain) = whitespace_chain(&net, &v).unwrap();
        let lib = chain.stationary();
        for (id, st) in chain.states().iter().enumerate() {
            let s = model.schedule(st);
            let x = scheds.iter().position(|t| *t == s).ok_or("library state not feasible")?;
            worst = worst.max((lib.probs()[id] - exp[x]).abs());
        }
        if chain.len() != k {
            return Err(format!("library has {} states, brute force {k}", chain.len()));
        }
    }

    // One band: feasible schedules are the independent sets of E_1.
    let edges = vec![[0, 1], [1, 2], [2, 3], [3, 0], [0, 2]];
    let single = WhitespaceNetwork {
        nodes: 8,
        links: vec![[0, 1], [2, 3], [4, 5], [6, 7]],
        bandwidths: vec![1.0],
        efficiency: vec![vec![1.0]; 4],
        interference: vec![edges.clone()],
        radios: vec![1; 8],
    };
    let (model, chain) = whitespace_chain(&single, &[0.1, 0.2, 0.3, 0.4]).unwrap();
    let mut got: Vec<u32> = chain
        .states()
        .iter()
        .map(|s| (0..4).fold(0, |acc, i| acc | (model.mask(i, s[i]) << i)))
        .collect();
    got.sort();
    let independent: Vec<u32> = (0..16u32)
        .filter(|set| edges.iter().all(|&[u, w]| !(set >> u & 1 == 1 && set >> w & 1 == 1)))
        .collect();
    let m1 = got == independent && model.max_degree() == 4;
    within(Duration::from_secs(10), start)?;
    check(
        worst <= 1e-10 && m1,
        format!(
            "{} feasible schedules, worst TV {worst:.2e}; M=1 states = {} independent sets: {m1}",
            scheds.len(),
            independent.len()
        ),
    )
}

fn main() {
    let mut conservation = Vec::new();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "detailed balance", detailed_balance()));
    results.push((2, "stationary equivalence", stationary_equivalence()));
    results.push((3, "simulation vs stationary law", simulation_vs_theory(&mut conservation)));
    results.push((4, "optimizer correctness", optimizer_correctness()));
    results.push((5, "v* bound", vstar_bound()));
    results.push((6, "conductance sandwich", conductance_sandwich()));
    results.push((7, "mixing bound", mixing_bound()));
    results.push((8, "MAC experiment", mac_experiment(&mut conservation)));
    results.push((9, "white-space correspondence", whitespace_correspondence()));
    let worst = conservation.iter().copied().fold(0.0, f64::max);
    results.push((
        10,
        "work conservation",
        check(
            conservation.len() == 13 && worst <= 1e-9,
            format!("{} runs, worst |A - S - ΔQ| {worst:.2e}", conservation.len()),
        ),
    ));

    let mut failed = 0;
    for (k, name, r) in &results {
        match r {
            Ok(d) => println!("criterion {k:>2} PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {k:>2} FAIL  {name}: {d}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
