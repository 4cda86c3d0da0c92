//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run a subset with `cargo test --test acceptance -- 3 4`.

mod common;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use netcomp::capacity::{oracle_lambda_star, solve_lambda_star, BoundMode, CapacityProblem, LinkModel};
use netcomp::policy::{push_count, PolicyName, PolicySpec};
use netcomp::presets::{grid4x4, grid_scenario, triangle, two_lobe};
use netcomp::arrivals::ArrivalSpec;
use netcomp::queueing::PushPlan;
use netcomp::sim::{run, run_coupled, run_observed, RunResult, SharedStreams, SimOptions, SLOPE_STABLE, SLOPE_UNSTABLE};
use netcomp::Scenario;

type Verdict = Result<String, String>;

const SWEEP_RATES: [f64; 5] = [6.0, 7.0, 7.5, 8.5, 9.0];
const SWEEP_SEEDS: [u64; 3] = [1, 2, 3];
const SWEEP_HORIZON: u64 = 200_000;

fn fast() -> SimOptions {
    SimOptions::default().with_asserts(false).with_stride(10_000)
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn lp_grid(c: u32, lo: f64, hi: f64) -> Verdict {
    let start = Instant::now();
    let b = solve_lambda_star(&CapacityProblem::multi(grid4x4(c)), false).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("lambda* = {:.6} in {secs:.2} s ({} pivots)", b.lambda_star, b.pivots);
    ensure(b.lambda_star >= lo && b.lambda_star <= hi, format!("{msg}, expected [{lo}, {hi}]"))?;
    ensure(secs < 5.0, format!("{msg}, over the 5 s budget"))?;
    Ok(msg)
}

/// Runs of one policy over the sweep grid, grouped by rate.
struct SweepRuns {
    runs: Vec<(f64, Vec<RunResult>)>,
    secs: f64,
}

fn sweep(name: PolicyName) -> SweepRuns {
    let start = Instant::now();
    let points: Vec<(f64, u64)> = SWEEP_RATES
        .iter()
        .flat_map(|&r| SWEEP_SEEDS.iter().map(move |&s| (r, s)))
        .collect();
    let results: Vec<RunResult> = points
        .par_iter()
        .map(|&(rate, seed)| {
            let s = grid_scenario(2, PolicySpec::new(name).with_eps(0.01), rate, SWEEP_HORIZON, seed);
            run(&s, fast()).expect("grid run succeeds")
        })
        .collect();
    let runs = SWEEP_RATES
        .iter()
        .map(|&r| (r, results.iter().filter(|x| x.summary.lambda == r).cloned().collect()))
        .collect();
    SweepRuns {
        runs,
        secs: start.elapsed().as_secs_f64(),
    }
}

/// Stable below the knee, clearly unstable above it.
fn classify(s: &SweepRuns) -> Result<Vec<(f64, Vec<bool>)>, String> {
    let mut out = Vec::new();
    for (rate, runs) in &s.runs {
        let flags: Vec<bool> = runs.iter().map(|r| r.summary.stable).collect();
        for r in runs {
            let slope = r.summary.slope;
            if *rate <= 7.5 && !(r.summary.stable && slope <= SLOPE_STABLE) {
                return Err(format!("lambda {rate} seed {}: slope {slope:.2e} not stable", r.summary.seed));
            }
            if *rate >= 8.5 && !(slope >= SLOPE_UNSTABLE || r.summary.halted) {
                return Err(format!("lambda {rate} seed {}: slope {slope:.2e} not unstable", r.summary.seed));
            }
        }
        out.push((*rate, flags));
    }
    Ok(out)
}

fn describe(s: &SweepRuns) -> String {
    s.runs
        .iter()
        .map(|(rate, runs)| {
            let mean = runs.iter().map(|r| r.summary.mean_backlog).sum::<f64>() / runs.len() as f64;
            let max_slope = runs.iter().map(|r| r.summary.slope).fold(f64::MIN, f64::max);
            format!("{rate}: backlog {mean:.0}, slope<={max_slope:.1e}")
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn knee(s: &SweepRuns) -> Verdict {
    classify(s)?;
    ensure(s.secs < 120.0, format!("sweep took {:.1} s, over 2 min", s.secs))?;
    Ok(format!("{} in {:.1} s", describe(s), s.secs))
}

fn equivalence(pi3: &SweepRuns, bar: &SweepRuns) -> Verdict {
    let a = classify(pi3).map_err(|e| format!("pi3: {e}"))?;
    let b = classify(bar).map_err(|e| format!("pi3bar: {e}"))?;
    ensure(a == b, "stable/unstable classification differs between pi3 and pi3bar")?;
    let (_, light_a) = &pi3.runs[0];
    let (_, light_b) = &bar.runs[0];
    let mut pairs = Vec::new();
    for (x, y) in light_a.iter().zip(light_b) {
        ensure(
            y.summary.mean_backlog <= x.summary.mean_backlog,
            format!(
                "seed {}: pi3bar backlog {:.1} > pi3 backlog {:.1} at lambda 6",
                x.summary.seed, y.summary.mean_backlog, x.summary.mean_backlog
            ),
        )?;
        pairs.push(format!("{:.0}<={:.0}", y.summary.mean_backlog, x.summary.mean_backlog));
    }
    Ok(format!(
        "same classification; lambda 6 backlog pi3bar vs pi3: {}; pi3bar sweep: {}",
        pairs.join(", "),
        describe(bar)
    ))
}

fn throughput(pi3: &SweepRuns) -> Verdict {
    let (rate, runs) = &pi3.runs[0];
    assert_eq!(*rate, 6.0);
    let mut notes = Vec::new();
    for r in runs {
        let delivered = r.summary.delivered_rate;
        let assigned: f64 = r.summary.assigned_rate.iter().sum();
        ensure(
            (delivered - 6.0).abs() <= 0.12 && (assigned - 6.0).abs() <= 0.12,
            format!("seed {}: delivered {delivered:.4}, assigned {assigned:.4}", r.summary.seed),
        )?;
        notes.push(format!("{delivered:.3}/{assigned:.3}"));
    }
    Ok(format!("delivered/assigned per seed: {}", notes.join(", ")))
}

fn dominance() -> Verdict {
    let start = Instant::now();
    let topo = two_lobe();
    let base = Scenario::new(
        topo,
        ArrivalSpec::poisson(1.5),
        PolicySpec::new(PolicyName::Pi1),
        100_000,
        0,
    )
    .map_err(|e| e.to_string())?;
    let mut checked = 0;
    let opts = SimOptions::default().with_asserts(false).with_stride(100_000);
    let cases: Vec<(u64, u64)> = [0u64, 10, 100]
        .iter()
        .flat_map(|&x| (1..=5u64).map(move |seed| (x, seed)))
        .collect();
    let reports: Vec<_> = cases
        .par_iter()
        .map(|&(x, seed)| {
            let a = base.with_seed(seed);
            let b = a
                .with_policy(PolicySpec::new(PolicyName::Pi1p).with_threshold(x))
                .expect("pi1p fits the two-lobe graph");
            (x, seed, run_coupled(&a, &b, SharedStreams::ARRIVALS, opts))
        })
        .collect();
    for (x, seed, rep) in reports {
        let (_, _, rep) = rep.map_err(|e| e.to_string())?;
        ensure(
            rep.holds(),
            format!(
                "threshold {x} seed {seed}: {} violations, first at slot {:?}",
                rep.violations, rep.first_violation
            ),
        )?;
        checked += rep.slots;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, format!("took {secs:.1} s, over 30 s"))?;
    Ok(format!("{checked} coupled slots, zero violations, {secs:.1} s"))
}

fn safety() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5afe);
    let opts = SimOptions::default().with_stride(1).with_asserts(true);
    let mut slots = 0;
    for i in 0..500 {
        let name = PolicyName::ALL[i % PolicyName::ALL.len()];
        let s = common::random_scenario(&mut rng, name, 300);
        let mut problem = None;
        let result = run_observed(&s, opts, |v| {
            if problem.is_some() {
                return;
            }
            let topo = &s.topology;
            let mut used = vec![0u64; topo.edges().len()];
            for r in &v.decision.routes {
                used[r.edge] += r.count;
            }
            for (e, u) in topo.edges().iter().zip(&used) {
                if *u > e.capacity as u64 {
                    problem = Some(format!("slot {}: link ({},{}) used {u}", v.slot, e.a, e.b));
                }
            }
            for (site, tags) in v.decision.combine.iter().enumerate() {
                if tags.len() as u64 > topo.sites()[site].capacity as u64 {
                    problem = Some(format!("slot {}: site {site} combined {}", v.slot, tags.len()));
                }
            }
        });
        match result {
            Ok(r) => slots += r.summary.slots_run,
            Err(e) => return Err(format!("scenario {i} ({name}): {e}")),
        }
        if let Some(p) = problem {
            return Err(format!("scenario {i} ({name}): {p}"));
        }
    }
    Ok(format!("500 scenarios, {slots} slots, every slot checked"))
}

fn oracle() -> Verdict {
    let start = Instant::now();
    for site in [2, 1] {
        let p = CapacityProblem::single(triangle(site), site);
        let lp = solve_lambda_star(&p, false).map_err(|e| e.to_string())?.lambda_star;
        let or = oracle_lambda_star(&p).map_err(|e| e.to_string())?;
        ensure(
            (lp - 1.0).abs() <= 1e-6 && (or - 1.0).abs() <= 1e-6,
            format!("triangle with site {site}: lp {lp}, oracle {or}"),
        )?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c1e);
    let instances: Vec<CapacityProblem> = (0..500)
        .map(|i| {
            let t = common::random_topology(&mut rng, 6, 10, 3);
            let mode = if i % 2 == 0 {
                BoundMode::Multi
            } else {
                BoundMode::Single(t.sites()[i % t.num_sites()].node)
            };
            let links = if i % 5 == 4 { LinkModel::Directed } else { LinkModel::Shared };
            CapacityProblem { topology: t, mode, links }
        })
        .collect();
    let worst = instances
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let lp = solve_lambda_star(p, false).map_err(|e| format!("instance {i}: {e}"))?.lambda_star;
            let or = oracle_lambda_star(p).map_err(|e| format!("instance {i}: {e}"))?;
            Ok(((lp - or).abs(), i, lp, or))
        })
        .collect::<Result<Vec<_>, String>>()?
        .into_iter()
        .fold((0.0, 0, 0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    ensure(
        worst.0 <= 1e-6,
        format!("instance {}: lp {} vs oracle {} (diff {:.2e})", worst.1, worst.2, worst.3, worst.0),
    )?;
    Ok(format!(
        "triangles give 1; 500 instances, max |lp - oracle| = {:.2e}, {:.1} s",
        worst.0,
        start.elapsed().as_secs_f64()
    ))
}

fn decoupling() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xdec0);
    let mut slots = 0;
    let mut with_dummies = 0;
    let mut with_backlog = 0;
    for i in 0..20 {
        let s = common::random_scenario(&mut rng, PolicyName::Pi2, 10_000);
        let mut problem = None;
        run_observed(&s, fast(), |v| {
            let PushPlan::Regulated(counts) = &v.decision.push else {
                problem.get_or_insert(format!("slot {}: push is not regulated", v.slot));
                return;
            };
            let expected = push_count(v.arrivals, v.push_bits[0]);
            if counts[0] != expected || v.outcome.injected[0] != expected {
                problem.get_or_insert(format!(
                    "slot {}: injected {} but (1+B)A = {expected}",
                    v.slot, v.outcome.injected[0]
                ));
            }
            if v.outcome.dummies_created[0] > 0 {
                with_dummies += 1;
            }
            if v.outcome.dummies_created[0] == 0 && expected > 0 {
                with_backlog += 1;
            }
            slots += 1;
        })
        .map_err(|e| format!("scenario {i}: {e}"))?;
        if let Some(p) = problem {
            return Err(format!("scenario {i}: {p}"));
        }
    }
    ensure(with_dummies > 0 && with_backlog > 0, "queue contents never varied enough to matter")?;
    Ok(format!(
        "{slots} slots over 20 scenarios; {with_dummies} needed dummies, {with_backlog} were fully served from Y"
    ))
}

fn margin() -> Verdict {
    let topo = two_lobe();
    let star = solve_lambda_star(&CapacityProblem::single(topo.clone(), 4), false)
        .map_err(|e| e.to_string())?
        .lambda_star;
    let eps = 0.05;
    let low = 0.9 * (1.0 - eps / (1.0 + eps)) * star;
    let high = 1.1 * star;
    let policy = PolicySpec::new(PolicyName::Pi2).with_eps(eps);
    let cases: Vec<(f64, u64)> = [low, high].iter().flat_map(|&r| (1..=3).map(move |s| (r, s))).collect();
    let results: Vec<(f64, RunResult)> = cases
        .par_iter()
        .map(|&(rate, seed)| {
            let s = Scenario::new(topo.clone(), ArrivalSpec::poisson(rate), policy, SWEEP_HORIZON, seed)
                .expect("two-lobe scenario is valid");
            (rate, run(&s, fast()).expect("two-lobe run succeeds"))
        })
        .collect();
    let mut notes = Vec::new();
    for (rate, r) in &results {
        let slope = r.summary.slope;
        if *rate == low {
            ensure(r.summary.stable, format!("lambda {rate:.4} seed {}: slope {slope:.2e}", r.summary.seed))?;
        } else {
            ensure(
                slope >= SLOPE_UNSTABLE || r.summary.halted,
                format!("lambda {rate:.4} seed {}: slope {slope:.2e}", r.summary.seed),
            )?;
        }
        notes.push(format!("{slope:.1e}"));
    }
    Ok(format!(
        "lambda* = {star:.4}; stable at {low:.4}, unstable at {high:.4}; slopes {}",
        notes.join(", ")
    ))
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let on = |n: u32| wanted.is_empty() || wanted.contains(&n);
    let mut failed = 0;
    let mut report = |n: u32, title: &str, verdict: Verdict| {
        match verdict {
            Ok(msg) => println!("PASS criterion {n:>2} {title}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {n:>2} {title}: {msg}");
            }
        }
    };

    if on(1) {
        report(1, "LP bound, grid C=2", lp_grid(2, 8.0 - 1e-6, 8.0 + 1e-6));
    }
    if on(2) {
        report(2, "LP bound, grid C=3", lp_grid(3, 9.7, 9.9));
    }
    let pi3 = (on(3) || on(4) || on(5)).then(|| sweep(PolicyName::Pi3));
    if on(3) {
        report(3, "stability knee, pi3", knee(pi3.as_ref().unwrap()));
    }
    if on(4) {
        let bar = sweep(PolicyName::Pi3bar);
        report(4, "pi3bar equivalence", equivalence(pi3.as_ref().unwrap(), &bar));
    }
    if on(5) {
        report(5, "throughput matching", throughput(pi3.as_ref().unwrap()));
    }
    if on(6) {
        report(6, "coupled dominance", dominance());
    }
    if on(7) {
        report(7, "safety invariants", safety());
    }
    if on(8) {
        report(8, "oracle equivalence", oracle());
    }
    if on(9) {
        report(9, "push decoupling", decoupling());
    }
    if on(10) {
        report(10, "stability margin", margin());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
