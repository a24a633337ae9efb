//! Acceptance suite. Each criterion prints one PASS/FAIL line with its
//! measurement and wall time; the test fails if any criterion does.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use tempfile::TempDir;

use cloudopt_core::baselines::random_params;
use cloudopt_core::chaos::{decode, decode_slots, LogisticOrbit, SearchBounds, SearchSpace, POOL_SIZE};
use cloudopt_core::cli::{compare_runs, RunObjective};
use cloudopt_core::config::RunConfig;
use cloudopt_core::gradcheck::{run_gradcheck, GradCheckOptions};
use cloudopt_core::gradient::{cg_refine, Bounds, CGConfig, CgStop};
use cloudopt_core::hybrid::{hybrid_optimize, HybridConfig};
use cloudopt_core::plant::{
    cost_j1, cost_j2_total, plant_step, run_episode, EpisodeTrace, PlantModel, SimConfig, TraceRow,
};
use cloudopt_core::report::{median_evals, EvalsToThreshold};
use cloudopt_core::Method;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn desk_config() -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/desk.toml");
    RunConfig::load(&path).expect("desk config loads")
}

fn fmt_median(m: f64) -> String {
    if m.is_finite() { m.to_string() } else { "budget-exhausted".to_owned() }
}

fn desk_ordering() -> Outcome {
    let cfg = desk_config();
    check(cfg.seeds.len() == 20, || format!("{} seeds", cfg.seeds.len()))?;
    let runs = compare_runs(&cfg).map_err(|e| e.to_string())?;
    let results = |m: Method| -> Vec<EvalsToThreshold> {
        runs.iter().filter(|o| o.report.method == m).map(|o| o.report.evals_to_threshold).collect()
    };
    let median = |m: Method| median_evals(&results(m)).unwrap_or(f64::INFINITY);
    let (hybrid, single, ga) = (median(Method::Hybrid), median(Method::SingleChaos), median(Method::Ga));
    let cg_fail = results(Method::CgOnly).iter().filter(|r| r.reached().is_none()).count();
    let detail = format!(
        "medians hybrid {} single-chaos {} ga {}; cg-only exhausted {cg_fail}/20",
        fmt_median(hybrid),
        fmt_median(single),
        fmt_median(ga),
    );
    check(hybrid < single && hybrid < ga && cg_fail >= 10, || detail.clone())?;
    Ok(detail)
}

fn plant_fidelity() -> Outcome {
    let m = PlantModel::third_order();
    let cases = [
        (plant_step(&m, &[1.0, 0.0, 0.0], &[0.0; 3], 0.0).y, 3.737),
        (plant_step(&m, &[0.0; 3], &[0.0; 3], 0.0).y, 0.0),
        (plant_step(&m, &[0.0; 3], &[1.0, 0.0, 0.0], 0.0).y, 0.17),
    ];
    for (got, want) in cases {
        check(got == want, || format!("hand case {got} != {want}"))?;
    }
    let p2 = 8.0 - 3.737 * 4.0 + 4.212 * 2.0 - 1.492;
    check(f64::abs(p2) < 0.05, || format!("|p(2)| = {p2}"))?;

    let space = SearchSpace { pu: 5.0, ..SearchSpace::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut diverged = 0;
    for i in 0..200 {
        let params = random_params(&space, &mut rng).map_err(|e| e.to_string())?;
        let sim = SimConfig { horizon: 200, noise_seed: i, droplet_seed: i + 1, ..SimConfig::default() };
        let trace = run_episode(&params, &m, &sim);
        let bounded = trace.rows.iter().all(|r| r.y.is_finite() && r.y.abs() <= m.output_clamp && r.u.is_finite());
        check(bounded, || format!("run {i} left the clamp"))?;
        let j1 = cost_j1(&trace, sim.dt).map_err(|e| e.to_string())?;
        let j2 = cost_j2_total(&trace).map_err(|e| e.to_string())?;
        check(j1.is_finite() && j2.is_finite(), || format!("run {i}: costs {j1} {j2}"))?;
        diverged += usize::from(trace.diverged);
    }
    Ok(format!("hand cases exact, p(2) = {p2:.4}, 200 closed-loop runs bounded ({diverged} clamped)"))
}

fn trace_of(errors: &[f64]) -> EpisodeTrace {
    let rows = errors.iter().enumerate().map(|(i, &e)| TraceRow { k: i + 1, r: 0.0, y: -e, u: 0.0, e }).collect();
    EpisodeTrace { rows, diverged: false }
}

fn close(got: f64, want: f64) -> bool {
    if want == 0.0 {
        got == 0.0
    } else {
        ((got - want) / want).abs() <= 1e-12
    }
}

fn cost_oracles() -> Outcome {
    let j1_cases: [(&[f64], f64, f64); 3] =
        [(&[1.0, 0.5, 0.25], 0.1, 0.525), (&[0.0; 10], 0.1, 0.0), (&[2.0], 1.0, 2.0)];
    for (e, dt, want) in j1_cases {
        let got = cost_j1(&trace_of(e), dt).map_err(|e| e.to_string())?;
        check(close(got, want), || format!("J1 {e:?} = {got}, want {want}"))?;
    }
    let j2_cases: [(&[f64], f64); 3] = [(&[1.0, 1.0], 1.0), (&[0.0; 10], 0.0), (&[3.0], 4.5)];
    for (e, want) in j2_cases {
        let got = cost_j2_total(&trace_of(e)).map_err(|e| e.to_string())?;
        check(close(got, want), || format!("J2 {e:?} = {got}, want {want}"))?;
    }
    Ok("J1 0.525/0/2 and J2 1/0/4.5 within 1e-12".to_owned())
}

fn logistic_map() -> Outcome {
    const N: usize = 1_000_000;
    const BINS: usize = 50;
    let orbit = LogisticOrbit::new(0.123, 0).map_err(|e| e.to_string())?;
    // Equal-probability bins of the arcsine law on (0, 1).
    let edges: Vec<f64> =
        (0..=BINS).map(|i| (std::f64::consts::PI * i as f64 / (2 * BINS) as f64).sin().powi(2)).collect();
    let mut counts = [0u64; BINS];
    for (i, a) in orbit.take(N).enumerate() {
        check(a > 0.0 && a < 1.0, || format!("iterate {i} = {a}"))?;
        let bin = edges[1..].partition_point(|&edge| edge <= a).min(BINS - 1);
        counts[bin] += 1;
    }
    let expected = N as f64 / BINS as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = ChiSquared::new((BINS - 1) as f64).unwrap().sf(stat);
    let detail = format!("chi-square {stat:.2} on 49 dof, p = {p:.4}");
    check(p > 0.01, || detail.clone())?;
    Ok(detail)
}

fn decode_safety() -> Outcome {
    let spaces = [SearchSpace::default(), SearchSpace { m1: (2, 3), m2: (1, 3), o: (2, 5), pu: 2.0, ku_rounding: true }];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut violations = 0;
    for i in 0..100_000 {
        let space = &spaces[i % 2];
        let mut bounds = SearchBounds::full(space);
        let alphas: Vec<f64> = (0..POOL_SIZE).map(|_| rng.random_range(f64::EPSILON..1.0)).collect();
        if i % 4 >= 2 {
            let incumbent: Vec<f64> = (0..POOL_SIZE).map(|_| rng.random()).collect();
            let values = decode_slots(&incumbent, &bounds, space);
            bounds.contract(&values, 0.5);
        }
        let params = decode(&alphas, &bounds, space);
        let s = &params.structure;
        let in_space = (space.m1.0..=space.m1.1).contains(&s.m1)
            && (space.m2.0..=space.m2.1).contains(&s.m2)
            && (space.o.0..=space.o.1).contains(&s.o);
        if params.validate().is_err() || !in_space {
            violations += 1;
        }
    }
    check(violations == 0, || format!("{violations} violations"))?;
    Ok("1e5 pool states, 0 violations".to_owned())
}

fn gradient_fidelity() -> Outcome {
    let results = run_gradcheck(&GradCheckOptions::default()).map_err(|e| e.to_string())?;
    let worst = results.iter().map(|r| r.max_relative_error).fold(0.0, f64::max);
    check(results.len() == 5 && worst <= 1e-4, || format!("worst relative error {worst:e}"))?;
    let status = Command::new(env!("CARGO_BIN_EXE_cloudopt")).arg("gradcheck").output().map_err(|e| e.to_string())?.status;
    check(status.code() == Some(0), || format!("gradcheck exited {status}"))?;
    Ok(format!("worst relative error {worst:.2e} at h = 1e-5, cli exit 0"))
}

fn cg_correctness() -> Outcome {
    let mut details = Vec::new();
    for (n, seed) in [(2, 11), (5, 12), (10, 13)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = m.transpose() * &m + DMatrix::identity(n, n);
        let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let solution = a.clone().cholesky().ok_or("not SPD")?.solve(&b);
        let f = |p: &[f64]| {
            let x = DVector::from_column_slice(p);
            0.5 * x.dot(&(&a * &x)) - b.dot(&x)
        };
        let (p, report) =
            cg_refine(f, &vec![0.0; n], &Bounds::unbounded(n), &CGConfig::default()).map_err(|e| e.to_string())?;
        let x = DVector::from_column_slice(&p);
        let grad = (&a * &x - &b).norm();
        let err = (&x - &solution).amax();
        check(report.stop == CgStop::GradientTolerance && report.iterations <= n + 1, || {
            format!("n = {n}: {:?} after {} iterations", report.stop, report.iterations)
        })?;
        check(grad <= 1e-8 && err <= 1e-6, || format!("n = {n}: gradient {grad:e}, error {err:e}"))?;
        details.push(format!("n={n}: {} it, |g| {grad:.1e}", report.iterations));
    }
    Ok(details.join("; "))
}

fn hybrid_smoke() -> Outcome {
    let mut cfg = desk_config();
    cfg.j_threshold = 0.0;
    let space = cfg.search_space();
    let mut strict = 0;
    for seed in 42..62 {
        let mut objective = RunObjective::from_config(&cfg).map_err(|e| e.to_string())?;
        let hc = HybridConfig { chaos: cfg.chaos_config(seed), cg: cfg.cg_config() };
        let out = hybrid_optimize(&mut objective, &space, &hc, cfg.stop_rule()).map_err(|e| e.to_string())?;
        let (before, after) = (out.cost_before_refine, out.cost_after_refine);
        check(after <= before, || format!("seed {seed}: {before} -> {after}"))?;
        strict += usize::from(after < before);
    }
    let detail = format!("CG strictly improved {strict}/20 seeds");
    check(strict >= 15, || detail.clone())?;
    Ok(detail)
}

fn run_twice(dir: &Path, args: &[&str], outputs: &[&str]) -> Result<(), String> {
    let mut captured: Vec<Vec<Vec<u8>>> = Vec::new();
    for round in ["first", "second"] {
        let out_dir: PathBuf = dir.join(round);
        let mut full: Vec<&str> = args.to_vec();
        let out_str = out_dir.to_str().unwrap();
        if !outputs.is_empty() {
            full.extend(["--out", out_str]);
        }
        let out = Command::new(env!("CARGO_BIN_EXE_cloudopt")).args(&full).output().map_err(|e| e.to_string())?;
        let mut files = vec![out.stdout, out.stderr];
        for name in outputs {
            files.push(fs::read(out_dir.join(name)).map_err(|e| format!("{}: {e}", args[0]))?);
        }
        captured.push(files);
    }
    check(captured[0] == captured[1], || format!("{} output differs between runs", args[0]))
}

fn cli_determinism() -> Outcome {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        "seeds = [5, 6]\neval_budget = 300\nj_threshold = 0.0\nplant.a = [1.2, -0.4]\nplant.b = [0.5]\n\
         plant.noise_std = 0.05\nsim.horizon = 60\nchaos.iterations = 200\nchaos.stage0 = 80\n",
    )
    .map_err(|e| e.to_string())?;
    let cfg = config.to_str().unwrap();

    let optimize = dir.path().join("optimize");
    run_twice(&optimize, &["optimize", "--config", cfg, "--seed", "7"], &["report.json", "best_params.json"])?;
    let params = optimize.join("first/best_params.json");
    run_twice(
        &dir.path().join("simulate"),
        &["simulate", "--params", params.to_str().unwrap(), "--config", cfg],
        &["trace.csv"],
    )?;
    run_twice(&dir.path().join("compare"), &["compare", "--config", cfg], &["table.csv", "summary.csv"])?;
    run_twice(dir.path(), &["gradcheck"], &[])?;
    run_twice(dir.path(), &["gradcheck", "--inject-wrong-sign"], &[])?;
    Ok("optimize, simulate, compare, gradcheck byte-identical on rerun".to_owned())
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, Option<Duration>, fn() -> Outcome); 9] = [
        ("desk-scale ordering", Some(Duration::from_secs(600)), desk_ordering),
        ("plant fidelity", Some(Duration::from_secs(1)), plant_fidelity),
        ("cost oracles", Some(Duration::from_secs(1)), cost_oracles),
        ("chaos map properties", Some(Duration::from_secs(5)), logistic_map),
        ("decode safety", Some(Duration::from_secs(10)), decode_safety),
        ("gradient fidelity", Some(Duration::from_secs(5)), gradient_fidelity),
        ("cg correctness", Some(Duration::from_secs(5)), cg_correctness),
        ("hybrid pipeline smoke", Some(Duration::from_secs(300)), hybrid_smoke),
        ("cli determinism", None, cli_determinism),
    ];
    let mut failed = Vec::new();
    // Straight to stdout so the lines show up without --nocapture.
    let mut out = std::io::stdout();
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(d), Some(limit)) if took > limit => Err(format!("{d}; over the {limit:?} time limit")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => writeln!(out, "PASS {name}: {detail} [{:.2} s]", took.as_secs_f64()).unwrap(),
            Err(detail) => {
                writeln!(out, "FAIL {name}: {detail} [{:.2} s]", took.as_secs_f64()).unwrap();
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
