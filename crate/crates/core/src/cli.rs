//! The `cloudopt` command line.
//!
//! Exit codes: 0 success, 1 failed check, 2 bad config / input / IO,
//! 3 objective evaluation failure.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::baselines::{cg_only, ga_optimize, single_chaos};
use crate::chaos::ChaosConfig;
use crate::cloud::ParameterVector;
use crate::config::{ObjectiveMode, RunConfig};
use crate::error::{Error, Result};
use crate::format::sig9;
use crate::gradcheck::{run_gradcheck, GradCheckOptions, GradCheckResult, DEFAULT_FD_STEP, DEFAULT_TOLERANCE};
use crate::hybrid::{hybrid_optimize, HybridConfig};
use crate::objective::{ControlProblem, Objective, RefineCost};
use crate::report::{median_evals, success_rate, Method, OptimizerReport};

#[derive(Debug, Parser)]
#[command(name = "cloudopt", version, about = "Tune triangle cloud-model controllers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured method for one seed; writes report.json and
    /// best_params.json.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a controller in closed loop; writes trace.csv.
    Simulate {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run all four methods on every configured seed; writes table.csv and
    /// summary.csv.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare finite-difference and analytic gradients on smooth test
    /// functions.
    Gradcheck {
        #[arg(long, default_value_t = DEFAULT_FD_STEP)]
        fd_step: f64,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
        /// Flip one analytic gradient (the check must then fail).
        #[arg(long)]
        inject_wrong_sign: bool,
    },
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Evaluation { .. } => 3,
        _ => 2,
    }
}

pub fn run(cli: Cli) -> ExitCode {
    let result = match cli.command {
        Command::Optimize { config, seed, out } => cmd_optimize(&config, seed, &out).map(|o| {
            println!(
                "{} seed {}: evals_to_threshold {}, best_cost {}",
                o.report.method,
                o.report.seed,
                o.report.evals_to_threshold,
                sig9(o.report.best_cost)
            );
            true
        }),
        Command::Simulate { params, config, out } => cmd_simulate(&params, &config, &out).map(|_| true),
        Command::Compare { config, out } => cmd_compare(&config, &out).map(|runs| {
            print!("{}", summary_csv(&runs));
            true
        }),
        Command::Gradcheck { fd_step, tolerance, inject_wrong_sign } => {
            cmd_gradcheck(&GradCheckOptions { fd_step, tolerance, inject_wrong_sign }).map(|results| {
                for r in &results {
                    println!(
                        "{:<12} max relative error {:<16} {}",
                        r.name,
                        sig9(r.max_relative_error),
                        if r.passed { "ok" } else { "FAIL" }
                    );
                }
                results.iter().all(|r| r.passed)
            })
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// The configured objective.
#[derive(Debug, Clone)]
pub enum RunObjective {
    ClosedLoop(ControlProblem),
    Zero,
}

impl RunObjective {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        Ok(match cfg.objective {
            ObjectiveMode::ClosedLoop => RunObjective::ClosedLoop(cfg.problem()?),
            ObjectiveMode::Zero => RunObjective::Zero,
        })
    }
}

impl Objective for RunObjective {
    fn cost(&mut self, params: &ParameterVector) -> f64 {
        match self {
            RunObjective::ClosedLoop(p) => p.cost(params),
            RunObjective::Zero => 0.0,
        }
    }

    fn refine_cost(&mut self, params: &ParameterVector) -> RefineCost {
        match self {
            RunObjective::ClosedLoop(p) => p.refine_cost(params),
            RunObjective::Zero => RefineCost { descent: 0.0, score: 0.0 },
        }
    }
}

/// One method run with its phase split (zero for single-phase methods that
/// have no chaos or no gradient part).
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: OptimizerReport,
    pub chaos_evals: usize,
    pub cg_evals: usize,
}

pub fn run_method(cfg: &RunConfig, method: Method, seed: u64) -> Result<RunOutcome> {
    let mut objective = RunObjective::from_config(cfg)?;
    let space = cfg.search_space();
    let stop = cfg.stop_rule();
    Ok(match method {
        Method::Hybrid => {
            let hc = HybridConfig { chaos: cfg.chaos_config(seed), cg: cfg.cg_config() };
            let out = hybrid_optimize(&mut objective, &space, &hc, stop)?;
            RunOutcome { report: out.report, chaos_evals: out.chaos_evals, cg_evals: out.cg_evals }
        }
        Method::SingleChaos => {
            let cc = ChaosConfig { max_iterations: cfg.eval_budget, ..cfg.chaos_config(seed) };
            let report = single_chaos(&mut objective, &space, &cc, stop)?;
            RunOutcome { chaos_evals: report.evaluations, cg_evals: 0, report }
        }
        Method::CgOnly => {
            let report = cg_only(&mut objective, &space, &cfg.cg_config(), stop, seed)?;
            RunOutcome { chaos_evals: 0, cg_evals: report.evaluations, report }
        }
        Method::Ga => {
            let report = ga_optimize(&mut objective, &space, &cfg.ga_config(seed), stop)?;
            RunOutcome { chaos_evals: 0, cg_evals: 0, report }
        }
        Method::Chaos => return Err(Error::Config("method chaos is not runnable from a config".into())),
    })
}

/// `report.json` body: exactly the six summary keys, numbers with 9
/// significant digits.
pub fn report_json(o: &RunOutcome) -> String {
    let r = &o.report;
    let evals = match r.evals_to_threshold.reached() {
        Some(n) => n.to_string(),
        None => format!("\"{}\"", r.evals_to_threshold),
    };
    format!(
        "{{\n  \"method\": \"{}\",\n  \"seed\": {},\n  \"evals_to_threshold\": {},\n  \"best_cost\": {},\n  \"chaos_evals\": {},\n  \"cg_evals\": {}\n}}\n",
        r.method,
        r.seed,
        evals,
        json_number(r.best_cost),
        o.chaos_evals,
        o.cg_evals
    )
}

fn json_number(x: f64) -> String {
    if x.is_finite() {
        sig9(x)
    } else {
        "null".to_owned()
    }
}

fn create_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::Config(format!("cannot create {}: {e}", out.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

pub fn cmd_optimize(config: &Path, seed: u64, out: &Path) -> Result<RunOutcome> {
    let cfg = RunConfig::load(config)?;
    create_out(out)?;
    let outcome = run_method(&cfg, cfg.method, seed)?;
    let best = outcome
        .report
        .best_params
        .as_ref()
        .ok_or_else(|| Error::invalid_argument("run produced no parameters"))?;
    write_file(&out.join("report.json"), &report_json(&outcome))?;
    write_file(&out.join("best_params.json"), &(serde_json::to_string_pretty(best)? + "\n"))?;
    Ok(outcome)
}

pub fn load_params(path: &Path) -> Result<ParameterVector> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let params: ParameterVector = serde_json::from_str(&text)
        .map_err(|e| Error::invalid_parameters(format!("{}: {e}", path.display())))?;
    params.validate()?;
    Ok(params)
}

pub fn cmd_simulate(params: &Path, config: &Path, out: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let params = load_params(params)?;
    let trace = cfg.problem()?.simulate(&params);
    create_out(out)?;
    let path = out.join("trace.csv");
    let file = File::create(&path).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    trace.write_csv(BufWriter::new(file))?;
    Ok(())
}

/// Runs every method on every seed. Cells run in parallel and come back in
/// (method, seed) order.
pub fn compare_runs(cfg: &RunConfig) -> Result<Vec<RunOutcome>> {
    let cells: Vec<(Method, u64)> =
        Method::COMPARED.iter().flat_map(|&m| cfg.seeds.iter().map(move |&s| (m, s))).collect();
    cells.par_iter().map(|&(m, s)| run_method(cfg, m, s)).collect::<Vec<_>>().into_iter().collect()
}

pub fn table_csv(runs: &[RunOutcome]) -> String {
    let mut s = String::from("method,seed,evals_to_threshold,best_cost\n");
    for o in runs {
        let r = &o.report;
        writeln!(s, "{},{},{},{}", r.method, r.seed, r.evals_to_threshold, sig9(r.best_cost)).unwrap();
    }
    s
}

pub fn summary_csv(runs: &[RunOutcome]) -> String {
    let mut s = String::from("method,median_evals,success_rate\n");
    for m in Method::COMPARED {
        let results: Vec<_> = runs.iter().filter(|o| o.report.method == m).map(|o| o.report.evals_to_threshold).collect();
        if results.is_empty() {
            continue;
        }
        let median = median_evals(&results).map_or_else(|| "budget-exhausted".to_owned(), sig9);
        writeln!(s, "{m},{median},{}", sig9(success_rate(&results))).unwrap();
    }
    s
}

pub fn cmd_compare(config: &Path, out: &Path) -> Result<Vec<RunOutcome>> {
    let cfg = RunConfig::load(config)?;
    create_out(out)?;
    let runs = compare_runs(&cfg)?;
    write_file(&out.join("table.csv"), &table_csv(&runs))?;
    write_file(&out.join("summary.csv"), &summary_csv(&runs))?;
    Ok(runs)
}

pub fn cmd_gradcheck(opts: &GradCheckOptions) -> Result<Vec<GradCheckResult>> {
    run_gradcheck(opts)
}
