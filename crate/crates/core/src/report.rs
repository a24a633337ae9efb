//! Evaluation accounting shared by every optimizer.
//!
//! All methods push each objective evaluation through an [`EvalTracker`], so
//! "evaluations to threshold" means the same thing for every method.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cloud::ParameterVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Hybrid,
    SingleChaos,
    CgOnly,
    Ga,
    /// Scaled chaos search on its own.
    Chaos,
}

impl Method {
    /// The four methods of a comparison run, in table order.
    pub const COMPARED: [Method; 4] = [Method::Hybrid, Method::SingleChaos, Method::CgOnly, Method::Ga];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hybrid => "hybrid",
            Method::SingleChaos => "single-chaos",
            Method::CgOnly => "cg-only",
            Method::Ga => "ga",
            Method::Chaos => "chaos",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Number of evaluations until the best score first reached the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalsToThreshold {
    Reached(usize),
    /// The run ended (budget spent or method converged) above threshold.
    BudgetExhausted { budget: usize },
}

impl EvalsToThreshold {
    pub fn reached(&self) -> Option<usize> {
        match *self {
            EvalsToThreshold::Reached(n) => Some(n),
            EvalsToThreshold::BudgetExhausted { .. } => None,
        }
    }
}

impl fmt::Display for EvalsToThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalsToThreshold::Reached(n) => write!(f, "{n}"),
            EvalsToThreshold::BudgetExhausted { .. } => f.write_str("budget-exhausted"),
        }
    }
}

/// Median evaluations to threshold over a batch of runs, counting runs that
/// never reached it as infinitely long. `None` when the median itself is
/// infinite or the batch is empty.
pub fn median_evals(results: &[EvalsToThreshold]) -> Option<f64> {
    if results.is_empty() {
        return None;
    }
    let mut n: Vec<f64> = results.iter().map(|r| r.reached().map_or(f64::INFINITY, |n| n as f64)).collect();
    n.sort_by(f64::total_cmp);
    let mid = n.len() / 2;
    let m = if n.len() % 2 == 1 { n[mid] } else { 0.5 * (n[mid - 1] + n[mid]) };
    m.is_finite().then_some(m)
}

/// Fraction of runs that reached the threshold.
pub fn success_rate(results: &[EvalsToThreshold]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results.iter().filter(|r| r.reached().is_some()).count() as f64 / results.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    /// 1-based evaluation index.
    pub evaluation: usize,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerReport {
    pub method: Method,
    pub seed: u64,
    pub budget: usize,
    pub evaluations: usize,
    pub evals_to_threshold: EvalsToThreshold,
    pub best_cost: f64,
    pub best_params: Option<ParameterVector>,
    /// One entry per improvement of the best score.
    pub history: Vec<HistoryPoint>,
}

/// When a method stops: after `eval_budget` evaluations or once the best
/// score is at or below `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub eval_budget: usize,
    pub threshold: f64,
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if self.eval_budget == 0 {
            return Err(Error::InvalidArgument("evaluation budget must be >= 1".into()));
        }
        if self.threshold.is_nan() {
            return Err(Error::InvalidArgument("threshold must be a number".into()));
        }
        Ok(())
    }

    pub fn tracker(&self) -> EvalTracker {
        EvalTracker::new(self.eval_budget, self.threshold)
    }
}

/// Counts evaluations and remembers the best score seen.
#[derive(Debug, Clone)]
pub struct EvalTracker {
    budget: usize,
    threshold: f64,
    evaluations: usize,
    best_cost: f64,
    best_params: Option<ParameterVector>,
    reached_at: Option<usize>,
    history: Vec<HistoryPoint>,
}

impl EvalTracker {
    pub fn new(budget: usize, threshold: f64) -> Self {
        Self {
            budget,
            threshold,
            evaluations: 0,
            best_cost: f64::INFINITY,
            best_params: None,
            reached_at: None,
            history: Vec::new(),
        }
    }

    /// Records one evaluation and returns whether it improved the best score.
    pub fn record(&mut self, score: f64, params: Option<&ParameterVector>) -> Result<bool> {
        self.evaluations += 1;
        if !score.is_finite() {
            return Err(Error::Evaluation { evaluation: self.evaluations, value: score });
        }
        if score >= self.best_cost {
            return Ok(false);
        }
        self.best_cost = score;
        self.best_params = params.cloned();
        self.history.push(HistoryPoint { evaluation: self.evaluations, best_so_far: score });
        if self.reached_at.is_none() && score <= self.threshold {
            self.reached_at = Some(self.evaluations);
        }
        Ok(true)
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn best_cost(&self) -> f64 {
        self.best_cost
    }

    pub fn best_params(&self) -> Option<&ParameterVector> {
        self.best_params.as_ref()
    }

    pub fn reached(&self) -> bool {
        self.reached_at.is_some()
    }

    pub fn exhausted(&self) -> bool {
        self.evaluations >= self.budget
    }

    /// Threshold reached or budget spent.
    pub fn done(&self) -> bool {
        self.reached() || self.exhausted()
    }

    pub fn evals_to_threshold(&self) -> EvalsToThreshold {
        match self.reached_at {
            Some(n) => EvalsToThreshold::Reached(n),
            None => EvalsToThreshold::BudgetExhausted { budget: self.budget },
        }
    }

    pub fn into_report(self, method: Method, seed: u64) -> OptimizerReport {
        OptimizerReport {
            method,
            seed,
            budget: self.budget,
            evaluations: self.evaluations,
            evals_to_threshold: self.evals_to_threshold(),
            best_cost: self.best_cost,
            best_params: self.best_params,
            history: self.history,
        }
    }
}
