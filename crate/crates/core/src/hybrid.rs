//! Two-phase tuning: a scaled chaos search over the whole parameter vector,
//! then conjugate-gradient refinement of the continuous part of its best
//! point with the structure and rule table frozen.

use serde::{Deserialize, Serialize};

use crate::chaos::{run_chaos, ChaosConfig, SearchSpace};
use crate::cloud::ParameterVector;
use crate::error::Result;
use crate::gradient::{cg_refine_with, Bounds, CGConfig, CgReport, Halt};
use crate::objective::Objective;
use crate::report::{EvalTracker, Method, OptimizerReport, StopRule};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HybridConfig {
    /// Phase one; `max_iterations` is the number of evaluations it may use.
    pub chaos: ChaosConfig,
    pub cg: CGConfig,
}

#[derive(Debug, Clone)]
pub struct HybridOutcome {
    pub report: OptimizerReport,
    pub chaos_evals: usize,
    pub cg_evals: usize,
    /// Best score when the chaos phase ended.
    pub cost_before_refine: f64,
    pub cost_after_refine: f64,
    /// `None` when the chaos phase already met the stop rule.
    pub cg: Option<CgReport>,
}

/// Runs CG on the continuous parameters of `start`, descending
/// `refine_cost().descent` while every evaluation's score goes to `tracker`.
/// Refinement halts as soon as the tracker's budget or threshold is met.
pub fn refine_continuous<O: Objective + ?Sized>(
    objective: &mut O,
    start: &ParameterVector,
    cfg: &CGConfig,
    tracker: &mut EvalTracker,
) -> Result<CgReport> {
    let bounds = Bounds::new(start.continuous_bounds())?;
    let f = |x: &[f64]| -> std::result::Result<f64, Halt> {
        if tracker.done() {
            return Err(Halt::Stop);
        }
        let params = start.with_continuous(x)?;
        let cost = objective.refine_cost(&params);
        tracker.record(cost.score, Some(&params))?;
        Ok(cost.descent)
    };
    let (_, report) = cg_refine_with(f, &start.continuous(), &bounds, cfg)?;
    Ok(report)
}

pub fn hybrid_optimize<O: Objective + ?Sized>(
    objective: &mut O,
    space: &SearchSpace,
    cfg: &HybridConfig,
    stop: StopRule,
) -> Result<HybridOutcome> {
    stop.validate()?;
    cfg.cg.validate()?;
    let mut tracker = stop.tracker();
    let chaos = run_chaos(objective, space, &cfg.chaos, true, &mut tracker)?;
    let chaos_evals = tracker.evaluations();
    let cost_before_refine = tracker.best_cost();

    let cg = if tracker.done() {
        None
    } else {
        Some(refine_continuous(objective, &chaos.best, &cfg.cg, &mut tracker)?)
    };
    let cg_evals = tracker.evaluations() - chaos_evals;
    let cost_after_refine = tracker.best_cost();
    Ok(HybridOutcome {
        report: tracker.into_report(Method::Hybrid, cfg.chaos.seed),
        chaos_evals,
        cg_evals,
        cost_before_refine,
        cost_after_refine,
        cg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::RefineCost;
    use crate::report::EvalsToThreshold;

    fn stop(eval_budget: usize, threshold: f64) -> StopRule {
        StopRule { eval_budget, threshold }
    }

    fn shifted_sphere(p: &ParameterVector) -> f64 {
        p.continuous().iter().map(|v| (v - 0.2).powi(2)).sum()
    }

    #[test]
    fn refinement_never_worsens_the_incumbent() {
        let space = SearchSpace::fixed(2, 2, 3, 1.0);
        for seed in 0..5 {
            let cfg = HybridConfig { chaos: ChaosConfig { max_iterations: 300, seed, ..ChaosConfig::default() }, ..HybridConfig::default() };
            let out = hybrid_optimize(&mut shifted_sphere, &space, &cfg, stop(2000, 0.0)).unwrap();
            assert_eq!(out.chaos_evals, 300);
            assert!(out.cost_after_refine < out.cost_before_refine);
            assert_eq!(out.chaos_evals + out.cg_evals, out.report.evaluations);
            assert!(out.report.evaluations <= 2000);
        }
    }

    #[test]
    fn chaos_phase_meeting_the_threshold_skips_refinement() {
        let cfg = HybridConfig::default();
        let out = hybrid_optimize(&mut |_: &ParameterVector| 0.0, &SearchSpace::default(), &cfg, stop(100, 1e-3)).unwrap();
        assert!(out.cg.is_none());
        assert_eq!(out.cg_evals, 0);
        assert_eq!(out.report.evals_to_threshold, EvalsToThreshold::Reached(1));
    }

    #[test]
    fn budget_halts_refinement() {
        let space = SearchSpace::fixed(1, 1, 1, 1.0);
        let cfg = HybridConfig { chaos: ChaosConfig { max_iterations: 50, ..ChaosConfig::default() }, ..HybridConfig::default() };
        let out = hybrid_optimize(&mut shifted_sphere, &space, &cfg, stop(60, 0.0)).unwrap();
        assert_eq!(out.report.evaluations, 60);
        assert_eq!(out.cg_evals, 10);
        assert_eq!(out.report.evals_to_threshold, EvalsToThreshold::BudgetExhausted { budget: 60 });
        assert_eq!(out.cg.unwrap().stop, crate::gradient::CgStop::Halted);
    }

    /// Descends one functional and scores another.
    struct Split;

    impl Objective for Split {
        fn cost(&mut self, p: &ParameterVector) -> f64 {
            shifted_sphere(p) + 1.0
        }

        fn refine_cost(&mut self, p: &ParameterVector) -> RefineCost {
            RefineCost { descent: shifted_sphere(p), score: self.cost(p) }
        }
    }

    #[test]
    fn threshold_is_judged_on_the_score() {
        let space = SearchSpace::fixed(1, 1, 1, 1.0);
        let cfg = HybridConfig { chaos: ChaosConfig { max_iterations: 200, ..ChaosConfig::default() }, ..HybridConfig::default() };
        // The descended value reaches 0.5 quickly; the score never can.
        let out = hybrid_optimize(&mut Split, &space, &cfg, stop(5000, 0.5)).unwrap();
        assert!(out.report.best_cost >= 1.0);
        assert!(out.report.evals_to_threshold.reached().is_none());
        let p = out.report.best_params.unwrap();
        assert_eq!(Split.cost(&p), out.report.best_cost);
    }

    #[test]
    fn deterministic_per_seed() {
        let space = SearchSpace { m1: (1, 3), m2: (1, 3), o: (1, 5), ..SearchSpace::default() };
        let cfg = HybridConfig { chaos: ChaosConfig { max_iterations: 400, seed: 11, ..ChaosConfig::default() }, ..HybridConfig::default() };
        let a = hybrid_optimize(&mut shifted_sphere, &space, &cfg, stop(1500, 1e-6)).unwrap();
        let b = hybrid_optimize(&mut shifted_sphere, &space, &cfg, stop(1500, 1e-6)).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.cg, b.cg);
    }
}
