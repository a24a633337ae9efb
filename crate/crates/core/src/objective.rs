//! Objectives over controller parameters.

use serde::{Deserialize, Serialize};

use crate::cloud::ParameterVector;
use crate::error::Result;
use crate::plant::{cost_j1, cost_j2_total, run_episode, EpisodeTrace, PlantModel, SimConfig};

/// Costs of one evaluation as seen by gradient refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineCost {
    /// Value the refinement descends.
    pub descent: f64,
    /// Value compared against the stopping threshold.
    pub score: f64,
}

/// Something every optimizer in this crate can minimize.
///
/// Global phases minimize [`cost`](Objective::cost). Gradient refinement may
/// descend a different functional of the same evaluation; it is handed both
/// through [`refine_cost`](Objective::refine_cost), and the threshold is
/// always judged on `score`.
pub trait Objective {
    fn cost(&mut self, params: &ParameterVector) -> f64;

    fn refine_cost(&mut self, params: &ParameterVector) -> RefineCost {
        let c = self.cost(params);
        RefineCost { descent: c, score: c }
    }
}

impl<F> Objective for F
where
    F: FnMut(&ParameterVector) -> f64,
{
    fn cost(&mut self, params: &ParameterVector) -> f64 {
        self(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostScale {
    /// Time-weighted error divided by `T * dt * T^2`.
    #[default]
    Normalized,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeCosts {
    pub j1: f64,
    pub j2: f64,
    pub diverged: bool,
}

/// Closed-loop tuning problem: the time-weighted error `J1` drives the
/// global search and is the threshold score; the squared error `J2` is
/// descended during refinement. Every evaluation replays the same noise and
/// droplet streams.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem {
    pub plant: PlantModel,
    pub sim: SimConfig,
    pub scale: CostScale,
}

impl ControlProblem {
    pub fn new(plant: PlantModel, sim: SimConfig, scale: CostScale) -> Result<Self> {
        plant.validate()?;
        sim.validate()?;
        Ok(Self { plant, sim, scale })
    }

    pub fn simulate(&self, params: &ParameterVector) -> EpisodeTrace {
        run_episode(params, &self.plant, &self.sim)
    }

    pub fn j1_divisor(&self) -> f64 {
        match self.scale {
            CostScale::Raw => 1.0,
            CostScale::Normalized => {
                let t = self.sim.horizon as f64;
                t * self.sim.dt * t * t
            }
        }
    }

    pub fn costs(&self, params: &ParameterVector) -> EpisodeCosts {
        let trace = self.simulate(params);
        // Horizon >= 1 is checked in `new`, so neither cost can fail here.
        let j1 = cost_j1(&trace, self.sim.dt).expect("non-empty trace") / self.j1_divisor();
        let j2 = cost_j2_total(&trace).expect("non-empty trace");
        EpisodeCosts { j1, j2, diverged: trace.diverged }
    }
}

impl Objective for ControlProblem {
    fn cost(&mut self, params: &ParameterVector) -> f64 {
        self.costs(params).j1
    }

    fn refine_cost(&mut self, params: &ParameterVector) -> RefineCost {
        let c = self.costs(params);
        RefineCost { descent: c.j2, score: c.j1 }
    }
}
