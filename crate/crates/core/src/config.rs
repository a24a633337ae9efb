//! Run configuration files.
//!
//! Configs are TOML. Every key has a default, so a file only lists what it
//! changes, typically as flat dotted keys:
//!
//! ```toml
//! method = "hybrid"
//! seeds = [1, 2, 3]
//! eval_budget = 20000
//! j_threshold = 1e-3
//! plant.noise_std = 0.5
//! sim.horizon = 100
//! structure.m1_max = 3
//! chaos.iterations = 1000
//! ```
//!
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::GAConfig;
use crate::chaos::{ChaosConfig, SearchSpace};
use crate::cloud::MAX_CLOUDS;
use crate::error::{Error, Result};
use crate::gradient::{CGConfig, LineSearchOptions};
use crate::objective::{ControlProblem, CostScale};
use crate::plant::{PlantModel, Reference, SimConfig, DEFAULT_OUTPUT_CLAMP};
use crate::report::{Method, StopRule};

/// What the optimizers minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveMode {
    /// Closed-loop episode costs of the configured plant.
    #[default]
    ClosedLoop,
    /// Constant zero, for exercising the pipeline.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub noise_std: f64,
    pub output_clamp: f64,
}

impl Default for PlantSection {
    fn default() -> Self {
        let p = PlantModel::third_order();
        Self { a: p.a, b: p.b, noise_std: p.noise_std, output_clamp: DEFAULT_OUTPUT_CLAMP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub horizon: usize,
    pub dt: f64,
    /// Step reference level.
    pub reference: f64,
    pub noise_seed: u64,
    pub droplet_seed: u64,
    pub e_scale: f64,
    pub de_scale: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let s = SimConfig::default();
        let Reference::Step { level } = s.reference;
        Self {
            horizon: s.horizon,
            dt: s.dt,
            reference: level,
            noise_seed: s.noise_seed,
            droplet_seed: s.droplet_seed,
            e_scale: s.e_scale,
            de_scale: s.de_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructureSection {
    pub m1_min: usize,
    pub m1_max: usize,
    pub m2_min: usize,
    pub m2_max: usize,
    pub o_min: usize,
    pub o_max: usize,
    /// Output gain ceiling.
    pub pu: f64,
    pub ku_rounding: bool,
}

impl Default for StructureSection {
    fn default() -> Self {
        Self {
            m1_min: 1,
            m1_max: MAX_CLOUDS,
            m2_min: 1,
            m2_max: MAX_CLOUDS,
            o_min: 1,
            o_max: MAX_CLOUDS,
            pu: 1.0,
            ku_rounding: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChaosSection {
    /// Evaluations of the chaos phase of the hybrid method.
    pub iterations: usize,
    pub stage0: usize,
    pub stagnation_window: usize,
    pub contraction: f64,
    pub min_radius: f64,
}

impl Default for ChaosSection {
    fn default() -> Self {
        let c = ChaosConfig::default();
        Self {
            iterations: 1000,
            stage0: c.stage0_iterations,
            stagnation_window: c.stagnation_window,
            contraction: c.contraction_lambda,
            min_radius: c.min_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CgSection {
    pub max_iterations: usize,
    pub fd_step: f64,
    pub grad_tolerance: f64,
    pub line_search_tolerance: f64,
    pub max_step: f64,
    pub polish_step: f64,
    /// 0 restarts every `dimension` iterations.
    pub restart_period: usize,
}

impl Default for CgSection {
    fn default() -> Self {
        let c = CGConfig::default();
        Self {
            max_iterations: c.max_iterations,
            fd_step: c.fd_step,
            grad_tolerance: c.grad_tolerance,
            line_search_tolerance: c.line_search.tolerance,
            max_step: c.line_search.max_step,
            polish_step: c.line_search.polish_step,
            restart_period: c.restart_period,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaSection {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub mutation_sigma_fraction: f64,
    pub tournament_size: usize,
    pub elitism: usize,
}

impl Default for GaSection {
    fn default() -> Self {
        let g = GAConfig::default();
        Self {
            population: g.population,
            generations: g.generations,
            crossover_prob: g.crossover_prob,
            mutation_prob: g.mutation_prob,
            mutation_sigma_fraction: g.mutation_sigma_fraction,
            tournament_size: g.tournament_size,
            elitism: g.elitism,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub seeds: Vec<u64>,
    pub eval_budget: usize,
    /// Stop once the best time-weighted error cost is at or below this.
    pub j_threshold: f64,
    pub cost: CostScale,
    pub objective: ObjectiveMode,
    pub plant: PlantSection,
    pub sim: SimSection,
    pub structure: StructureSection,
    pub chaos: ChaosSection,
    pub cg: CgSection,
    pub ga: GaSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::Hybrid,
            seeds: vec![0],
            eval_budget: 20_000,
            j_threshold: 1e-3,
            cost: CostScale::Normalized,
            objective: ObjectiveMode::ClosedLoop,
            plant: PlantSection::default(),
            sim: SimSection::default(),
            structure: StructureSection::default(),
            chaos: ChaosSection::default(),
            cg: CgSection::default(),
            ga: GaSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) | Error::InvalidArgument(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks everything the optimizers would reject later.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.method == Method::Chaos {
            return bad("method must be one of hybrid, single-chaos, cg-only, ga".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.eval_budget == 0 {
            return bad("eval_budget must be >= 1".into());
        }
        if self.j_threshold.is_nan() {
            return bad("j_threshold must be a number".into());
        }
        let wrap = |r: Result<()>| r.map_err(|e| Error::Config(e.to_string()));
        wrap(self.plant_model().validate())?;
        wrap(self.sim_config().validate())?;
        wrap(self.search_space().validate())?;
        wrap(self.chaos_config(0).validate())?;
        wrap(self.cg_config().validate())?;
        wrap(self.ga_config(0).validate())?;
        if self.chaos.iterations == 0 {
            return bad("chaos.iterations must be >= 1".into());
        }
        Ok(())
    }

    pub fn plant_model(&self) -> PlantModel {
        let p = &self.plant;
        PlantModel { a: p.a.clone(), b: p.b.clone(), noise_std: p.noise_std, output_clamp: p.output_clamp }
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.sim;
        SimConfig {
            horizon: s.horizon,
            dt: s.dt,
            reference: Reference::Step { level: s.reference },
            noise_seed: s.noise_seed,
            droplet_seed: s.droplet_seed,
            e_scale: s.e_scale,
            de_scale: s.de_scale,
        }
    }

    pub fn problem(&self) -> Result<ControlProblem> {
        ControlProblem::new(self.plant_model(), self.sim_config(), self.cost)
    }

    pub fn search_space(&self) -> SearchSpace {
        let s = &self.structure;
        SearchSpace {
            m1: (s.m1_min, s.m1_max),
            m2: (s.m2_min, s.m2_max),
            o: (s.o_min, s.o_max),
            pu: s.pu,
            ku_rounding: s.ku_rounding,
        }
    }

    pub fn stop_rule(&self) -> StopRule {
        StopRule { eval_budget: self.eval_budget, threshold: self.j_threshold }
    }

    /// Chaos settings for the hybrid phase; single-scale runs override
    /// `max_iterations` with the whole budget.
    pub fn chaos_config(&self, seed: u64) -> ChaosConfig {
        let c = &self.chaos;
        ChaosConfig {
            max_iterations: c.iterations,
            seed,
            stage0_iterations: c.stage0,
            stagnation_window: c.stagnation_window,
            contraction_lambda: c.contraction,
            min_radius: c.min_radius,
            j_stop: self.j_threshold,
        }
    }

    pub fn cg_config(&self) -> CGConfig {
        let c = &self.cg;
        CGConfig {
            max_iterations: c.max_iterations,
            fd_step: c.fd_step,
            grad_tolerance: c.grad_tolerance,
            line_search: LineSearchOptions {
                tolerance: c.line_search_tolerance,
                max_step: c.max_step,
                polish_step: c.polish_step,
            },
            restart_period: c.restart_period,
        }
    }

    pub fn ga_config(&self, seed: u64) -> GAConfig {
        let g = &self.ga;
        GAConfig {
            population: g.population,
            generations: g.generations,
            crossover_prob: g.crossover_prob,
            mutation_prob: g.mutation_prob,
            mutation_sigma_fraction: g.mutation_sigma_fraction,
            tournament_size: g.tournament_size,
            elitism: g.elitism,
            seed,
        }
    }
}
