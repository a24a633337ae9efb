//! Comparison methods: chaos search without window scaling, conjugate
//! gradient from a random start, and a real-coded genetic algorithm.
//!
//! Every method counts evaluations through an [`EvalTracker`] built from the
//! same [`StopRule`], so evaluations-to-threshold compare directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chaos::{decode, run_chaos, ChaosConfig, SearchBounds, SearchSpace, POOL_SIZE};
use crate::cloud::{ControllerStructure, ParameterVector, RuleTable};
use crate::error::{Error, Result};
use crate::gradient::CGConfig;
use crate::hybrid::refine_continuous;
use crate::objective::Objective;
use crate::report::{Method, OptimizerReport, StopRule};

/// Chaos search with global windows throughout and no refinement phase.
pub fn single_chaos<O: Objective + ?Sized>(
    objective: &mut O,
    space: &SearchSpace,
    cfg: &ChaosConfig,
    stop: StopRule,
) -> Result<OptimizerReport> {
    stop.validate()?;
    let mut tracker = stop.tracker();
    run_chaos(objective, space, cfg, false, &mut tracker)?;
    Ok(tracker.into_report(Method::SingleChaos, cfg.seed))
}

/// Uniformly random controller: structure and rules drawn from `space`,
/// continuous values uniform over their ranges.
pub fn random_params<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> Result<ParameterVector> {
    space.validate()?;
    let m1 = rng.random_range(space.m1.0..=space.m1.1);
    let m2 = rng.random_range(space.m2.0..=space.m2.1);
    let o = rng.random_range(space.o.0..=space.o.1);
    let structure = ControllerStructure::new(m1, m2, o, space.pu)?;
    let rules = RuleTable::new((0..m1 * m2).map(|_| rng.random_range(1..=o)).collect(), &structure)?;
    let template = ParameterVector {
        structure,
        in1_clouds: Vec::new(),
        in2_clouds: Vec::new(),
        out_singletons: Vec::new(),
        rules,
        ku: 0.0,
    };
    let values: Vec<f64> = (0..structure.continuous_len()).map(|_| rng.random::<f64>()).collect();
    let scaled: Vec<f64> = template
        .continuous_bounds()
        .iter()
        .zip(values)
        .map(|(&(lo, hi), a)| lo + (hi - lo) * a)
        .collect();
    template.with_continuous(&scaled)
}

/// Conjugate-gradient refinement from a random start (seeded). A run that
/// converges above the threshold ends there and reports budget-exhausted.
pub fn cg_only<O: Objective + ?Sized>(
    objective: &mut O,
    space: &SearchSpace,
    cfg: &CGConfig,
    stop: StopRule,
    seed: u64,
) -> Result<OptimizerReport> {
    stop.validate()?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = random_params(space, &mut rng)?;
    let mut tracker = stop.tracker();
    refine_continuous(objective, &start, cfg, &mut tracker)?;
    Ok(tracker.into_report(Method::CgOnly, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GAConfig {
    pub population: usize,
    /// Offspring generations after the initial population.
    pub generations: usize,
    pub crossover_prob: f64,
    /// Per-gene mutation probability.
    pub mutation_prob: f64,
    /// Mutation standard deviation as a fraction of the gene range (1).
    pub mutation_sigma_fraction: f64,
    pub tournament_size: usize,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for GAConfig {
    fn default() -> Self {
        Self {
            population: 40,
            generations: 10_000,
            crossover_prob: 0.9,
            mutation_prob: 0.1,
            mutation_sigma_fraction: 0.1,
            tournament_size: 2,
            elitism: 1,
            seed: 0,
        }
    }
}

impl GAConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::invalid_argument("GA population must be >= 2"));
        }
        if self.tournament_size < 2 {
            return Err(Error::invalid_argument("tournament size must be >= 2"));
        }
        if self.elitism >= self.population {
            return Err(Error::invalid_argument("elitism must be smaller than the population"));
        }
        for (name, p) in [("crossover_prob", self.crossover_prob), ("mutation_prob", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid_argument(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if !(self.mutation_sigma_fraction > 0.0) {
            return Err(Error::invalid_argument("mutation_sigma_fraction must be > 0"));
        }
        Ok(())
    }
}

/// Genes live strictly inside (0, 1), like trajectory states.
const GENE_MARGIN: f64 = f64::EPSILON;

type Genome = Vec<f64>;

/// Real-coded GA over the trajectory-state genome, decoded with full-range
/// windows. The initial population is uniform random.
pub fn ga_optimize<O: Objective + ?Sized>(
    objective: &mut O,
    space: &SearchSpace,
    cfg: &GAConfig,
    stop: StopRule,
) -> Result<OptimizerReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let population = (0..cfg.population)
        .map(|_| (0..POOL_SIZE).map(|_| clamp_gene(rng.random())).collect())
        .collect();
    evolve(objective, space, cfg, stop, population, rng)
}

/// [`ga_optimize`] from a given initial population.
pub fn ga_optimize_with_population<O: Objective + ?Sized>(
    objective: &mut O,
    space: &SearchSpace,
    cfg: &GAConfig,
    stop: StopRule,
    population: Vec<Genome>,
) -> Result<OptimizerReport> {
    cfg.validate()?;
    if population.len() != cfg.population {
        return Err(Error::invalid_argument(format!(
            "population has {} genomes, config says {}",
            population.len(),
            cfg.population
        )));
    }
    if population.iter().any(|g| g.len() != POOL_SIZE) {
        return Err(Error::invalid_argument(format!("genomes must have {POOL_SIZE} genes")));
    }
    let population = population.into_iter().map(|g| g.into_iter().map(clamp_gene).collect()).collect();
    evolve(objective, space, cfg, stop, population, ChaCha8Rng::seed_from_u64(cfg.seed))
}

fn clamp_gene(a: f64) -> f64 {
    a.clamp(GENE_MARGIN, 1.0 - GENE_MARGIN)
}

fn evolve<O: Objective + ?Sized>(
    objective: &mut O,
    space: &SearchSpace,
    cfg: &GAConfig,
    stop: StopRule,
    population: Vec<Genome>,
    mut rng: ChaCha8Rng,
) -> Result<OptimizerReport> {
    stop.validate()?;
    space.validate()?;
    let bounds = SearchBounds::full(space);
    let mut tracker = stop.tracker();
    let mut pop: Vec<(Genome, Option<f64>)> = population.into_iter().map(|g| (g, None)).collect();

    for generation in 0..=cfg.generations {
        if generation > 0 {
            pop = next_generation(&pop, cfg, &mut rng);
        }
        for (genome, cost) in pop.iter_mut().filter(|(_, c)| c.is_none()) {
            if tracker.done() {
                break;
            }
            let params = decode(genome, &bounds, space);
            let c = objective.cost(&params);
            tracker.record(c, Some(&params))?;
            *cost = Some(c);
        }
        if tracker.done() {
            break;
        }
    }
    Ok(tracker.into_report(Method::Ga, cfg.seed))
}

fn next_generation(pop: &[(Genome, Option<f64>)], cfg: &GAConfig, rng: &mut ChaCha8Rng) -> Vec<(Genome, Option<f64>)> {
    let cost = |i: usize| pop[i].1.expect("evaluated");
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&a, &b| cost(a).total_cmp(&cost(b)));

    let mut next: Vec<(Genome, Option<f64>)> = order[..cfg.elitism].iter().map(|&i| pop[i].clone()).collect();
    let tournament = |rng: &mut ChaCha8Rng| {
        let mut winner = rng.random_range(0..pop.len());
        for _ in 1..cfg.tournament_size {
            let rival = rng.random_range(0..pop.len());
            if cost(rival) < cost(winner) {
                winner = rival;
            }
        }
        winner
    };
    while next.len() < cfg.population {
        let p1 = &pop[tournament(rng)].0;
        let p2 = &pop[tournament(rng)].0;
        let mut child = if rng.random::<f64>() < cfg.crossover_prob {
            let a: f64 = rng.random();
            p1.iter().zip(p2).map(|(x, y)| x + a * (y - x)).collect()
        } else {
            p1.clone()
        };
        for gene in &mut child {
            if rng.random::<f64>() < cfg.mutation_prob {
                let z: f64 = rng.sample(StandardNormal);
                *gene = clamp_gene(*gene + cfg.mutation_sigma_fraction * z);
            }
        }
        next.push((child, None));
    }
    next
}
