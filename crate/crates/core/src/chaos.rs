//! Parallel variable-scaling chaos search.
//!
//! One logistic-map trajectory drives each slot of a fixed-size pool that
//! covers the largest admissible controller (20 clouds per input and on the
//! output, 400 rules). Every iteration advances all trajectories, decodes
//! the pool into a [`ParameterVector`] and evaluates it. Continuous slots are
//! decoded through a window `(center, radius)`; once the search stagnates the
//! windows contract around the incumbent and the integer slots freeze, which
//! turns the global sweep into a progressively finer local one.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{CloudDescriptor, ControllerStructure, ParameterVector, RuleTable, MAX_CLOUDS};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::report::{EvalTracker, Method, OptimizerReport};

/// Orbit points the logistic map never leaves or that lead straight into
/// one of its fixed points.
pub const DEGENERATE: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

const M1_SLOT: usize = 0;
const M2_SLOT: usize = 1;
const O_SLOT: usize = 2;
const KU_SLOT: usize = 3;
const IN1_BASE: usize = 4;
const IN2_BASE: usize = IN1_BASE + 3 * MAX_CLOUDS;
const OUT_BASE: usize = IN2_BASE + 3 * MAX_CLOUDS;
const RULE_BASE: usize = OUT_BASE + MAX_CLOUDS;

/// Slots in a trajectory pool: the parameter count of the largest controller.
pub const POOL_SIZE: usize = RULE_BASE + MAX_CLOUDS * MAX_CLOUDS;

/// Number of parameters of a controller with the given structure.
pub fn gamma_count(structure: &ControllerStructure) -> usize {
    let (m1, m2, o) = (structure.m1, structure.m2, structure.o);
    3 * m1 + 3 * m2 + o + 4 + m1 * m2
}

/// `4 a (1 - a)`.
pub fn logistic_next(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid_argument(format!("logistic state {alpha} outside (0, 1)")));
    }
    Ok(4.0 * alpha * (1.0 - alpha))
}

fn is_admissible(alpha: f64) -> bool {
    alpha > 0.0 && alpha < 1.0 && !DEGENERATE.contains(&alpha)
}

fn fresh_state<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let a: f64 = rng.random();
        if is_admissible(a) {
            return a;
        }
    }
}

/// A single logistic trajectory that re-seeds itself if rounding drops it
/// onto a degenerate point.
#[derive(Debug, Clone)]
pub struct LogisticOrbit {
    state: f64,
    rng: ChaCha8Rng,
    reseeds: usize,
}

impl LogisticOrbit {
    pub fn new(start: f64, reseed_seed: u64) -> Result<Self> {
        if !is_admissible(start) {
            return Err(Error::invalid_argument(format!("inadmissible logistic seed {start}")));
        }
        Ok(Self { state: start, rng: ChaCha8Rng::seed_from_u64(reseed_seed), reseeds: 0 })
    }

    pub fn state(&self) -> f64 {
        self.state
    }

    pub fn reseeds(&self) -> usize {
        self.reseeds
    }

    pub fn advance(&mut self) -> f64 {
        let next = 4.0 * self.state * (1.0 - self.state);
        self.state = if is_admissible(next) {
            next
        } else {
            self.reseeds += 1;
            fresh_state(&mut self.rng)
        };
        self.state
    }
}

impl Iterator for LogisticOrbit {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.advance())
    }
}

/// One logistic state per pool slot.
#[derive(Debug, Clone)]
pub struct TrajectoryPool {
    alphas: Vec<f64>,
    rng: ChaCha8Rng,
    reseeds: usize,
}

impl TrajectoryPool {
    /// `size` distinct admissible starting states drawn from `seed`.
    pub fn new(size: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = HashSet::with_capacity(size);
        let mut alphas = Vec::with_capacity(size);
        while alphas.len() < size {
            let a = fresh_state(&mut rng);
            if seen.insert(a.to_bits()) {
                alphas.push(a);
            }
        }
        Self { alphas, rng, reseeds: 0 }
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn reseeds(&self) -> usize {
        self.reseeds
    }

    pub fn advance(&mut self) {
        for a in &mut self.alphas {
            let next = 4.0 * *a * (1.0 - *a);
            *a = if is_admissible(next) {
                next
            } else {
                self.reseeds += 1;
                fresh_state(&mut self.rng)
            };
        }
    }
}

/// What a pool slot encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotRole {
    M1,
    M2,
    O,
    Ku,
    /// `field`: 0 = ex, 1 = en, 2 = he.
    In1 { cloud: usize, field: usize },
    In2 { cloud: usize, field: usize },
    Singleton(usize),
    Rule(usize),
}

impl SlotRole {
    pub fn of(slot: usize) -> SlotRole {
        assert!(slot < POOL_SIZE, "slot {slot} out of range");
        match slot {
            M1_SLOT => SlotRole::M1,
            M2_SLOT => SlotRole::M2,
            O_SLOT => SlotRole::O,
            KU_SLOT => SlotRole::Ku,
            s if s < IN2_BASE => SlotRole::In1 { cloud: (s - IN1_BASE) / 3, field: (s - IN1_BASE) % 3 },
            s if s < OUT_BASE => SlotRole::In2 { cloud: (s - IN2_BASE) / 3, field: (s - IN2_BASE) % 3 },
            s if s < RULE_BASE => SlotRole::Singleton(s - OUT_BASE),
            s => SlotRole::Rule(s - RULE_BASE),
        }
    }

    pub fn is_continuous(self) -> bool {
        matches!(self, SlotRole::Ku | SlotRole::In1 { .. } | SlotRole::In2 { .. } | SlotRole::Singleton(_))
    }

    /// Global range and decode orientation of a continuous slot. Centres
    /// (`ex`, singletons) decode as `1 - 2a` over the full window, widths as
    /// `a`, the gain as `pu a`.
    fn range(self, pu: f64) -> (f64, f64, f64) {
        match self {
            SlotRole::In1 { field: 0, .. } | SlotRole::In2 { field: 0, .. } | SlotRole::Singleton(_) => {
                (-1.0, 1.0, -1.0)
            }
            SlotRole::In1 { .. } | SlotRole::In2 { .. } => (0.0, 1.0, 1.0),
            SlotRole::Ku => (0.0, pu, 1.0),
            _ => unreachable!("integer slot has no continuous range"),
        }
    }
}

/// Admissible structures and output gain ceiling for a search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub m1: (usize, usize),
    pub m2: (usize, usize),
    pub o: (usize, usize),
    pub pu: f64,
    /// Decode the gain as `round(pu a)` instead of `pu a`.
    pub ku_rounding: bool,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self { m1: (1, MAX_CLOUDS), m2: (1, MAX_CLOUDS), o: (1, MAX_CLOUDS), pu: 1.0, ku_rounding: false }
    }
}

impl SearchSpace {
    /// Structure fixed at `(m1, m2, o)`.
    pub fn fixed(m1: usize, m2: usize, o: usize, pu: f64) -> Self {
        Self { m1: (m1, m1), m2: (m2, m2), o: (o, o), pu, ku_rounding: false }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("m1", self.m1), ("m2", self.m2), ("o", self.o)] {
            if !(1 <= lo && lo <= hi && hi <= MAX_CLOUDS) {
                return Err(Error::invalid_argument(format!(
                    "{name} range ({lo}, {hi}) must satisfy 1 <= min <= max <= {MAX_CLOUDS}"
                )));
            }
        }
        if !(self.pu > 0.0 && self.pu.is_finite()) {
            return Err(Error::invalid_argument(format!("pu = {} must be > 0", self.pu)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub center: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct FrozenIntegers {
    m1: usize,
    m2: usize,
    o: usize,
    rules: Vec<usize>,
}

/// Per-slot decode windows plus, after the first contraction, the frozen
/// integer slots.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBounds {
    windows: Vec<Option<Window>>,
    frozen: Option<FrozenIntegers>,
    pu: f64,
}

impl SearchBounds {
    /// Windows spanning each slot's whole range.
    pub fn full(space: &SearchSpace) -> Self {
        let windows = (0..POOL_SIZE)
            .map(|slot| {
                let role = SlotRole::of(slot);
                role.is_continuous().then(|| {
                    let (lo, hi, _) = role.range(space.pu);
                    Window { center: 0.5 * (lo + hi), radius: 0.5 * (hi - lo) }
                })
            })
            .collect();
        Self { windows, frozen: None, pu: space.pu }
    }

    pub fn window(&self, slot: usize) -> Option<Window> {
        self.windows[slot]
    }

    pub fn integers_frozen(&self) -> bool {
        self.frozen.is_some()
    }

    pub fn max_radius(&self) -> f64 {
        self.windows.iter().flatten().map(|w| w.radius).fold(0.0, f64::max)
    }

    pub fn all_below(&self, min_radius: f64) -> bool {
        self.windows.iter().flatten().all(|w| w.radius < min_radius)
    }

    /// Moves every window's centre to the incumbent without changing radii.
    pub fn recenter(&mut self, incumbent: &[f64]) {
        assert_eq!(incumbent.len(), POOL_SIZE);
        for (slot, w) in self.windows.iter_mut().enumerate() {
            if let Some(w) = w {
                let (lo, hi, _) = SlotRole::of(slot).range(self.pu);
                w.center = incumbent[slot].clamp(lo, hi);
            }
        }
    }

    /// Recentres every window on the incumbent's decoded slot values,
    /// multiplies every radius by `lambda`, and freezes the integer slots at
    /// the incumbent if they are not frozen yet.
    pub fn contract(&mut self, incumbent: &[f64], lambda: f64) {
        assert_eq!(incumbent.len(), POOL_SIZE);
        for (slot, w) in self.windows.iter_mut().enumerate() {
            if let Some(w) = w {
                let (lo, hi, _) = SlotRole::of(slot).range(self.pu);
                w.center = incumbent[slot].clamp(lo, hi);
                w.radius *= lambda;
            }
        }
        if self.frozen.is_none() {
            let int = |slot: usize| incumbent[slot].round() as usize;
            self.frozen = Some(FrozenIntegers {
                m1: int(M1_SLOT),
                m2: int(M2_SLOT),
                o: int(O_SLOT),
                rules: (RULE_BASE..POOL_SIZE).map(int).collect(),
            });
        }
    }
}

fn decode_count(alpha: f64, (lo, hi): (usize, usize)) -> usize {
    ((hi as f64 * alpha).round() as usize).clamp(lo, hi)
}

/// Decodes every slot of the pool into its parameter value (integer slots
/// as exact small floats).
pub fn decode_slots(alphas: &[f64], bounds: &SearchBounds, space: &SearchSpace) -> Vec<f64> {
    assert_eq!(alphas.len(), POOL_SIZE, "pool must cover the maximal structure");
    let mut values = vec![0.0; POOL_SIZE];

    let (m1, m2, o) = match &bounds.frozen {
        Some(f) => (f.m1, f.m2, f.o),
        None => (
            decode_count(alphas[M1_SLOT], space.m1),
            decode_count(alphas[M2_SLOT], space.m2),
            decode_count(alphas[O_SLOT], space.o),
        ),
    };
    values[M1_SLOT] = m1 as f64;
    values[M2_SLOT] = m2 as f64;
    values[O_SLOT] = o as f64;

    for (slot, value) in values.iter_mut().enumerate().skip(KU_SLOT) {
        let role = SlotRole::of(slot);
        *value = match (role, bounds.windows[slot]) {
            (SlotRole::Rule(k), _) => match &bounds.frozen {
                Some(f) => f.rules[k] as f64,
                None => ((o as f64 * alphas[slot]).round() as usize).clamp(1, o) as f64,
            },
            (role, Some(w)) => {
                let (lo, hi, orient) = role.range(space.pu);
                let v = (w.center + orient * w.radius * (2.0 * alphas[slot] - 1.0)).clamp(lo, hi);
                if role == SlotRole::Ku && space.ku_rounding {
                    v.round().clamp(lo, hi)
                } else {
                    v
                }
            }
            (role, None) => unreachable!("slot {slot} ({role:?}) has no window"),
        };
    }
    values
}

/// Builds the controller encoded by decoded slot values, reading only the
/// prefix its structure needs.
pub fn build_params(values: &[f64], space: &SearchSpace) -> ParameterVector {
    let count = |slot: usize| values[slot].round() as usize;
    let structure = ControllerStructure { m1: count(M1_SLOT), m2: count(M2_SLOT), o: count(O_SLOT), pu: space.pu };
    let cloud = |base: usize, i: usize| CloudDescriptor {
        ex: values[base + 3 * i],
        en: values[base + 3 * i + 1],
        he: values[base + 3 * i + 2],
    };
    // Rule (i, j) of the active table reads slot i * m2 + j of the rule block.
    let rules = (0..structure.rule_count()).map(|k| count(RULE_BASE + k)).collect();
    ParameterVector {
        structure,
        in1_clouds: (0..structure.m1).map(|i| cloud(IN1_BASE, i)).collect(),
        in2_clouds: (0..structure.m2).map(|i| cloud(IN2_BASE, i)).collect(),
        out_singletons: values[OUT_BASE..OUT_BASE + structure.o].to_vec(),
        rules: RuleTable::new(rules, &structure).expect("decoded rules are in range"),
        ku: values[KU_SLOT],
    }
}

pub fn decode(alphas: &[f64], bounds: &SearchBounds, space: &SearchSpace) -> ParameterVector {
    build_params(&decode_slots(alphas, bounds, space), space)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosConfig {
    /// Objective evaluations this search may spend.
    pub max_iterations: usize,
    pub seed: u64,
    /// Evaluations before the first contraction.
    pub stage0_iterations: usize,
    /// Evaluations without improvement that trigger a further contraction.
    pub stagnation_window: usize,
    pub contraction_lambda: f64,
    pub min_radius: f64,
    pub j_stop: f64,
}

impl Default for ChaosConfig {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            seed: 0,
            stage0_iterations: 500,
            stagnation_window: 100,
            contraction_lambda: 0.5,
            min_radius: 1e-3,
            j_stop: 1e-3,
        }
    }
}

impl ChaosConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid_argument("chaos max_iterations must be >= 1"));
        }
        if !(self.contraction_lambda > 0.0 && self.contraction_lambda < 1.0) {
            return Err(Error::invalid_argument(format!(
                "contraction lambda {} outside (0, 1)",
                self.contraction_lambda
            )));
        }
        if !(self.min_radius > 0.0) {
            return Err(Error::invalid_argument("min_radius must be > 0"));
        }
        if self.stagnation_window == 0 {
            return Err(Error::invalid_argument("stagnation window must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChaosStop {
    Threshold,
    IterationLimit,
    EvaluationBudget,
    RadiusFloor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contraction {
    /// Evaluation (counted within this search) after which it happened.
    pub after_evaluation: usize,
    pub radius_before: f64,
    pub radius_after: f64,
}

#[derive(Debug, Clone)]
pub struct ChaosOutcome {
    pub best: ParameterVector,
    pub best_cost: f64,
    pub evaluations: usize,
    pub contractions: Vec<Contraction>,
    pub stop: ChaosStop,
}

/// Variable-scaling chaos search with its own evaluation budget and
/// threshold taken from `cfg`.
pub fn chaos_search<O: Objective + ?Sized>(
    objective: &mut O,
    space: &SearchSpace,
    cfg: &ChaosConfig,
) -> Result<(ParameterVector, OptimizerReport)> {
    let mut tracker = EvalTracker::new(cfg.max_iterations, cfg.j_stop);
    let outcome = run_chaos(objective, space, cfg, true, &mut tracker)?;
    Ok((outcome.best, tracker.into_report(Method::Chaos, cfg.seed)))
}

/// Core loop shared by the scaled search, the single-scale baseline and the
/// first phase of the hybrid. Evaluations go through `tracker`, whose budget
/// and threshold also stop the loop.
pub fn run_chaos<O: Objective + ?Sized>(
    objective: &mut O,
    space: &SearchSpace,
    cfg: &ChaosConfig,
    scaling: bool,
    tracker: &mut EvalTracker,
) -> Result<ChaosOutcome> {
    space.validate()?;
    cfg.validate()?;

    let mut pool = TrajectoryPool::new(POOL_SIZE, cfg.seed);
    let mut bounds = SearchBounds::full(space);
    let mut best: Option<(f64, Vec<f64>, ParameterVector)> = None;
    let mut contractions = Vec::new();
    let mut evaluations = 0;
    let mut last_event = 0;

    let stop = loop {
        if tracker.reached() {
            break ChaosStop::Threshold;
        }
        if evaluations >= cfg.max_iterations {
            break ChaosStop::IterationLimit;
        }
        if tracker.exhausted() {
            break ChaosStop::EvaluationBudget;
        }
        if scaling && bounds.all_below(cfg.min_radius) {
            break ChaosStop::RadiusFloor;
        }

        pool.advance();
        let slots = decode_slots(pool.alphas(), &bounds, space);
        let params = build_params(&slots, space);
        let cost = objective.cost(&params);
        evaluations += 1;
        tracker.record(cost, Some(&params))?;

        if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
            // Once scaling has started the windows follow the incumbent, so
            // the search keeps moving between contractions.
            if scaling && !contractions.is_empty() {
                bounds.recenter(&slots);
            }
            best = Some((cost, slots, params));
            last_event = evaluations;
        }

        if scaling {
            let due = if contractions.is_empty() {
                evaluations >= cfg.stage0_iterations
            } else {
                evaluations - last_event >= cfg.stagnation_window
            };
            if due {
                let (_, incumbent, _) = best.as_ref().expect("at least one evaluation");
                let radius_before = bounds.max_radius();
                bounds.contract(incumbent, cfg.contraction_lambda);
                contractions.push(Contraction {
                    after_evaluation: evaluations,
                    radius_before,
                    radius_after: bounds.max_radius(),
                });
                last_event = evaluations;
            }
        }
    };

    let (best_cost, _, best) = best.ok_or_else(|| Error::invalid_argument("chaos search had no evaluation budget"))?;
    Ok(ChaosOutcome { best, best_cost, evaluations, contractions, stop })
}
