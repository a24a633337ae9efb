//! Linear difference-equation plants, closed-loop episodes and episode costs.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cloud::{infer, ParameterVector};
use crate::error::{Error, Result};
use crate::format::sig9;

/// Added to every episode cost when the plant output hit the clamp.
pub const DIVERGENCE_PENALTY: f64 = 1e6;

pub const DEFAULT_OUTPUT_CLAMP: f64 = 1e3;

/// `y(k) = sum a[i] y(k-1-i) + sum b[j] u(k-1-j) + noise_std * w(k)`, with
/// `w` standard Gaussian white noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantModel {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub noise_std: f64,
    pub output_clamp: f64,
}

impl PlantModel {
    pub fn new(a: Vec<f64>, b: Vec<f64>, noise_std: f64, output_clamp: f64) -> Result<Self> {
        let m = Self { a, b, noise_std, output_clamp };
        m.validate()?;
        Ok(m)
    }

    /// Third-order plant with unit-variance noise. Open-loop unstable.
    pub fn third_order() -> Self {
        Self {
            a: vec![3.737, -4.212, 1.492],
            b: vec![0.17, -0.238, 2.94],
            noise_std: 1.0,
            output_clamp: DEFAULT_OUTPUT_CLAMP,
        }
    }

    /// Stable second-order plant (poles at modulus 0.63, DC gain 2.5) used
    /// for desk-scale benchmarks.
    pub fn second_order_surrogate() -> Self {
        Self {
            a: vec![1.2, -0.4],
            b: vec![0.5],
            noise_std: 0.05,
            output_clamp: DEFAULT_OUTPUT_CLAMP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.is_empty() || self.b.is_empty() {
            return Err(Error::invalid_argument("plant needs at least one a and one b coefficient"));
        }
        if self.a.iter().chain(&self.b).any(|c| !c.is_finite()) {
            return Err(Error::invalid_argument("plant coefficients must be finite"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid_argument(format!("noise_std = {} must be >= 0", self.noise_std)));
        }
        if !(self.output_clamp > 0.0) {
            return Err(Error::invalid_argument(format!(
                "output_clamp = {} must be > 0",
                self.output_clamp
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantOutput {
    pub y: f64,
    /// The raw output exceeded `output_clamp` and was clipped.
    pub clamped: bool,
}

/// One plant update. Histories are newest-first; missing entries count as 0.
pub fn plant_step(model: &PlantModel, y_hist: &[f64], u_hist: &[f64], noise: f64) -> PlantOutput {
    let ar: f64 = model.a.iter().zip(y_hist).map(|(a, y)| a * y).sum();
    let x: f64 = model.b.iter().zip(u_hist).map(|(b, u)| b * u).sum();
    let raw = ar + x + noise;
    let bound = model.output_clamp;
    if raw.is_nan() || raw.abs() > bound {
        let y = if raw.is_nan() { bound } else { raw.clamp(-bound, bound) };
        PlantOutput { y, clamped: true }
    } else {
        PlantOutput { y: raw, clamped: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Reference {
    /// `r(k) = level` for every `k >= 1`.
    Step { level: f64 },
}

impl Reference {
    pub fn at(&self, _k: usize) -> f64 {
        match *self {
            Reference::Step { level } => level,
        }
    }
}

impl Default for Reference {
    fn default() -> Self {
        Reference::Step { level: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: usize,
    pub dt: f64,
    pub reference: Reference,
    pub noise_seed: u64,
    pub droplet_seed: u64,
    /// Fixed gain applied to `e` before it enters the controller.
    pub e_scale: f64,
    /// Fixed gain applied to `de` before it enters the controller.
    pub de_scale: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 200,
            dt: 0.1,
            reference: Reference::default(),
            noise_seed: 1,
            droplet_seed: 2,
            e_scale: 1.0,
            de_scale: 1.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid_argument("horizon must be >= 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid_argument(format!("dt = {} must be > 0", self.dt)));
        }
        if !(self.e_scale.is_finite() && self.de_scale.is_finite()) {
            return Err(Error::invalid_argument("input scales must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub r: f64,
    pub y: f64,
    pub u: f64,
    pub e: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub rows: Vec<TraceRow>,
    pub diverged: bool,
}

impl EpisodeTrace {
    pub fn errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|row| row.e)
    }

    /// Writes `k,r,y,u,e` rows with nine significant digits and LF endings.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(b"k,r,y,u,e\n")?;
        for row in &self.rows {
            writeln!(out, "{},{},{},{},{}", row.k, sig9(row.r), sig9(row.y), sig9(row.u), sig9(row.e))?;
        }
        Ok(())
    }
}

/// Simulates the closed loop for `cfg.horizon` steps.
///
/// At step `k` the plant output `y(k)` is produced from past outputs, past
/// controls and fresh noise; the controller then sees `e(k) = r(k) - y(k)`
/// and `de(k) = e(k) - e(k-1)` (with `e(0) = 0`) and emits `u(k)`, which
/// first acts on `y(k+1)`. Plant noise and cloud droplets come from two
/// independent streams seeded from `cfg`, so a trace is a pure function of
/// its arguments.
pub fn run_episode(params: &ParameterVector, model: &PlantModel, cfg: &SimConfig) -> EpisodeTrace {
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.noise_seed);
    let mut droplets = ChaCha8Rng::seed_from_u64(cfg.droplet_seed);

    let mut y_hist = vec![0.0; model.a.len()];
    let mut u_hist = vec![0.0; model.b.len()];
    let mut rows = Vec::with_capacity(cfg.horizon);
    let mut diverged = false;
    let mut e_prev = 0.0;

    for k in 1..=cfg.horizon {
        let w: f64 = StandardNormal.sample(&mut noise_rng);
        let out = plant_step(model, &y_hist, &u_hist, model.noise_std * w);
        diverged |= out.clamped;
        let y = out.y;

        let r = cfg.reference.at(k);
        let e = r - y;
        let de = e - e_prev;
        e_prev = e;
        let u = infer(params, cfg.e_scale * e, cfg.de_scale * de, &mut droplets);

        y_hist.rotate_right(1);
        y_hist[0] = y;
        u_hist.rotate_right(1);
        u_hist[0] = u;
        rows.push(TraceRow { k, r, y, u, e });
    }
    EpisodeTrace { rows, diverged }
}

/// Time-weighted absolute error `sum k^2 |e(k)| dt`, plus
/// [`DIVERGENCE_PENALTY`] for diverged traces.
pub fn cost_j1(trace: &EpisodeTrace, dt: f64) -> Result<f64> {
    if trace.rows.is_empty() {
        return Err(Error::invalid_argument("cost of an empty trace"));
    }
    let area: f64 = trace
        .rows
        .iter()
        .map(|row| {
            let k = row.k as f64;
            k * k * row.e.abs() * dt
        })
        .sum();
    Ok(if trace.diverged { area + DIVERGENCE_PENALTY } else { area })
}

/// Episode-summed squared error `sum e(k)^2 / 2`.
pub fn cost_j2_total(trace: &EpisodeTrace) -> Result<f64> {
    if trace.rows.is_empty() {
        return Err(Error::invalid_argument("cost of an empty trace"));
    }
    Ok(trace.errors().map(|e| 0.5 * e * e).sum())
}
