//! Triangle membership clouds and the two-input / one-output cloud controller.
//!
//! Antecedent clouds live on the normalized universe `[-1, 1]`. Each time a
//! cloud is asked for a membership degree it first draws a random width
//! `En'` from `|N(En, He^2)|`, then evaluates a triangle of half-support
//! `3 En'` centred on `Ex`. Consequents are singletons, so defuzzification is
//! the firing-weighted mean of the singleton positions.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound on a sampled cloud width.
pub const ENTROPY_FLOOR: f64 = 1e-6;

/// Largest number of clouds allowed on any input or on the output.
pub const MAX_CLOUDS: usize = 20;

/// Expected value, entropy and hyper-entropy of one membership cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudDescriptor {
    pub ex: f64,
    pub en: f64,
    pub he: f64,
}

impl CloudDescriptor {
    pub fn new(ex: f64, en: f64, he: f64) -> Result<Self> {
        let cloud = Self { ex, en, he };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.ex) {
            return Err(Error::invalid_parameters(format!("cloud ex {} outside [-1, 1]", self.ex)));
        }
        if !(0.0..=1.0).contains(&self.en) {
            return Err(Error::invalid_parameters(format!("cloud en {} outside [0, 1]", self.en)));
        }
        if !(0.0..=1.0).contains(&self.he) {
            return Err(Error::invalid_parameters(format!("cloud he {} outside [0, 1]", self.he)));
        }
        Ok(())
    }
}

/// Cloud counts per input and output, plus the ceiling on the output gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerStructure {
    pub m1: usize,
    pub m2: usize,
    pub o: usize,
    pub pu: f64,
}

impl ControllerStructure {
    pub fn new(m1: usize, m2: usize, o: usize, pu: f64) -> Result<Self> {
        let s = Self { m1, m2, o, pu };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("m1", self.m1), ("m2", self.m2), ("o", self.o)] {
            if !(1..=MAX_CLOUDS).contains(&n) {
                return Err(Error::invalid_parameters(format!(
                    "{name} = {n} outside [1, {MAX_CLOUDS}]"
                )));
            }
        }
        if !(self.pu > 0.0 && self.pu.is_finite()) {
            return Err(Error::invalid_parameters(format!("pu = {} must be positive", self.pu)));
        }
        Ok(())
    }

    pub fn rule_count(&self) -> usize {
        self.m1 * self.m2
    }

    /// Number of continuous parameters refined by gradient descent:
    /// three per antecedent cloud, one per singleton, plus the gain.
    pub fn continuous_len(&self) -> usize {
        3 * self.m1 + 3 * self.m2 + self.o + 1
    }
}

/// Consequent index for every antecedent pair, stored 1-based and row-major:
/// pair `(i, j)` (both 0-based) lives at `i * m2 + j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleTable {
    entries: Vec<usize>,
}

impl RuleTable {
    pub fn new(entries: Vec<usize>, structure: &ControllerStructure) -> Result<Self> {
        let table = Self { entries };
        table.validate(structure)?;
        Ok(table)
    }

    pub fn validate(&self, structure: &ControllerStructure) -> Result<()> {
        if self.entries.len() != structure.rule_count() {
            return Err(Error::invalid_parameters(format!(
                "rule table has {} entries, expected {}",
                self.entries.len(),
                structure.rule_count()
            )));
        }
        if let Some(bad) = self.entries.iter().find(|&&h| h < 1 || h > structure.o) {
            return Err(Error::invalid_parameters(format!(
                "rule entry {bad} outside [1, {}]",
                structure.o
            )));
        }
        Ok(())
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    /// 1-based output cloud index for antecedent pair `(i, j)`.
    pub fn get(&self, i: usize, j: usize, m2: usize) -> usize {
        self.entries[i * m2 + j]
    }
}

/// The complete decision vector of one cloud controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub structure: ControllerStructure,
    pub in1_clouds: Vec<CloudDescriptor>,
    pub in2_clouds: Vec<CloudDescriptor>,
    pub out_singletons: Vec<f64>,
    pub rules: RuleTable,
    pub ku: f64,
}

impl ParameterVector {
    pub fn validate(&self) -> Result<()> {
        let s = &self.structure;
        s.validate()?;
        if self.in1_clouds.len() != s.m1 || self.in2_clouds.len() != s.m2 {
            return Err(Error::invalid_parameters(format!(
                "cloud lists have lengths ({}, {}), structure says ({}, {})",
                self.in1_clouds.len(),
                self.in2_clouds.len(),
                s.m1,
                s.m2
            )));
        }
        if self.out_singletons.len() != s.o {
            return Err(Error::invalid_parameters(format!(
                "{} output singletons, structure says {}",
                self.out_singletons.len(),
                s.o
            )));
        }
        for c in self.in1_clouds.iter().chain(&self.in2_clouds) {
            c.validate()?;
        }
        if let Some(bad) = self.out_singletons.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::invalid_parameters(format!("singleton {bad} outside [-1, 1]")));
        }
        self.rules.validate(s)?;
        if !(0.0..=s.pu).contains(&self.ku) {
            return Err(Error::invalid_parameters(format!(
                "ku = {} outside [0, {}]",
                self.ku, s.pu
            )));
        }
        Ok(())
    }

    /// Flattens the continuous parameters: `(ex, en, he)` of every input-1
    /// cloud, the same for input 2, every singleton, then `ku`.
    pub fn continuous(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.structure.continuous_len());
        for c in self.in1_clouds.iter().chain(&self.in2_clouds) {
            v.extend_from_slice(&[c.ex, c.en, c.he]);
        }
        v.extend_from_slice(&self.out_singletons);
        v.push(self.ku);
        v
    }

    /// Admissible range of every component of [`continuous`](Self::continuous).
    pub fn continuous_bounds(&self) -> Vec<(f64, f64)> {
        let s = &self.structure;
        let mut b = Vec::with_capacity(s.continuous_len());
        for _ in 0..(s.m1 + s.m2) {
            b.extend_from_slice(&[(-1.0, 1.0), (0.0, 1.0), (0.0, 1.0)]);
        }
        b.extend(std::iter::repeat_n((-1.0, 1.0), s.o));
        b.push((0.0, s.pu));
        b
    }

    /// Copy of `self` with the continuous parameters replaced by `values`,
    /// each clamped into its admissible range. Structure and rules are kept.
    pub fn with_continuous(&self, values: &[f64]) -> Result<Self> {
        let s = self.structure;
        if values.len() != s.continuous_len() {
            return Err(Error::invalid_argument(format!(
                "expected {} continuous values, got {}",
                s.continuous_len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid_argument(format!("non-finite parameter {bad}")));
        }
        let bounds = self.continuous_bounds();
        let v: Vec<f64> = values
            .iter()
            .zip(&bounds)
            .map(|(x, &(lo, hi))| x.clamp(lo, hi))
            .collect();
        let cloud = |k: usize| CloudDescriptor { ex: v[3 * k], en: v[3 * k + 1], he: v[3 * k + 2] };
        let out_start = 3 * (s.m1 + s.m2);
        Ok(Self {
            structure: s,
            in1_clouds: (0..s.m1).map(cloud).collect(),
            in2_clouds: (s.m1..s.m1 + s.m2).map(cloud).collect(),
            out_singletons: v[out_start..out_start + s.o].to_vec(),
            rules: self.rules.clone(),
            ku: v[out_start + s.o],
        })
    }
}

/// Draws a width `En' = max(eps, |N(en, he^2)|)`.
///
/// One standard normal is consumed on every call, including `he = 0`, so the
/// stream position never depends on parameter values.
pub fn sample_entropy<R: Rng + ?Sized>(cloud: &CloudDescriptor, droplets: &mut R) -> f64 {
    let z: f64 = droplets.sample(StandardNormal);
    (cloud.en + cloud.he * z).abs().max(ENTROPY_FLOOR)
}

/// Triangle membership of `x` in a cloud of sampled width `en_prime`.
pub fn membership(x: f64, cloud: &CloudDescriptor, en_prime: f64) -> Result<f64> {
    if !(en_prime > 0.0) {
        return Err(Error::invalid_argument(format!("en' = {en_prime} must be positive")));
    }
    Ok(triangle(x, cloud.ex, en_prime))
}

#[inline]
fn triangle(x: f64, ex: f64, en_prime: f64) -> f64 {
    (1.0 - (x - ex).abs() / (3.0 * en_prime)).max(0.0)
}

/// Control action for error `e` and error change `de` (both clamped to
/// `[-1, 1]`).
///
/// Every antecedent cloud draws one width per call; rule `(i, j)` fires with
/// the product of the two memberships. Zero total firing yields `u = 0`.
pub fn infer<R: Rng + ?Sized>(params: &ParameterVector, e: f64, de: f64, droplets: &mut R) -> f64 {
    let s = &params.structure;
    let e = e.clamp(-1.0, 1.0);
    let de = de.clamp(-1.0, 1.0);

    let mut mu1 = [0.0; MAX_CLOUDS];
    let mut mu2 = [0.0; MAX_CLOUDS];
    for (mu, c) in mu1.iter_mut().zip(&params.in1_clouds) {
        *mu = triangle(e, c.ex, sample_entropy(c, droplets));
    }
    for (mu, c) in mu2.iter_mut().zip(&params.in2_clouds) {
        *mu = triangle(de, c.ex, sample_entropy(c, droplets));
    }

    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..s.m1 {
        for j in 0..s.m2 {
            let w = mu1[i] * mu2[j];
            let h = params.rules.get(i, j, s.m2);
            num += w * params.out_singletons[h - 1];
            den += w;
        }
    }
    if den > 0.0 {
        params.ku * (num / den)
    } else {
        0.0
    }
}
