//! Polak-Ribiere conjugate gradient refinement with finite-difference
//! gradients and a bracketing golden-section line search.
//!
//! Objectives are plain `FnMut(&[f64]) -> f64`. The `_with` variants accept
//! objectives that can halt the refinement early (budget spent, threshold
//! reached elsewhere), which is how the hybrid pipeline drives it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First trial step of the line search.
pub const INITIAL_STEP: f64 = 1e-4;

/// Halvings of the first trial step before giving up on a direction.
const MAX_SHRINKS: usize = 40;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Secant steps on the directional derivative after golden-section.
const POLISH_ITERATIONS: usize = 2;

/// Why an objective refused to produce a value.
#[derive(Debug)]
pub enum Halt {
    /// Stop cleanly and return the best point so far.
    Stop,
    Failed(Error),
}

impl From<Error> for Halt {
    fn from(e: Error) -> Self {
        Halt::Failed(e)
    }
}

type Probe<'a> = dyn FnMut(&[f64]) -> std::result::Result<f64, Halt> + 'a;

fn finite(value: f64, evaluation: usize) -> std::result::Result<f64, Halt> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Halt::Failed(Error::Evaluation { evaluation, value }))
    }
}

/// Counts calls and rejects non-finite values.
struct Counted<'a> {
    f: &'a mut Probe<'a>,
    calls: usize,
}

impl Counted<'_> {
    fn eval(&mut self, p: &[f64]) -> std::result::Result<f64, Halt> {
        self.calls += 1;
        let v = (self.f)(p)?;
        finite(v, self.calls)
    }
}

fn plain<F: FnMut(&[f64]) -> f64>(mut f: F) -> impl FnMut(&[f64]) -> std::result::Result<f64, Halt> {
    move |p| Ok(f(p))
}

fn unhalt<T>(r: std::result::Result<T, Halt>) -> Result<T> {
    match r {
        Ok(v) => Ok(v),
        Err(Halt::Failed(e)) => Err(e),
        Err(Halt::Stop) => unreachable!("plain objectives never halt"),
    }
}

/// Central differences `(f(p + h e_i) - f(p - h e_i)) / 2h`.
pub fn fd_gradient<F: FnMut(&[f64]) -> f64>(f: F, p: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut f = plain(f);
    let mut counted = Counted { f: &mut f, calls: 0 };
    unhalt(gradient_impl(&mut counted, p, h))
}

fn gradient_impl(f: &mut Counted<'_>, p: &[f64], h: f64) -> std::result::Result<Vec<f64>, Halt> {
    if !(h > 0.0) {
        return Err(Error::invalid_argument(format!("finite-difference step {h} must be > 0")).into());
    }
    let mut probe = p.to_vec();
    let mut g = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        probe[i] = p[i] + h;
        let up = f.eval(&probe)?;
        probe[i] = p[i] - h;
        let down = f.eval(&probe)?;
        probe[i] = p[i];
        g.push((up - down) / (2.0 * h));
    }
    Ok(g)
}

/// Box constraints applied to every point the refinement visits.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds(Vec<(f64, f64)>);

impl Bounds {
    pub fn new(ranges: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(&(lo, hi)) = ranges.iter().find(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::invalid_argument(format!("empty range [{lo}, {hi}]")));
        }
        Ok(Self(ranges))
    }

    pub fn unbounded(dim: usize) -> Self {
        Self(vec![(f64::NEG_INFINITY, f64::INFINITY); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(&self.0).all(|(x, &(lo, hi))| (lo..=hi).contains(x))
    }

    fn step(&self, p: &[f64], eta: f64, w: &[f64], out: &mut [f64]) {
        for (((o, &x), &d), &(lo, hi)) in out.iter_mut().zip(p).zip(w).zip(&self.0) {
            *o = (x + eta * d).clamp(lo, hi);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearchOptions {
    /// Golden-section stops when the bracket is narrower than this fraction
    /// of the step.
    pub tolerance: f64,
    pub max_step: f64,
    /// Parameter-space distance used to difference the directional
    /// derivative during the final polish; 0 disables the polish.
    pub polish_step: f64,
}

impl Default for LineSearchOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_step: 1e3, polish_step: 1e-5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMinimum {
    pub eta: f64,
    pub value: f64,
}

/// Step `eta` in `[0, max_step]` approximately minimizing `f(p + eta w)`.
/// Returns 0 when no tried step improves on `f(p)`.
pub fn line_search<F: FnMut(&[f64]) -> f64>(f: F, p: &[f64], w: &[f64], opts: &LineSearchOptions) -> Result<f64> {
    let mut f = plain(f);
    let mut counted = Counted { f: &mut f, calls: 0 };
    let bounds = Bounds::unbounded(p.len());
    unhalt(line_search_impl(&mut counted, p, w, &bounds, None, opts)).map(|(m, _)| m.eta)
}

fn line_search_impl(
    f: &mut Counted<'_>,
    p: &[f64],
    w: &[f64],
    bounds: &Bounds,
    f0: Option<f64>,
    opts: &LineSearchOptions,
) -> std::result::Result<(LineMinimum, f64), Halt> {
    let mut x = vec![0.0; p.len()];
    let mut phi = |eta: f64, f: &mut Counted<'_>| {
        bounds.step(p, eta, w, &mut x);
        f.eval(&x)
    };
    let phi0 = match f0 {
        Some(v) => v,
        None => phi(0.0, f)?,
    };
    let mut best = LineMinimum { eta: 0.0, value: phi0 };
    if w.iter().all(|&d| d == 0.0) {
        return Ok((best, phi0));
    }
    let max_step = opts.max_step.max(INITIAL_STEP);
    // Short directions get a proportionally longer first trial, so the probe
    // moves at least INITIAL_STEP in parameter space and its change in value
    // is not lost to rounding.
    let w_norm = norm(w);
    let first = (INITIAL_STEP / w_norm.min(1.0)).min(max_step);

    // Bracket a minimum: a < b < c with phi(b) < phi(a) and phi(b) <= phi(c).
    let (mut a, mut fa) = (0.0, phi0);
    let (mut b, mut fb) = (first, phi(first, f)?);
    let (c, fc);
    if fb >= phi0 {
        let mut shrunk = None;
        let (mut hi, mut fhi) = (b, fb);
        for _ in 0..MAX_SHRINKS {
            let t = 0.5 * hi;
            let ft = phi(t, f)?;
            if ft < phi0 {
                shrunk = Some((t, ft));
                break;
            }
            hi = t;
            fhi = ft;
        }
        let Some((t, ft)) = shrunk else { return Ok((best, phi0)) };
        (b, fb) = (t, ft);
        (c, fc) = (hi, fhi);
    } else {
        loop {
            if b >= max_step {
                return Ok((LineMinimum { eta: b, value: fb }, phi0));
            }
            let next = (2.0 * b).min(max_step);
            let fnext = phi(next, f)?;
            if fnext >= fb {
                (c, fc) = (next, fnext);
                break;
            }
            (a, fa) = (b, fb);
            (b, fb) = (next, fnext);
        }
    }
    best = LineMinimum { eta: b, value: fb };

    // Golden-section refinement of [a, c].
    let (mut lo, mut hi) = (a, c);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = phi(x1, f)?;
    let mut f2 = phi(x2, f)?;
    while hi - lo > opts.tolerance * (0.5 * (lo + hi)).abs().max(f64::MIN_POSITIVE) {
        if f1 <= f2 {
            hi = x2;
            (x2, f2) = (x1, f1);
            x1 = hi - INV_PHI * (hi - lo);
            f1 = phi(x1, f)?;
        } else {
            lo = x1;
            (x1, f1) = (x2, f2);
            x2 = lo + INV_PHI * (hi - lo);
            f2 = phi(x2, f)?;
        }
        if x1 == x2 {
            break;
        }
    }
    for (eta, v) in [(x1, f1), (x2, f2)] {
        if v < best.value {
            best = LineMinimum { eta, value: v };
        }
    }

    // Vertex of the parabola through the original bracket. It is exact for
    // quadratic objectives, where golden-section alone stalls at about
    // sqrt(machine epsilon) relative accuracy in the step.
    let num = (b - a).powi(2) * (fb - fc) - (b - c).powi(2) * (fb - fa);
    let den = (b - a) * (fb - fc) - (b - c) * (fb - fa);
    if den != 0.0 {
        let vertex = b - 0.5 * num / den;
        if vertex > a && vertex < c && vertex.is_finite() {
            let fv = phi(vertex, f)?;
            // Within rounding of the golden-section value, the vertex is
            // the more accurate step.
            if fv <= best.value + 4.0 * f64::EPSILON * best.value.abs() {
                best = LineMinimum { eta: vertex, value: fv };
            }
        }
    }

    // Polish towards d phi / d eta = 0 with a few secant steps on a central
    // difference of the directional derivative. Differences are taken over a
    // fixed distance in parameter space, so they stay well conditioned when
    // |w| is tiny and value comparisons have run out of precision.
    if opts.polish_step > 0.0 && w_norm > 0.0 && best.eta > 0.0 {
        let s = opts.polish_step / w_norm;
        let mut e0 = best.eta;
        let mut d0 = (phi(e0 + s, f)? - phi(e0 - s, f)?) / (2.0 * s);
        let mut e1 = if e0 + 100.0 * s < c { e0 + 100.0 * s } else { e0 - 100.0 * s };
        for _ in 0..POLISH_ITERATIONS {
            let d1 = (phi(e1 + s, f)? - phi(e1 - s, f)?) / (2.0 * s);
            if d1 == d0 {
                break;
            }
            let e2 = e1 - d1 * (e1 - e0) / (d1 - d0);
            if !(e2 > a && e2 < c) {
                break;
            }
            let f2 = phi(e2, f)?;
            if f2 <= best.value + 4.0 * f64::EPSILON * best.value.abs() {
                best = LineMinimum { eta: e2, value: f2 };
            }
            (e0, d0, e1) = (e1, d1, e2);
        }
    }

    if best.value < phi0 {
        Ok((best, phi0))
    } else {
        Ok((LineMinimum { eta: 0.0, value: phi0 }, phi0))
    }
}

/// Polak-Ribiere coefficient `(g.g - g.g_prev) / (g_prev.g_prev)`; 0 when
/// the previous gradient vanishes.
pub fn pr_coefficient(g: &[f64], g_prev: &[f64]) -> f64 {
    let denom = dot(g_prev, g_prev);
    if denom == 0.0 {
        return 0.0;
    }
    (dot(g, g) - dot(g, g_prev)) / denom
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CGConfig {
    pub max_iterations: usize,
    pub fd_step: f64,
    pub grad_tolerance: f64,
    pub line_search: LineSearchOptions,
    /// Reset to steepest descent every this many iterations; 0 means the
    /// problem dimension.
    pub restart_period: usize,
}

impl Default for CGConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            fd_step: 1e-5,
            grad_tolerance: 1e-8,
            line_search: LineSearchOptions::default(),
            restart_period: 0,
        }
    }
}

impl CGConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fd_step > 0.0) {
            return Err(Error::invalid_argument("fd_step must be > 0"));
        }
        if !(self.grad_tolerance > 0.0) {
            return Err(Error::invalid_argument("grad_tolerance must be > 0"));
        }
        let ls = &self.line_search;
        if !(ls.tolerance > 0.0 && ls.max_step > 0.0 && ls.polish_step >= 0.0) {
            return Err(Error::invalid_argument("line search tolerance and max_step must be > 0"));
        }
        Ok(())
    }
}

/// Search state carried between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct CGState {
    pub p_current: Vec<f64>,
    pub gradient: Vec<f64>,
    pub direction: Vec<f64>,
    pub delta: f64,
    pub iteration: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CgStop {
    GradientTolerance,
    MaxIterations,
    /// Steepest descent found no improving step.
    NoDescent,
    /// The objective halted the run.
    Halted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgReport {
    pub iterations: usize,
    pub evaluations: usize,
    /// Objective at the returned point, when it was evaluated.
    pub best_value: Option<f64>,
    pub gradient_norm: Option<f64>,
    /// Accepted step length per iteration.
    pub steps: Vec<f64>,
    /// `(evaluation, objective)` after every accepted step.
    pub history: Vec<(usize, f64)>,
    pub stop: CgStop,
}

/// Refines `p0` with Polak-Ribiere conjugate gradient.
pub fn cg_refine<F: FnMut(&[f64]) -> f64>(
    f: F,
    p0: &[f64],
    bounds: &Bounds,
    cfg: &CGConfig,
) -> Result<(Vec<f64>, CgReport)> {
    cg_refine_with(plain(f), p0, bounds, cfg)
}

/// [`cg_refine`] for objectives that may halt. A [`Halt::Stop`] ends the run
/// normally; [`Halt::Failed`] is returned as an error.
pub fn cg_refine_with<F>(mut f: F, p0: &[f64], bounds: &Bounds, cfg: &CGConfig) -> Result<(Vec<f64>, CgReport)>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, Halt>,
{
    cfg.validate()?;
    if bounds.dim() != p0.len() {
        return Err(Error::invalid_argument(format!(
            "bounds have dimension {}, start point {}",
            bounds.dim(),
            p0.len()
        )));
    }
    let mut counted = Counted { f: &mut f, calls: 0 };
    let mut run = CgRun {
        state: CGState {
            p_current: p0.iter().zip(&bounds.0).map(|(x, &(lo, hi))| x.clamp(lo, hi)).collect(),
            gradient: Vec::new(),
            direction: Vec::new(),
            delta: 0.0,
            iteration: 0,
        },
        value: None,
        steps: Vec::new(),
        history: Vec::new(),
    };
    let stop = match run.iterate(&mut counted, bounds, cfg) {
        Ok(stop) => stop,
        Err(Halt::Stop) => CgStop::Halted,
        Err(Halt::Failed(e)) => return Err(e),
    };
    let report = CgReport {
        iterations: run.state.iteration,
        evaluations: counted.calls,
        best_value: run.value,
        gradient_norm: (!run.state.gradient.is_empty()).then(|| norm(&run.state.gradient)),
        steps: run.steps,
        history: run.history,
        stop,
    };
    Ok((run.state.p_current, report))
}

struct CgRun {
    state: CGState,
    /// Objective at `state.p_current`, once known.
    value: Option<f64>,
    steps: Vec<f64>,
    history: Vec<(usize, f64)>,
}

impl CgRun {
    fn iterate(&mut self, f: &mut Counted<'_>, bounds: &Bounds, cfg: &CGConfig) -> std::result::Result<CgStop, Halt> {
        let n = self.state.p_current.len();
        let period = if cfg.restart_period == 0 { n.max(1) } else { cfg.restart_period };
        let mut since_restart = 0;
        let mut g_prev: Option<Vec<f64>> = None;
        self.state.gradient = gradient_impl(f, &self.state.p_current, cfg.fd_step)?;

        loop {
            let g = &self.state.gradient;
            if norm(g) <= cfg.grad_tolerance {
                return Ok(CgStop::GradientTolerance);
            }
            if self.state.iteration >= cfg.max_iterations {
                return Ok(CgStop::MaxIterations);
            }

            let mut delta = match &g_prev {
                Some(prev) if since_restart < period => pr_coefficient(g, prev),
                _ => 0.0,
            };
            // Restart on a negative coefficient as well as on schedule.
            if delta < 0.0 {
                delta = 0.0;
            }
            let mut steepest = delta == 0.0;
            let mut w: Vec<f64> = if steepest {
                g.iter().map(|x| -x).collect()
            } else {
                g.iter().zip(&self.state.direction).map(|(gi, wi)| -gi + delta * wi).collect()
            };

            let (mut min, phi0) = line_search_impl(f, &self.state.p_current, &w, bounds, self.value, &cfg.line_search)?;
            self.value = Some(phi0);
            if min.eta == 0.0 && !steepest {
                steepest = true;
                delta = 0.0;
                w = g.iter().map(|x| -x).collect();
                (min, _) = line_search_impl(f, &self.state.p_current, &w, bounds, self.value, &cfg.line_search)?;
            }
            if min.eta == 0.0 {
                return Ok(CgStop::NoDescent);
            }

            let mut next = vec![0.0; n];
            bounds.step(&self.state.p_current, min.eta, &w, &mut next);
            self.state.p_current = next;
            self.state.direction = w;
            self.state.delta = delta;
            self.state.iteration += 1;
            self.value = Some(min.value);
            self.steps.push(min.eta);
            self.history.push((f.calls, min.value));
            since_restart = if steepest { 1 } else { since_restart + 1 };

            let g_new = gradient_impl(f, &self.state.p_current, cfg.fd_step)?;
            g_prev = Some(std::mem::replace(&mut self.state.gradient, g_new));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn half_norm_sq(p: &[f64]) -> f64 {
        0.5 * dot(p, p)
    }

    #[test]
    fn fd_gradient_examples() {
        let g = fd_gradient(half_norm_sq, &[1.0, 2.0], 1e-5).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-6 && (g[1] - 2.0).abs() < 1e-6);

        let g = fd_gradient(|_| 3.0, &[0.4, -0.2, 9.0], 1e-5).unwrap();
        assert_eq!(g, vec![0.0; 3]);

        let sin_sum = |p: &[f64]| p.iter().map(|x| x.sin()).sum::<f64>();
        let g = fd_gradient(sin_sum, &[0.0, FRAC_PI_2], 1e-5).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-6 && g[1].abs() < 1e-6, "{g:?}");
    }

    #[test]
    fn fd_gradient_rejects_bad_input() {
        assert!(matches!(fd_gradient(half_norm_sq, &[1.0], 0.0), Err(Error::InvalidArgument(_))));
        let r = fd_gradient(|p| if p[0] > 1.0 { f64::NAN } else { 0.0 }, &[1.0], 1e-3);
        assert!(matches!(r, Err(Error::Evaluation { evaluation: 1, .. })));
    }

    #[test]
    fn line_search_examples() {
        let opts = LineSearchOptions::default();
        let eta = line_search(half_norm_sq, &[1.0, 0.0], &[-1.0, 0.0], &opts).unwrap();
        assert!((eta - 1.0).abs() < 1e-4, "eta = {eta}");

        // Uphill on a monotone function.
        let eta = line_search(|p| p[0], &[0.0], &[1.0], &opts).unwrap();
        assert_eq!(eta, 0.0);

        // phi(eta) = 2 (1 - eta)^2, minimized at eta = 1.
        let eta = line_search(|p| 2.0 * p[0] * p[0], &[1.0], &[-1.0], &opts).unwrap();
        assert!((eta - 1.0).abs() < 1e-4, "eta = {eta}");
    }

    #[test]
    fn line_search_finds_tiny_steps() {
        // Minimum at eta = 1e-6, below the initial trial step.
        let eta = line_search(|p| 1e6 * p[0] * p[0], &[1e-6], &[-1.0], &LineSearchOptions::default()).unwrap();
        assert!(eta > 0.0 && (eta - 1e-6).abs() < 1e-8, "eta = {eta}");
    }

    #[test]
    fn line_search_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = |p: &[f64]| (3.0 * p[0]).sin() + p[1].powi(2) + 0.1 * p[0].powi(4);
        for _ in 0..200 {
            let p = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let w = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let eta = line_search(f, &p, &w, &LineSearchOptions::default()).unwrap();
            let q = [p[0] + eta * w[0], p[1] + eta * w[1]];
            assert!(eta >= 0.0 && f(&q) <= f(&p));
        }
    }

    #[test]
    fn pr_examples() {
        assert_eq!(pr_coefficient(&[1.0, 1.0], &[1.0, 1.0]), 0.0);
        assert_eq!(pr_coefficient(&[0.0, 1.0], &[1.0, 0.0]), 1.0);
        assert_eq!(pr_coefficient(&[2.0, 0.0], &[1.0, 0.0]), 2.0);
        assert_eq!(pr_coefficient(&[2.0, 0.0], &[0.0, 0.0]), 0.0);
    }

    /// Random SPD matrix `M^T M + n I` and right-hand side.
    fn spd_problem(n: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = m.transpose() * &m + DMatrix::identity(n, n) * n as f64;
        let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        (a, b)
    }

    fn quadratic(a: &DMatrix<f64>, b: &DVector<f64>) -> impl Fn(&[f64]) -> f64 {
        let (a, b) = (a.clone(), b.clone());
        move |p| {
            let x = DVector::from_column_slice(p);
            0.5 * x.dot(&(&a * &x)) - b.dot(&x)
        }
    }

    #[test]
    fn cg_solves_spd_quadratics_in_n_plus_one_iterations() {
        for (n, seed) in [(2, 1), (5, 2), (10, 3)] {
            let (a, b) = spd_problem(n, seed);
            let oracle = a.clone().cholesky().unwrap().solve(&b);
            let (p, report) =
                cg_refine(quadratic(&a, &b), &vec![0.0; n], &Bounds::unbounded(n), &CGConfig::default()).unwrap();
            let x = DVector::from_column_slice(&p);
            let residual = (&a * &x - &b).norm();
            assert_eq!(report.stop, CgStop::GradientTolerance, "n = {n}: {report:?}");
            assert!(report.iterations <= n + 1, "n = {n}: {} iterations", report.iterations);
            assert!(residual <= 1e-8, "n = {n}: residual {residual}");
            assert!((x - oracle).amax() <= 1e-6);
        }
    }

    #[test]
    fn cg_stops_immediately_at_a_stationary_point() {
        let (p, report) = cg_refine(half_norm_sq, &[0.0, 0.0], &Bounds::unbounded(2), &CGConfig::default()).unwrap();
        assert_eq!(p, vec![0.0, 0.0]);
        assert_eq!(report.evaluations, 4);
        assert_eq!(report.iterations, 0);

        let (p, report) = cg_refine(|_| 1.0, &[0.3, 0.1], &Bounds::unbounded(2), &CGConfig::default()).unwrap();
        assert_eq!(p, vec![0.3, 0.1]);
        assert!(report.steps.is_empty());
        assert_eq!(report.stop, CgStop::GradientTolerance);
    }

    #[test]
    fn cg_respects_bounds_and_descends_monotonically() {
        let f = |p: &[f64]| (p[0] - 2.0).powi(2) + (p[1] + 0.5).powi(2) + (p[0] * p[1]).sin();
        let bounds = Bounds::new(vec![(-1.0, 1.0), (0.0, 1.0)]).unwrap();
        let (p, report) = cg_refine(f, &[0.0, 0.5], &bounds, &CGConfig::default()).unwrap();
        assert!(bounds.contains(&p));
        let values: Vec<f64> = report.history.iter().map(|h| h.1).collect();
        assert!(values.windows(2).all(|w| w[1] <= w[0]));
        assert!(f(&p) < f(&[0.0, 0.5]));
    }

    #[test]
    fn cg_halts_on_request() {
        let mut calls = 0;
        let f = |p: &[f64]| {
            calls += 1;
            if calls > 7 {
                Err(Halt::Stop)
            } else {
                Ok(half_norm_sq(p))
            }
        };
        let (_, report) = cg_refine_with(f, &[1.0, 1.0], &Bounds::unbounded(2), &CGConfig::default()).unwrap();
        assert_eq!(report.stop, CgStop::Halted);
        assert_eq!(report.evaluations, 8);
    }

    #[test]
    fn cg_propagates_evaluation_failures() {
        let f = |p: &[f64]| if p[0] < 0.5 { f64::INFINITY } else { p[0] * p[0] };
        let r = cg_refine(f, &[1.0], &Bounds::unbounded(1), &CGConfig::default());
        assert!(matches!(r, Err(Error::Evaluation { .. })));
    }
}
