//! Finite-difference gradients checked against analytic ones on a fixed set
//! of smooth functions.

use crate::error::Result;
use crate::gradient::fd_gradient;

pub const DEFAULT_FD_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// A test function, its analytic gradient and the point it is checked at.
pub struct SmoothFunction {
    pub name: &'static str,
    pub value: fn(&[f64]) -> f64,
    pub gradient: fn(&[f64]) -> Vec<f64>,
    pub point: &'static [f64],
}

fn quadratic(x: &[f64]) -> f64 {
    let diag: f64 = x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v * v).sum();
    let coupling: f64 = x.windows(2).map(|w| w[0] * w[1]).sum();
    diag + coupling
}

fn quadratic_grad(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let mut g = 2.0 * (i + 1) as f64 * x[i];
            if i > 0 {
                g += x[i - 1];
            }
            if i + 1 < n {
                g += x[i + 1];
            }
            g
        })
        .collect()
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum()
}

fn rosenbrock_grad(x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() - 1 {
        let r = x[i + 1] - x[i] * x[i];
        g[i] += -400.0 * x[i] * r - 2.0 * (1.0 - x[i]);
        g[i + 1] += 200.0 * r;
    }
    g
}

fn sine_chain(x: &[f64]) -> f64 {
    x.windows(2).map(|w| (w[0] + 0.5 * w[1]).sin()).sum()
}

fn sine_chain_grad(x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() - 1 {
        let c = (x[i] + 0.5 * x[i + 1]).cos();
        g[i] += c;
        g[i + 1] += 0.5 * c;
    }
    g
}

fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn log_sum_exp_grad(x: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(x);
    x.iter().map(|v| (v - lse).exp()).collect()
}

fn gaussian(x: &[f64]) -> f64 {
    (-0.5 * x.iter().enumerate().map(|(i, v)| v * v / (i + 1) as f64).sum::<f64>()).exp()
}

fn gaussian_grad(x: &[f64]) -> Vec<f64> {
    let g = gaussian(x);
    x.iter().enumerate().map(|(i, v)| -g * v / (i + 1) as f64).collect()
}

pub fn smooth_functions() -> [SmoothFunction; 5] {
    [
        SmoothFunction { name: "quadratic", value: quadratic, gradient: quadratic_grad, point: &[0.3, -0.7, 1.1, 0.5, -0.2] },
        SmoothFunction { name: "rosenbrock", value: rosenbrock, gradient: rosenbrock_grad, point: &[-1.2, 1.0, 0.8, 0.4] },
        SmoothFunction { name: "sine-chain", value: sine_chain, gradient: sine_chain_grad, point: &[0.4, 1.3, -0.9, 2.2, 0.1, -1.5] },
        SmoothFunction { name: "log-sum-exp", value: log_sum_exp, gradient: log_sum_exp_grad, point: &[0.5, -1.0, 2.0, 0.0] },
        SmoothFunction { name: "gaussian", value: gaussian, gradient: gaussian_grad, point: &[0.6, -0.4, 1.0] },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub fd_step: f64,
    pub tolerance: f64,
    /// Flip the sign of the first function's analytic gradient, to check
    /// that the suite can fail.
    pub inject_wrong_sign: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { fd_step: DEFAULT_FD_STEP, tolerance: DEFAULT_TOLERANCE, inject_wrong_sign: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckResult {
    pub name: &'static str,
    /// Largest component error divided by the largest analytic component.
    pub max_relative_error: f64,
    pub passed: bool,
}

pub fn relative_error(fd: &[f64], analytic: &[f64]) -> f64 {
    let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs())).max(f64::MIN_POSITIVE);
    fd.iter().zip(analytic).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}

pub fn run_gradcheck(opts: &GradCheckOptions) -> Result<Vec<GradCheckResult>> {
    smooth_functions()
        .iter()
        .enumerate()
        .map(|(i, sf)| {
            let fd = fd_gradient(sf.value, sf.point, opts.fd_step)?;
            let mut analytic = (sf.gradient)(sf.point);
            if opts.inject_wrong_sign && i == 0 {
                analytic.iter_mut().for_each(|g| *g = -*g);
            }
            let err = relative_error(&fd, &analytic);
            Ok(GradCheckResult { name: sf.name, max_relative_error: err, passed: err <= opts.tolerance })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        for r in run_gradcheck(&GradCheckOptions::default()).unwrap() {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn wrong_sign_fails() {
        let opts = GradCheckOptions { inject_wrong_sign: true, ..GradCheckOptions::default() };
        let r = run_gradcheck(&opts).unwrap();
        assert!(!r[0].passed);
        assert!((r[0].max_relative_error - 2.0).abs() < 1e-6);
        assert!(r[1..].iter().all(|r| r.passed));
    }

    #[test]
    fn coarse_steps_grow_the_error() {
        let fine = run_gradcheck(&GradCheckOptions::default()).unwrap();
        let coarse = run_gradcheck(&GradCheckOptions { fd_step: 0.1, ..GradCheckOptions::default() }).unwrap();
        // The quadratic is differenced exactly at any step.
        for (f, c) in fine.iter().zip(&coarse).skip(1) {
            assert!(c.max_relative_error > f.max_relative_error, "{}: {f:?} vs {c:?}", f.name);
        }
    }

    #[test]
    fn rejects_a_non_positive_step() {
        assert!(run_gradcheck(&GradCheckOptions { fd_step: 0.0, ..GradCheckOptions::default() }).is_err());
    }
}
