//! Tuning of triangle cloud-model controllers for noisy discrete-time plants.
//!
//! The crate is organised around the closed loop it optimizes:
//!
//! - [`cloud`]: triangle membership clouds and two-input / one-output
//!   inference with singleton defuzzification.
//! - [`plant`]: linear difference-equation plants, closed-loop episodes and
//!   the two episode costs (time-weighted absolute error and summed squared
//!   error).
//! - [`chaos`]: parallel logistic-map search with contracting windows over
//!   the mixed integer / continuous controller parameters.
//! - [`gradient`]: finite-difference gradients and Polak-Ribiere conjugate
//!   gradient refinement of the continuous parameters.
//! - [`hybrid`]: the two-phase pipeline (chaos search, then refinement).
//! - [`baselines`]: single-scale chaos search, gradient-only search and a
//!   real-coded genetic algorithm for comparison runs.
//! - [`cli`]: the `cloudopt` command implementations.

pub mod baselines;
pub mod chaos;
pub mod cli;
pub mod cloud;
pub mod config;
pub mod error;
pub mod format;
pub mod gradcheck;
pub mod gradient;
pub mod hybrid;
pub mod objective;
pub mod plant;
pub mod report;

pub use error::{Error, Result};
pub use objective::{ControlProblem, CostScale, Objective, RefineCost};
pub use report::{EvalTracker, EvalsToThreshold, Method, OptimizerReport};
