//! Spectral regularization estimators (gradient flow, ridge, gradient descent,
//! principal component regression) for random-design linear regression, the
//! feature-space-decomposition rate `r(V_J*, V_J*^c)` that governs their
//! excess risk, and a seeded Monte Carlo harness that checks the rate against
//! simulated risk.
//!
//! Module map:
//! - [`spectra`]: covariance spectra and signal vectors
//! - [`filters`]: filter / residual functions and their sandwich constants
//! - [`fsd`]: estimation dimension, effective rank, rate terms, concentration statistic
//! - [`simulate`]: data generation, exact spectral fits, Monte Carlo replications
//! - [`experiments`]: saturation, partial-order, single-index and concentration studies
//! - [`config`] and [`commands`]: JSON configuration and subcommand dispatch

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod filters;
pub mod fsd;
pub mod linalg;
pub mod simulate;
pub mod spectra;

pub use error::{FsdError, Result};
pub use filters::{FilterKind, FilterSpec, TuningParameter};
pub use spectra::{RegressionProblem, SignalModel, SpectrumFamily, SpectrumModel};
