//! Illness-death model toolkit: cohort microsimulation, aggregated
//! current status (ACS) count tables under a Bernoulli visit schema, and
//! estimation of the age-specific incidence rate and mortality rate
//! ratio by least squares or maximum likelihood, with schema-preserving
//! parametric bootstrap confidence bands.
//!
//! The pipeline, end to end:
//!
//! 1. [`microsim`] simulates subjects through the three-state model
//!    (Non-diseased → Diseased → Dead, plus direct death) under the
//!    parametric rates of [`rates`].
//! 2. [`sampling`] applies a per-visit Bernoulli participation schema
//!    and aggregates the sampled states into per-visit count tables.
//! 3. [`estimate`] fits the parameter by matching the table against the
//!    solution of the model's differential equations ([`ode`]).
//! 4. [`bootstrap`] re-simulates population and schema at a fitted
//!    parameter to get empirical confidence bands that honor the
//!    dependence the schema induces across visits.
//!
//! The `idmacs` binary exposes the same pipeline as batch subcommands
//! over CSV files; see [`cli`].

pub mod bootstrap;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod microsim;
pub mod ode;
pub mod rates;
pub mod sampling;

pub use error::{Error, Result};
pub use estimate::{EstimationResult, FitOptions, ObjectiveKind};
pub use microsim::{HazardModel, RngStream, State, Trajectory};
pub use ode::{SolutionPath, StateFractions};
pub use rates::{RateModel, ThetaParams};
pub use sampling::{AcsTable, VisitPlan};
