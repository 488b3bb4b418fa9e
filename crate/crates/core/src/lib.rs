//! Finite-difference laboratory for boundary quenching in
//!
//! ```text
//! (phi(u))_t = (|u_x|^{r-2} u_x)_x,   0 < x < a,
//! u_x(0, t) = u(0, t)^{-p},   u_x(a, t) = (1 - u(a, t))^{-q},
//! ```
//!
//! The solution quenches when u reaches 0 at the left wall or 1 at the right
//! wall in finite time. The crate provides the initial-condition library and
//! validators ([`ic`]), the semidiscrete operator ([`discretize`]), the
//! adaptive semi-explicit Crank-Nicolson integrator ([`integrate`]) and the
//! rate, bound and convergence analysis ([`analysis`]).
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix `f64`, which is what every experiment should use.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod discretize;
pub mod error;
pub mod ic;
pub mod integrate;
pub mod problem;
mod scalar;

pub use analysis::{
    check_envelopes, default_fit_floor, estimate_order, fit_points, fit_quench_rate, lower_bound_t,
    mass_audit, theoretical_rate,
};
pub use discretize::{build_grid, flux_balance, mass, rhs_general, rhs_heat};
pub use error::{QuenchError, Result};
pub use ic::{example_a, example_b, validate};
pub use integrate::{adapt_tau, detect_quench, run, step, QuenchSide, Termination};
pub use problem::{StepMode, Wall};
pub use scalar::Scalar;

pub type PhiSpec = problem::PhiSpec<f64>;
pub type ProblemSpec = problem::ProblemSpec<f64>;
pub type ExperimentConfig = problem::ExperimentConfig<f64>;
pub type InitialCondition = ic::InitialCondition<f64>;
pub type ICValidationReport = ic::ICValidationReport<f64>;
pub type Grid = discretize::Grid<f64>;
pub type StateVector = discretize::StateVector<f64>;
pub type StepController = integrate::StepController<f64>;
pub type Sample = integrate::Sample<f64>;
pub type RunRecord = integrate::RunRecord<f64>;
pub type QuenchReport = integrate::QuenchReport<f64>;
pub type RateFit = analysis::RateFit<f64>;
pub type BoundsReport = analysis::BoundsReport<f64>;
pub type EnvelopeReport = analysis::EnvelopeReport<f64>;
pub type ConvergenceReport = analysis::ConvergenceReport<f64>;
pub type MassAudit = analysis::MassAudit<f64>;
