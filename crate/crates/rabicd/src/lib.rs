//! Variational counterdiabatic driving for the quantum Rabi model.
//!
//! The crate builds truncated-oscillator matrix representations of the Rabi
//! Hamiltonian on a smooth ramp, a two-operator gauge-potential ansatz with
//! closed-form and numerically minimized coefficients, a family of weighted
//! action metrics that regularize the full-trace minimization, Schrödinger
//! dynamics to score protocols by final-state fidelity, a Floquet-engineered
//! realization of the correction term, and analysis/CLI layers that emit the
//! CSV panels behind the study's figures.
//!
//! Entry points:
//! - [`model::ModelParams`] and [`model::rabi_hamiltonian`] — problem setup;
//! - [`agp::agp_basis`], [`agp::analytic_x1`] — gauge-potential ansatz;
//! - [`metrics::evaluate_metric`] — weighted action values;
//! - [`dynamics::protocol_fidelity`] — score a protocol end to end;
//! - [`optimize::coefficient_trajectory`] — per-slice variational minima;
//! - [`floquet::stroboscopic_compare`] — drive-engineered correction;
//! - [`analysis::sweep`] and the `rabicd` binary — figure-level outputs.

// Validation guards use `!(x > 0.0)` style comparisons on purpose: the
// negation also rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agp;
pub mod analysis;
pub mod book;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod floquet;
pub mod hilbert;
pub(crate) mod linalg;
pub mod metrics;
pub mod model;
pub mod optimize;
pub mod output;

pub use error::{RabiError, Result};
