//! Time-dependent quantum Rabi and Jaynes–Cummings Hamiltonians and the
//! driving schedule.
//!
//! All energies are expressed in units of the field frequency and all times in
//! its inverse, so the Hamiltonians built here are dimensionless:
//! `H(λ) = a†a + (Γ/2)σ_z + λ·η·σ_x(a† + a)` with `Γ` the qubit/field
//! frequency ratio and `η` the normalized coupling.

use crate::error::{RabiError, Result};
use crate::hilbert::{
    annihilation, default_cutoff, embed, field_identity, number_operator, pauli_x, pauli_z,
    qubit_identity, sigma_minus, sigma_plus, FockSpace, OperatorMatrix,
};
use crate::linalg::{cr, CMat};
use std::f64::consts::PI;

/// Dimensionless model parameters.
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    /// Frequency ratio (qubit splitting over field frequency). Must be ≥ 0;
    /// dynamics entry points additionally require it strictly positive.
    pub gamma: f64,
    /// Normalized light–matter coupling, ≥ 0.
    pub eta: f64,
    /// Protocol duration in inverse field-frequency units, > 0.
    pub tau: f64,
    /// Truncated field space.
    pub space: FockSpace,
}

impl ModelParams {
    /// Validate and build. `cutoff = None` selects [`default_cutoff`] for `eta`.
    pub fn new(gamma: f64, eta: f64, tau: f64, cutoff: Option<usize>) -> Result<Self> {
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(RabiError::Config(format!(
                "frequency ratio must be finite and >= 0, got {gamma}"
            )));
        }
        if !eta.is_finite() || eta < 0.0 {
            return Err(RabiError::Config(format!(
                "coupling must be finite and >= 0, got {eta}"
            )));
        }
        if !tau.is_finite() || tau <= 0.0 {
            return Err(RabiError::Config(format!(
                "duration must be finite and > 0, got {tau}"
            )));
        }
        let n = cutoff.unwrap_or_else(|| default_cutoff(eta));
        Ok(ModelParams {
            gamma,
            eta,
            tau,
            space: FockSpace::new(n)?,
        })
    }

    /// The ramp schedule over this parameter set's duration.
    pub fn schedule(&self) -> Schedule {
        Schedule::new(self.tau)
    }
}

/// Smooth ramp `λ(t) = sin²((π/2)·sin²(πt/(2τ)))` with
/// `λ(0) = 0`, `λ(τ) = 1`, and vanishing endpoint velocity, so any velocity-
/// proportional correction term switches off exactly at both ends.
#[derive(Debug, Clone, Copy)]
pub struct Schedule {
    tau: f64,
}

impl Schedule {
    /// Ramp over `[0, tau]`.
    pub fn new(tau: f64) -> Self {
        Schedule { tau }
    }

    /// Protocol duration.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn check_time(&self, t: f64) -> Result<()> {
        // Tolerate rounding at the endpoints from grid construction.
        let slack = 1e-9 * self.tau.max(1.0);
        if !(t >= -slack && t <= self.tau + slack) {
            return Err(RabiError::Domain(format!(
                "time {t} outside protocol window [0, {}]",
                self.tau
            )));
        }
        Ok(())
    }

    /// Ramp value `λ(t) ∈ [0, 1]`.
    pub fn lambda(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let t = t.clamp(0.0, self.tau);
        let inner = (PI * t / (2.0 * self.tau)).sin().powi(2);
        Ok(((PI / 2.0) * inner).sin().powi(2))
    }

    /// Analytic ramp velocity `dλ/dt = (π²/(4τ))·sin(2u)·sin(2v)` with
    /// `v = πt/(2τ)` and `u = (π/2)sin²(v)`; computed in closed form so the
    /// endpoints are exactly zero instead of numerically noisy.
    pub fn lambda_dot(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let t = t.clamp(0.0, self.tau);
        let v = PI * t / (2.0 * self.tau);
        let u = (PI / 2.0) * v.sin().powi(2);
        Ok((PI * PI / (4.0 * self.tau)) * (2.0 * u).sin() * (2.0 * v).sin())
    }
}

/// Rabi Hamiltonian at fixed ramp value `lam ∈ [0, 1]`:
/// `a†a + (Γ/2)σ_z + lam·η·σ_x(a† + a)`.
pub fn rabi_hamiltonian(params: &ModelParams, lam: f64) -> Result<OperatorMatrix> {
    if !(0.0..=1.0).contains(&lam) {
        return Err(RabiError::Domain(format!(
            "ramp value must lie in [0, 1], got {lam}"
        )));
    }
    let sp = params.space;
    let a = annihilation(sp);
    let x = a.entries().adjoint() + a.entries();
    let h = embed(&qubit_identity(), &number_operator(sp))?
        .into_entries()
        + embed(&pauli_z(), &field_identity(sp))?.into_entries() * cr(params.gamma / 2.0)
        + embed(&pauli_x(), &x)?.into_entries() * cr(lam * params.eta);
    OperatorMatrix::hermitian_checked(h)
}

/// Derivative of the Rabi Hamiltonian with respect to the ramp value:
/// `η·σ_x(a† + a)` (independent of the ramp value itself).
pub fn rabi_hamiltonian_ramp_derivative(params: &ModelParams) -> Result<OperatorMatrix> {
    let sp = params.space;
    let a = annihilation(sp);
    let x = a.entries().adjoint() + a.entries();
    let dh = embed(&pauli_x(), &x)?.into_entries() * cr(params.eta);
    OperatorMatrix::hermitian_checked(dh)
}

/// Jaynes–Cummings Hamiltonian `a†a + (Γ/2)σ_z + η(σ₊a + σ₋a†)`, which keeps
/// only the excitation-conserving half of the full coupling.
pub fn jc_hamiltonian(params: &ModelParams) -> Result<OperatorMatrix> {
    let sp = params.space;
    let a = annihilation(sp);
    let h = embed(&qubit_identity(), &number_operator(sp))?
        .into_entries()
        + embed(&pauli_z(), &field_identity(sp))?.into_entries() * cr(params.gamma / 2.0)
        + (embed(&sigma_plus(), a.entries())?.into_entries()
            + embed(&sigma_minus(), &a.entries().adjoint())?.into_entries())
            * cr(params.eta);
    OperatorMatrix::hermitian_checked(h)
}

/// Excitation-number operator `σ_z/2 + a†a` conserved by [`jc_hamiltonian`].
pub fn excitation_number(space: FockSpace) -> Result<CMat> {
    Ok(
        embed(&pauli_z(), &field_identity(space))?.into_entries() * cr(0.5)
            + embed(&qubit_identity(), &number_operator(space))?.into_entries(),
    )
}
