// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid trap parameters: {0}")]
    InvalidTrap(String),

    #[error("equilibrium solve did not converge (residual {residual:.3e} after {iterations} iterations)")]
    EquilibriumNotConverged { residual: f64, iterations: usize },

    #[error("zigzag instability: transverse curvature {curvature:.6e} rad^2/s^2 is not positive for mode {mode}")]
    ZigzagInstability { mode: usize, curvature: f64 },

    #[error("beat note is resonant with mode {mode} (detuning {detuning:.3e} rad/s)")]
    Resonance { mode: usize, detuning: f64 },

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("protocol construction failed self-check: {0}")]
    ProtocolSelfCheck(String),

    #[error("couplings must be real for the Ising form (entry ({0},{1}) has imaginary part)")]
    ComplexIsingCoupling(usize, usize),

    #[error("coupling matrix is not Hermitian (deviation {0:.3e})")]
    NonHermitian(f64),

    #[error("operator does not conserve excitation number (off-block norm {0:.3e})")]
    ExcitationNotConserved(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quasi-energy folding ambiguity: eigenphase {phase:.9} within {margin:.1e} of ±π")]
    QuasiEnergyFolding { phase: f64, margin: f64 },

    #[error("hilbert space dimension {dim} exceeds cap {cap}; try n_max = {suggested_n_max}")]
    DimensionCap { dim: usize, cap: usize, suggested_n_max: usize },

    #[error("krylov propagation failed: {0}")]
    Krylov(String),

    #[error("stiffness: step fell below minimum {min_step:.3e} s")]
    Stiffness { min_step: f64 },

    #[error("norm drift {drift:.3e} exceeds {limit:.1e} at t = {t:.6e} s")]
    NormDrift { drift: f64, limit: f64, t: f64 },

    #[error("invalid evolution plan: {0}")]
    InvalidPlan(String),

    #[error("trajectory grids do not match: {0}")]
    GridMismatch(String),

    #[error("inconsistent two-level state: arccos argument {0:.12}")]
    InconsistentState(f64),

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the failure originates in the physics (instability, folding,
    /// stiffness) rather than in configuration or I/O.
    pub fn is_physics(&self) -> bool {
        matches!(
            self,
            Error::EquilibriumNotConverged { .. }
                | Error::ZigzagInstability { .. }
                | Error::Resonance { .. }
                | Error::QuasiEnergyFolding { .. }
                | Error::Krylov(_)
                | Error::Stiffness { .. }
                | Error::NormDrift { .. }
                | Error::ProtocolSelfCheck(_)
                | Error::ExcitationNotConserved(_)
                | Error::InconsistentState(_)
        )
    }

    /// Process exit code: 2 for bad input, 3 for physics failures, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 4,
            e if e.is_physics() => 3,
            _ => 2,
        }
    }

    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { path: path.into(), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
