// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Floquet-engineered chiral spin dynamics in small trapped-ion chains.
//!
//! The pipeline runs from trap parameters ([`chain`]) through periodic drive
//! protocols ([`protocol`]) and effective flux Hamiltonians ([`floquet`]) to
//! spin-only ([`evolve`]) and spin–phonon ([`dicke`]) dynamics, with derived
//! quantities in [`observables`] and file-level scenarios in [`experiments`].

pub mod chain;
pub mod config;
pub mod dicke;
pub mod error;
pub mod evolve;
pub mod experiments;
pub mod floquet;
pub mod krylov;
pub mod linalg;
pub mod observables;
pub mod protocol;
pub mod spin;

pub use error::{Error, Result};
pub use linalg::C64;
