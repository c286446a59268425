//! Markovian open-system machinery for an exciton-driven molecular battery.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: dense complex matrices, Hermitian eigensolves, matrix
//!   exponentials, superoperators, and validated density matrices;
//! - [`operators`]: Fock/qubit/fermion operator constructions and the battery
//!   Hamiltonian;
//! - [`spectra`]: bath coupling spectra G(ω) and their detailed-balance
//!   structure;
//! - [`davies`]: weak-coupling (Davies) generators — Bohr decomposition,
//!   channel assembly, stationary states, and propagation;
//! - [`cumulant`]: the refined weak-coupling map built from a finite-time
//!   second-order cumulant;
//! - [`exciton`]: grand-canonical two-band exciton reservoirs and the
//!   effective chemical potential they imprint;
//! - [`battery`]: the driven two-level + oscillator battery model, its
//!   charging/discharge channels, and closed-form steady states;
//! - [`thermo`]: ergotropy, passive states, and entropy bookkeeping;
//! - [`config`] / [`runner`]: TOML-driven scenario execution behind the
//!   `simulate` binary.

pub mod battery;
pub mod config;
pub mod cumulant;
pub mod davies;
pub mod error;
pub mod exciton;
pub mod linalg;
pub mod operators;
pub mod runner;
pub mod spectra;
pub mod thermo;

pub use error::{Error, Result};
