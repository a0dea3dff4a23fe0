//! Leggett-Garg self-testing of binary Pauli measurements.
//!
//! The crate is organised bottom-up:
//!
//! - [`qcore`]: small dense complex linear algebra, qubit states, two-outcome
//!   measurements (projective and biased/unsharp), Lüders updates.
//! - [`seqstats`]: two-time joint statistics, correlators, the four-term
//!   functional `K4 = C11 + C21 + C22 - C12`, NSIT and predictability diagnostics.
//! - [`classical`]: exhaustive enumeration of deterministic strategies (the classical bound 2).
//! - [`povmopt`]: numerical maximisation of `K4` over the two-outcome POVM family.
//! - [`jordan`]: block-diagonal (Jordan form) scenarios, basis canonicalisation and
//!   the isometry that extracts the ideal qubit measurements.
//! - [`robustness`]: dephasing extraction channels, operator-inequality certification
//!   and the fidelity lower bound as a function of `K4`.

pub mod classical;
pub mod error;
pub mod jordan;
pub mod optim;
pub mod povmopt;
pub mod qcore;
pub mod robustness;
pub mod seqstats;

pub use error::{Error, Result};

/// The maximal quantum value of `K4`, `2√2`.
pub const QUANTUM_MAX_K4: f64 = 2.0 * std::f64::consts::SQRT_2;

/// The bound obeyed by every predictable, non-signalling-in-time model.
pub const CLASSICAL_MAX_K4: f64 = 2.0;
