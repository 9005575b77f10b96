//! Exact small-system simulation of continuous-time quantum optimisation.
//!
//! The crate works with dense state vectors over at most [`MAX_QUBITS`]
//! qubits. Everything here is `no_std` + `alloc`; the default `std` feature
//! only switches the linear-algebra backend to its threaded/SIMD build.
//!
//! Layering, bottom up:
//!
//! - [`problems`]: Ising instances (MAX-CUT, Sherrington-Kirkpatrick) as
//!   energy tables.
//! - [`operators`]: driver/problem/bias Hamiltonians, matrix-free action,
//!   dense spectra and trace moments.
//! - [`dynamics`]: schedules and Schrödinger propagation.
//! - [`statmech`]: diagonal ensembles, Gibbs states, inverse-temperature
//!   fitting, work and passivity.
//! - [`pstqa`]: the thermal annealing equations over a pluggable partition
//!   function.
//! - [`ansatz`]: Gaussian and exponentially modified Gaussian partition
//!   functions.
//! - [`protocols`]: quantum-walk campaigns, warm starts, cyclic shot loops and
//!   entropy accounting.
#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod ansatz;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod ode;
pub mod operators;
pub mod problems;
pub mod protocols;
pub mod pstqa;
pub mod rng;
pub mod statmech;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Largest qubit count accepted by any dense routine.
pub const MAX_QUBITS: usize = 13;
