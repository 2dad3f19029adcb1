//! Numerical laboratory for a linearized mean-field-game system of coupled
//! forward-backward parabolic equations with Robin boundary conditions.
//!
//! The crate provides:
//!
//! * tensor space-time grids with boundary partitions and trapezoidal
//!   quadrature ([`grid`]),
//! * singular Carleman weights `exp(2*s*alpha)` with log-space evaluation
//!   ([`weights`]),
//! * variable-coefficient second-order operators, Robin traces, and the
//!   conjugated operator machinery ([`operators`]),
//! * theta-scheme solvers for the coupled backward/forward system and its
//!   nonlinear parent, plus manufactured-solution data generation
//!   ([`solver`]),
//! * weighted-inequality evaluators with parameter sweeps ([`estimates`]),
//! * inverse source recovery and state-determination experiments
//!   ([`inverse`]).

pub mod coeffs;
pub mod error;
pub mod estimates;
pub mod expr;
pub mod grid;
pub mod inverse;
pub mod io;
pub mod linalg;
pub mod norms;
pub mod operators;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
