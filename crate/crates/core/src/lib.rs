//! Driven Lipkin–Meshkov–Glick model realized with qubits in a pumped cavity.
//!
//! * [`spin`]: collective spin algebra in the Dicke sector.
//! * [`effective`]: cavity parameters to effective drive and coupling, exact
//!   ground states and the isotropic closed form.
//! * [`entanglement`]: two-qubit reduced states and concurrence.
//! * [`meanfield`]: dissipative Bloch equations, fixed points and stability.
//! * [`lindblad`]: dense Liouvillians for the cavity + qubit system and for the
//!   qubit-only collective master equation.
//! * [`cli`]: run configuration, presets and CSV/JSON output.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod effective;
pub mod entanglement;
pub mod error;
pub mod lindblad;
pub mod meanfield;
pub mod spin;

pub use error::{Error, Result};
