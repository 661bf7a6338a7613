//! Steady-state entanglement of two atoms in cascaded optical cavities.
//!
//! The crate is layered: [`operator`] supplies dense and sparse complex linear
//! algebra over tensor-product spaces; [`reduced`] is the two-qubit cascaded
//! master equation with its closed-form steady state; [`cavity`] builds the
//! effective two-level and full five-level models with explicit cavity modes;
//! [`dynamics`] integrates and solves any of them; [`metrics`] scores
//! two-qubit states.
//!
//! Units: rates are angular frequencies in rad/us (a value quoted as X/2pi MHz
//! is stored as 2*pi*X), times are in microseconds.

pub mod error;
pub mod cavity;
pub mod dynamics;
pub mod metrics;
pub mod operator;
pub mod reduced;

pub use error::{Error, Result};
