#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Classical long-range scattering, Dollard phase modifiers and microlocal
//! propagation experiments.

pub mod classical_flow;
pub mod dollard_phase;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod ode;
pub mod quadrature;
pub mod quantum_propagator;
pub mod symbols;
pub mod wavefront_detector;

pub use error::{Error, Result};
