//! Flat-metric Schrödinger evolution on periodic lattices and Fourier
//! multipliers built from the phase functions.

mod dollard;
mod evolve;
mod grid;
mod multiplier;
mod smoothing;

pub use dollard::{dollard_conjugate, DollardComparison};
pub use evolve::{evolve, PropagatorConfig};
pub use grid::GridState;
pub use multiplier::{apply_chain, apply_multiplier, MultiplierSpec};
pub use smoothing::{smoothing_norms, sobolev_norm, SmoothingNorms};
