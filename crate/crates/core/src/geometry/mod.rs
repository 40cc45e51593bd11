//! Lattices, fields, parabolic regions, cut-offs and spectral calculus.

pub mod cutoff;
pub mod field;
pub mod grid;
pub mod io;
pub mod random;
pub mod region;
pub mod spectral;

pub use cutoff::{build_cutoff, oscillation, weighted_mean, CutoffPair, OscillationMode};
pub use field::{ScalarField, SkewTensorField, VectorField};
pub use grid::{Lattice, SpaceTimeGrid};
pub use region::{lp_norm, mean, ParabolicCube, ParabolicCylinder, Region};
pub use spectral::{curl, divergence, gradient};
