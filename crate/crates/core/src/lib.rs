//! Spectral analysis of nearest-neighbour random walks through their
//! generalized second-order differential operators `-D_m D_x`.
//!
//! A walk with rates `c(x, y)` is recast as a string: an atomic speed measure
//! `dm` on an interval carrying the waiting times, with the spatial
//! inhomogeneity absorbed into the positions of the atoms. Dirichlet and
//! Neumann spectra of the string are computed from a tridiagonal pencil, and
//! cross-checked against shooting solutions and bracketing inequalities.
//! Random environments driven by α-stable subordinators supply the trap and
//! barrier models.

pub mod analytic;
pub mod bracketing;
pub mod disorder;
pub mod eigensolver;
pub mod error;
pub mod numeric;
pub mod registry;
pub mod stats;
pub mod string;
pub mod walk_model;

pub use eigensolver::{count_leq, eigenvalues, BoundaryCondition, Spectrum};
pub use error::{KreinError, Result};
pub use string::{Atom, Jump, KreinString, PiecewiseLinearFunction};
pub use walk_model::{RateField, ScaleSpeedPair};
