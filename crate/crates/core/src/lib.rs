//! Numerical laboratory for identifying a Robin (corrosion) coefficient on an
//! inaccessible part of the boundary of a planar conductor from a single
//! boundary measurement.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: boundary curves, arcs, margin subsets and surface balls.
//! * [`mesh`]: triangulations, solid-ball masks and the mesh exchange format.
//! * [`forward`]: P1 finite elements for the mixed Neumann/Robin Laplace problem.
//! * [`continuation`]: regularized harmonic continuation of Cauchy data.
//! * [`recovery`]: the quotient reconstruction and interpolation bounds.
//! * [`estimates`]: empirical doubling, vanishing-rate, A_p and Rellich audits.
//! * [`experiment`]: configuration, stability sweeps, modulus fits and reports.

pub mod continuation;
pub mod error;
pub mod estimates;
pub mod experiment;
pub mod forward;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod recovery;
mod sparse;
mod stats;

pub use error::{Error, Result};
