//! Numerical laboratory for wave maps from 2+1 Minkowski space into
//! hyperbolic space `H^m`.
//!
//! The crate evolves classical wave maps on a square grid, extends map slices
//! in heat time by the harmonic map heat flow, constructs the caloric gauge
//! frame over the resulting heat-time ladder, and derives the differentiated
//! fields and the energy spectral distribution (ESD).  On top of the pipeline
//! it provides identity checks (torsion, curvature, heat flow, wave tension),
//! the energy metric on differentiated fields, and the frequency/spatial
//! localization procedures used as concentration diagnostics.

pub mod csvio;
pub mod gauge;
pub mod grid;
pub mod heat;
pub mod hyperbolic;
pub mod linalg;
pub mod localize;
pub mod par;
pub mod rng;
pub mod scalar;
pub mod snapshot;
pub mod spectral;
pub mod wave;

mod error;

pub use error::CoreError;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
pub mod quadrature;
