//! Numerical laboratory for magnetic-field averaging.
//!
//! The crate builds magnetic potentials from weakly regular fields, compares
//! them with potentials of cell-averaged constant fields, discretizes the
//! Dirichlet magnetic Laplacian with link variables, and minimizes both the
//! constant-field (bulk) and the full Ginzburg-Landau functionals.
//!
//! Module map:
//!
//! - [`geometry`]: domains, cells and exact containment tests.
//! - [`grid`]: uniform grids, sampled scalar/vector fields and quadrature.
//! - [`field`]: magnetic potentials, averages, gauge functions.
//! - [`random`]: seeded random trigonometric fields.
//! - [`lattice`]: square cell decompositions of a domain.
//! - [`spectral`]: magnetic Laplacian, lowest eigenvalue, trial states.
//! - [`bulk`]: reduced constant-field Ginzburg-Landau problem and `g(b)`.
//! - [`gl`]: full Ginzburg-Landau functional and its diagnostics.
//! - [`cli`]: experiment drivers used by the `maglab` binary.

pub mod bulk;
pub mod cli;
pub mod error;
pub mod field;
pub mod geometry;
pub mod gl;
pub mod grid;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod random;
pub mod spectral;

pub use error::{Error, Result};
pub use geometry::{Cell, CellShape, Domain, Point, Shape};
pub use grid::{Grid, ScalarField, ScalarFunction, VectorField, VectorFunction};

/// Version string stamped into every emitted record.
pub const ARTIFACT_VERSION: &str = concat!("maglab-", env!("CARGO_PKG_VERSION"));
