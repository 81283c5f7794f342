//! Unfitted isogeometric solvers for two-dimensional elliptic interface problems.
//!
//! Quadratic B-spline spaces on a rectangular parameter domain are enriched
//! near an implicitly defined interface. The crate provides the spline and
//! quasi-interpolation machinery, interface classification and cut-cell
//! quadrature, the enrichment variants, Galerkin assembly, the linear-algebra
//! back end, and the benchmark drivers used by the `sgiga` binary.

pub mod assembly;
pub mod enrichment;
pub mod error;
pub mod experiments;
pub mod interface_geometry;
pub mod linalg;
pub mod quadrature;
pub mod quasi_interp;
pub mod splines;

pub use error::{Error, Result};
