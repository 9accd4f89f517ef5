//! Numerical workbench for divergence-form elliptic operators `H = -div(a grad)`.
//!
//! The crate discretizes `H` on truncated grids, computes resolvents, heat
//! semigroups and spectra, and runs finite-dimensional diagnostics for
//! algebra membership of resolvents, Gaussian heat-kernel bounds, the
//! Liouville change of variable and essential-spectrum formulas.

pub mod affiliation;
pub mod asymptotic;
pub mod coefficients;
pub mod discretize;
pub mod error;
pub mod export;
pub mod graphmanifold;
pub mod interp;
pub mod linalg;
pub mod liouville;
pub mod metric;
pub mod quadrature;
pub mod spectral;
pub mod tolerances;

pub use coefficients::{Coefficient, CoefficientProfile, Domain, EllipticityBounds, Shape};
pub use discretize::{Boundary, DiscreteOperator, Grid};
pub use error::{Error, Result};
pub use tolerances::Tolerances;
