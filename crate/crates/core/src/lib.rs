//! Upwind finite-difference schemes for one-dimensional Fokker-Planck
//! equations, treated as continuous-time birth-death chains.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod exprparse;
pub mod field;
pub mod gap;
pub mod model;
pub mod montecarlo;
mod quadrature;
pub mod scheme;
pub mod stationary;

pub use error::{Error, Result};
pub use field::{FieldKind, FieldVec};
pub use model::{Coefficient, Domain, Grid, Preset, Problem};
pub use scheme::{Boundary, Rates};
