//! Phase-space (Liouville) transport of ensemble PDFs for discretized Burgers
//! dynamics, a Monte-Carlo ensemble oracle to check it against, the causal
//! linear-system form of explicit time marching, and qubit/cost estimates for
//! phase-space encodings.
//!
//! Modules:
//!
//! - [`phase_space`]: grids, density fields, marginals, observables, file formats
//! - [`burgers`]: semi-discrete Burgers right-hand sides and RK4
//! - [`ensemble`]: sampled trajectory bundles and empirical PDFs
//! - [`liouville`]: conservative donor-cell operator and time marching
//! - [`marginal`]: closures and the 3-point marginal equation
//! - [`causal`]: block lower-triangular system `A p = q`
//! - [`resources`]: qubit counts and cost models

pub mod burgers;
pub mod causal;
pub mod ensemble;
pub mod error;
pub mod liouville;
pub mod marginal;
pub mod phase_space;
pub mod resources;
pub mod sparse;

pub use burgers::{DynamicsSpec, Scheme, SpatialGrid};
pub use error::{Error, Result};
pub use liouville::{FluxOperator, Method, PhaseVelocityField};
pub use phase_space::{DensityField, Observable, ObservableSpec, PhaseGrid};

/// Float text with 17 significant digits, round-trip exact.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
