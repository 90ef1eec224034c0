//! Numerical laboratory for level sets of random fields.
//!
//! The crate measures level sets of simulated random fields (root counts,
//! nodal lengths, weighted sums over level sets), evaluates the matching
//! Kac-Rice integrals independently, and compares both sides statistically.
//!
//! * [`field_models`]: Gaussian spectral fields, χ² fields, shot noise and
//!   gravitational microlensing, each with exact value and Jacobian.
//! * [`integral_geometry`]: normal Jacobian, Gaussian determinant constants,
//!   Crofton constants, Haar sampling on Grassmannians, Favard measure.
//! * [`level_set`]: empirical side (roots, marching squares, Kac counter,
//!   local time, irregularity scan, weighted sums).
//! * [`kac_rice`]: right-hand sides (densities, conditional Jacobian
//!   expectations, weighted, Euler characteristic, shot noise, microlensing,
//!   second factorial moment).
//! * [`harness`]: experiment configs, paired runs, reports and suites.

pub mod domain;
pub mod error;
pub mod exec;
pub mod field_models;
pub mod harness;
pub mod integral_geometry;
pub mod kac_rice;
pub mod level_set;
pub mod linalg;
pub mod rng;
pub mod stats;

pub use domain::BoxDomain;
pub use error::{Error, FieldError, Result};
pub use exec::Exec;
pub use stats::{Estimate, MeanAccumulator};

/// Version string echoed into reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Version of every JSON/CSV document the crate reads or writes.
pub const SCHEMA_VERSION: u32 = 1;
