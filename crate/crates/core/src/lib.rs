//! Spectral solvers, controls and Monte Carlo estimators for the Φ⁴ model on
//! the periodic torus T^d, d ≤ 3.

pub mod action;
pub mod control;
pub mod error;
pub mod field;
pub mod ldp;
pub mod params;
pub mod path;
pub mod semigroup;
pub mod skeleton;
pub mod stochastic;

pub use error::{Error, Result};
pub use field::{Field, GridSpec, NormSpec};
pub use params::ModelParams;
pub use path::{Control, Path};
