//! Simulation and analysis toolkit for a heralded optomechanical phonon
//! memory.
//!
//! * [`fock`]: truncated Fock-space density matrices and Gaussian gates.
//! * [`protocol`]: heralding, superposition readout, correlation statistics.
//! * [`cli`]: scenario files and the experiment runner.
//! * [`clickstream`]: CW detector click simulation and histogram analysis.
//! * [`dynamics`]: heating, damping and defect-saturation rate models.
//! * [`estimation`]: weighted Levenberg-Marquardt fits and initial guesses.

pub mod cli;
pub mod clickstream;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod fock;
pub mod protocol;

pub use error::{Error, Result};
