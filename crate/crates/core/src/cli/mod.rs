//! Scenario files and the experiment runner behind the `phonmem` binary.

mod config;
mod run;

pub use config::*;
pub use run::*;

/// Process exit status for a configuration problem.
pub const EXIT_CONFIG: i32 = 1;
/// Process exit status for a failure while running.
pub const EXIT_RUNTIME: i32 = 2;
