//! Detector click streams for continuous-wave coherence and bunching runs,
//! and the histogram pipeline that turns them into correlation decays.

mod analysis;
mod io;
mod simulate;

pub use analysis::*;
pub use io::*;
pub use simulate::*;
