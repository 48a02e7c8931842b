//! Dense density matrices on small truncated multimode Fock spaces.

mod expm;
mod gates;
mod space;
mod state;

pub use expm::{expm, one_norm};
pub use gates::{annihilation, TwoModeGate};
pub use space::{FockSpace, MAX_MODES};
pub use state::{
    DensityMatrix, Detector, LeakagePolicy, ModePrep, ModeStats, DEFAULT_LEAKAGE_TOLERANCE,
    ZERO_PROBABILITY,
};

use crate::error::{Error, Result};

/// Default per-mode cutoff.
pub const DEFAULT_DIM: usize = 6;

/// Product state with one preparation per mode.
pub fn build_state(space: &FockSpace, preps: &[ModePrep]) -> Result<DensityMatrix> {
    if preps.len() != space.mode_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} preparations for {} modes",
            preps.len(),
            space.mode_count()
        )));
    }
    let mut elements = preps[0].matrix(space.dims()[0])?;
    for (prep, &dim) in preps.iter().zip(space.dims()).skip(1) {
        elements = elements.kronecker(&prep.matrix(dim)?);
    }
    DensityMatrix::from_matrix(space.clone(), elements)
}

/// Two-mode squeezer `exp(xi a^dag b^dag - h.c.)` with `tanh|xi| = sqrt(p_b)`.
pub fn apply_two_mode_squeeze(
    rho: &DensityMatrix,
    modes: (usize, usize),
    p_b: f64,
    phase: f64,
) -> Result<DensityMatrix> {
    rho.apply_gate(
        TwoModeGate::Squeeze { p_b, phase },
        modes,
        LeakagePolicy::default(),
    )
}

/// Beamsplitter `exp(theta (e^{i phi} a^dag c - h.c.))`; `pi/4` is 50:50.
pub fn apply_beamsplitter(
    rho: &DensityMatrix,
    modes: (usize, usize),
    mixing_angle: f64,
    phase: f64,
) -> Result<DensityMatrix> {
    rho.apply_gate(
        TwoModeGate::BeamSplitter {
            angle: mixing_angle,
            phase,
        },
        modes,
        LeakagePolicy::default(),
    )
}

pub fn project(
    rho: &DensityMatrix,
    mode: usize,
    detector: Detector,
) -> Result<(DensityMatrix, f64)> {
    rho.project(mode, detector)
}

pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    rho.partial_trace(keep)
}

pub fn mode_stats(rho: &DensityMatrix, mode: usize) -> Result<ModeStats> {
    rho.mode_stats(mode)
}
