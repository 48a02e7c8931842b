use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::expm::expm;
use crate::error::{ensure, Result};

/// Single-mode annihilation operator truncated at `dim` levels.
pub fn annihilation(dim: usize) -> DMatrix<C64> {
    let mut a = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// Gaussian two-mode unitaries used by the protocol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TwoModeGate {
    /// `exp(xi a^dag b^dag - xi^* a b)` with `|xi| = artanh(sqrt(p_b))` and
    /// `arg xi = phase`, so that on vacuum `<11|psi>/<00|psi> = sqrt(p_b) e^{i phase}`.
    Squeeze { p_b: f64, phase: f64 },
    /// `exp(angle (e^{i phase} a^dag c - e^{-i phase} a c^dag))`; `angle = pi/4`
    /// splits evenly.
    BeamSplitter { angle: f64, phase: f64 },
}

impl TwoModeGate {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TwoModeGate::Squeeze { p_b, phase } => {
                ensure(
                    (0.0..1.0).contains(&p_b),
                    "p_b",
                    format!("pair probability {p_b} outside [0, 1)"),
                )?;
                ensure(phase.is_finite(), "phase", "must be finite")
            }
            TwoModeGate::BeamSplitter { angle, phase } => {
                ensure(angle.is_finite(), "mixing_angle", "must be finite")?;
                ensure(phase.is_finite(), "phase", "must be finite")
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        match *self {
            TwoModeGate::Squeeze { p_b, .. } => p_b == 0.0,
            TwoModeGate::BeamSplitter { angle, .. } => angle == 0.0,
        }
    }

    /// The same gate with the generator negated.
    pub fn inverse(&self) -> Self {
        match *self {
            TwoModeGate::Squeeze { p_b, phase } => TwoModeGate::Squeeze {
                p_b,
                phase: phase + std::f64::consts::PI,
            },
            TwoModeGate::BeamSplitter { angle, phase } => TwoModeGate::BeamSplitter {
                angle: -angle,
                phase,
            },
        }
    }

    /// Nonzero generator elements `(row, col, value)` on the `da * db` pair
    /// space, first mode most significant.
    fn generator_elements(&self, da: usize, db: usize) -> Vec<(usize, usize, C64)> {
        let mut out = vec![];
        let idx = |i: usize, j: usize| i * db + j;
        let sq = |n: usize| (n as f64).sqrt();
        for i in 0..da {
            for j in 0..db {
                match *self {
                    TwoModeGate::Squeeze { p_b, phase } => {
                        let xi = C64::from_polar(p_b.sqrt().atanh(), phase);
                        if i + 1 < da && j + 1 < db {
                            out.push((idx(i + 1, j + 1), idx(i, j), xi * sq(i + 1) * sq(j + 1)));
                        }
                        if i > 0 && j > 0 {
                            out.push((idx(i - 1, j - 1), idx(i, j), -xi.conj() * sq(i) * sq(j)));
                        }
                    }
                    TwoModeGate::BeamSplitter { angle, phase } => {
                        let w = C64::from_polar(angle, phase);
                        if i + 1 < da && j > 0 {
                            out.push((idx(i + 1, j - 1), idx(i, j), w * sq(i + 1) * sq(j)));
                        }
                        if i > 0 && j + 1 < db {
                            out.push((idx(i - 1, j + 1), idx(i, j), -w.conj() * sq(i) * sq(j + 1)));
                        }
                    }
                }
            }
        }
        out
    }

    /// Anti-Hermitian generator on the `da * db` pair space (first mode most
    /// significant).
    pub fn generator(&self, da: usize, db: usize) -> DMatrix<C64> {
        let mut g = DMatrix::zeros(da * db, da * db);
        for (r, c, v) in self.generator_elements(da, db) {
            g[(r, c)] += v;
        }
        g
    }

    /// Conserved label of a pair basis state: total number for the
    /// beamsplitter, number difference for the squeezer.
    fn sector(&self, i: usize, j: usize) -> isize {
        match self {
            TwoModeGate::Squeeze { .. } => i as isize - j as isize,
            TwoModeGate::BeamSplitter { .. } => (i + j) as isize,
        }
    }

    /// `exp` of the truncated generator, computed sector by sector.
    pub fn unitary(&self, da: usize, db: usize) -> DMatrix<C64> {
        let d = da * db;
        let mut members: std::collections::BTreeMap<isize, Vec<usize>> = Default::default();
        for i in 0..da {
            for j in 0..db {
                members
                    .entry(self.sector(i, j))
                    .or_default()
                    .push(i * db + j);
            }
        }
        let mut position = vec![0usize; d];
        for list in members.values() {
            for (p, &k) in list.iter().enumerate() {
                position[k] = p;
            }
        }
        let mut blocks: std::collections::BTreeMap<isize, DMatrix<C64>> = members
            .iter()
            .map(|(&s, list)| (s, DMatrix::zeros(list.len(), list.len())))
            .collect();
        for (r, c, v) in self.generator_elements(da, db) {
            let s = self.sector(r / db, r % db);
            blocks.get_mut(&s).expect("sector")[(position[r], position[c])] += v;
        }
        let mut u = DMatrix::zeros(d, d);
        for (s, block) in blocks {
            let list = &members[&s];
            let e = expm(&block);
            for (p, &row) in list.iter().enumerate() {
                for (q, &col) in list.iter().enumerate() {
                    u[(row, col)] = e[(p, q)];
                }
            }
        }
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_anti_hermitian() {
        for g in [
            TwoModeGate::Squeeze {
                p_b: 0.3,
                phase: 0.7,
            },
            TwoModeGate::BeamSplitter {
                angle: 0.4,
                phase: -1.1,
            },
        ] {
            let gen = g.generator(3, 4);
            assert!((&gen + gen.adjoint()).norm() < 1e-14);
        }
    }

    #[test]
    fn truncated_unitaries_are_unitary() {
        let u = TwoModeGate::Squeeze {
            p_b: 0.2,
            phase: 0.3,
        }
        .unitary(5, 5);
        let err = (&u * u.adjoint() - DMatrix::<C64>::identity(25, 25)).norm();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn sector_exponential_matches_full() {
        for g in [
            TwoModeGate::Squeeze {
                p_b: 0.3,
                phase: 0.7,
            },
            TwoModeGate::BeamSplitter {
                angle: 0.9,
                phase: -1.1,
            },
        ] {
            let full = expm(&g.generator(4, 5));
            assert!((g.unitary(4, 5) - full).norm() < 1e-12);
        }
    }

    #[test]
    fn squeeze_vacuum_amplitude_ratio() {
        let p_b = 0.002;
        let phase = 0.4;
        let u = TwoModeGate::Squeeze { p_b, phase }.unitary(6, 6);
        // column 0 is U|00>, |11> has flat index 7
        let ratio = u[(7, 0)] / u[(0, 0)];
        assert!((ratio - C64::from_polar(p_b.sqrt(), phase)).norm() < 1e-12);
    }
}
