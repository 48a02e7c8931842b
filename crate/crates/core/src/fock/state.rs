use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::gates::TwoModeGate;
use super::space::FockSpace;
use crate::error::{ensure, invalid, Error, Result};

/// Projections below this probability are treated as impossible.
pub const ZERO_PROBABILITY: f64 = 1e-15;
/// Default tolerance of the truncation-leakage guard, relative to the trace.
pub const DEFAULT_LEAKAGE_TOLERANCE: f64 = 1e-6;
/// Extra levels per mode used when estimating truncation leakage.
const LEAKAGE_PADDING: usize = 4;

/// How a gate application treats population pushed past the Fock cutoff.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LeakagePolicy {
    /// Fail if the estimated leakage exceeds this fraction of the trace.
    Check(f64),
    /// Evolve with the truncated generator and do not estimate leakage.
    Ignore,
}

impl Default for LeakagePolicy {
    fn default() -> Self {
        LeakagePolicy::Check(DEFAULT_LEAKAGE_TOLERANCE)
    }
}

/// Preparation of a single mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModePrep {
    Vacuum,
    /// Thermal state with mean occupation `n̄`.
    Thermal(f64),
    Coherent(C64),
}

impl ModePrep {
    /// Truncated, renormalized single-mode density matrix.
    pub fn matrix(&self, dim: usize) -> Result<DMatrix<C64>> {
        match *self {
            ModePrep::Vacuum => {
                let mut m = DMatrix::zeros(dim, dim);
                m[(0, 0)] = C64::new(1.0, 0.0);
                Ok(m)
            }
            ModePrep::Thermal(nbar) => {
                ensure(
                    nbar.is_finite() && nbar >= 0.0,
                    "thermal occupation",
                    format!("{nbar} must be finite and >= 0"),
                )?;
                let q = nbar / (1.0 + nbar);
                let weights: Vec<f64> = (0..dim).map(|k| q.powi(k as i32)).collect();
                let total: f64 = weights.iter().sum();
                Ok(DMatrix::from_diagonal(&DVector::from_iterator(
                    dim,
                    weights.iter().map(|w| C64::new(w / total, 0.0)),
                )))
            }
            ModePrep::Coherent(alpha) => {
                ensure(
                    alpha.re.is_finite() && alpha.im.is_finite(),
                    "coherent amplitude",
                    "must be finite",
                )?;
                if alpha.norm_sqr() > dim as f64 / 4.0 {
                    log::warn!(
                        "coherent amplitude |alpha|^2 = {:.3} is large for a cutoff of {dim}",
                        alpha.norm_sqr()
                    );
                }
                let mut amps = Vec::with_capacity(dim);
                let mut a = C64::new(1.0, 0.0);
                for k in 0..dim {
                    if k > 0 {
                        a = a * alpha / (k as f64).sqrt();
                    }
                    amps.push(a);
                }
                let v = DVector::from_vec(amps).normalize();
                Ok(&v * v.adjoint())
            }
        }
    }
}

/// Dense density matrix on a truncated multimode Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: FockSpace,
    elements: DMatrix<C64>,
}

impl DensityMatrix {
    /// Wraps a matrix without renormalizing it.
    pub fn from_matrix(space: FockSpace, elements: DMatrix<C64>) -> Result<Self> {
        let d = space.dim();
        if elements.nrows() != d || elements.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for a space of dimension {d}",
                elements.nrows(),
                elements.ncols()
            )));
        }
        Ok(Self { space, elements })
    }

    /// `|psi><psi|` for a (not necessarily normalized) state vector.
    pub fn from_pure(space: FockSpace, amplitudes: &[C64]) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for a space of dimension {}",
                amplitudes.len(),
                space.dim()
            )));
        }
        let v = DVector::from_row_slice(amplitudes);
        let norm = v.norm();
        if norm == 0.0 {
            return Err(invalid("amplitudes", "zero vector"));
        }
        let v = v / C64::new(norm, 0.0);
        Ok(Self {
            space,
            elements: &v * v.adjoint(),
        })
    }

    pub fn vacuum(space: FockSpace) -> Self {
        let d = space.dim();
        let mut elements = DMatrix::zeros(d, d);
        elements[(0, 0)] = C64::new(1.0, 0.0);
        Self { space, elements }
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.elements
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.elements
    }

    /// Matrix element `<row| rho |col>` addressed by occupation numbers.
    pub fn element(&self, row: &[usize], col: &[usize]) -> Result<C64> {
        Ok(self.elements[(self.space.index(row)?, self.space.index(col)?)])
    }

    /// Probability of the basis state with the given occupations.
    pub fn population(&self, occupations: &[usize]) -> Result<f64> {
        Ok(self.element(occupations, occupations)?.re)
    }

    pub fn trace(&self) -> f64 {
        self.elements.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn purity(&self) -> f64 {
        self.elements.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.trace().powi(2)
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.elements.nrows();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.elements[(i, j)] - self.elements[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.elements + self.elements.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks the density-matrix invariants at the given tolerances.
    pub fn check_physical(&self, trace_tol: f64, eig_tol: f64) -> Result<()> {
        ensure(
            (self.trace() - 1.0).abs() <= trace_tol,
            "density matrix",
            format!("trace {} differs from 1", self.trace()),
        )?;
        ensure(
            self.hermiticity_error() <= trace_tol,
            "density matrix",
            format!("not Hermitian (error {:.2e})", self.hermiticity_error()),
        )?;
        let min = self.min_eigenvalue();
        ensure(
            min >= -eig_tol,
            "density matrix",
            format!("negative eigenvalue {min:.3e}"),
        )
    }

    fn renormalized(mut elements: DMatrix<C64>, space: FockSpace) -> Result<Self> {
        let herm = (&elements + elements.adjoint()) * C64::new(0.5, 0.0);
        elements = herm;
        let tr: f64 = elements.diagonal().iter().map(|z| z.re).sum();
        if tr.is_nan() || tr <= ZERO_PROBABILITY {
            return Err(Error::ZeroProbability);
        }
        elements /= C64::new(tr, 0.0);
        Ok(Self { space, elements })
    }

    /// Tensor product `self ⊗ other`, with `other`'s modes appended.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<Self> {
        let mut dims = self.space.dims().to_vec();
        dims.extend_from_slice(other.space.dims());
        let space = FockSpace::new(dims)?;
        Ok(Self {
            space,
            elements: self.elements.kronecker(&other.elements),
        })
    }

    /// `x (op^dag ⊗ 1)`, with `op` acting on `modes` in the order given and
    /// only its nonzero entries visited.
    fn right_apply_adjoint(
        &self,
        op: &DMatrix<C64>,
        modes: &[usize],
        x: &DMatrix<C64>,
    ) -> DMatrix<C64> {
        let (offsets, bases) = self.space.split(modes);
        let n = x.nrows();
        let entries: Vec<(usize, usize, C64)> = (0..op.ncols())
            .flat_map(|k| (0..op.nrows()).map(move |j| (j, k)))
            .filter_map(|(j, k)| {
                let v = op[(j, k)];
                (v != C64::new(0.0, 0.0)).then(|| (j, k, v.conj()))
            })
            .collect();
        let src = x.as_slice();
        let mut out = DMatrix::<C64>::zeros(n, x.ncols());
        let dst = out.as_mut_slice();
        for &b in &bases {
            for &(j, k, v) in &entries {
                let cj = (b + offsets[j]) * n;
                let ck = (b + offsets[k]) * n;
                let (to, from) = (&mut dst[cj..cj + n], &src[ck..ck + n]);
                for (t, f) in to.iter_mut().zip(from) {
                    *t += v * f;
                }
            }
        }
        out
    }

    /// `U rho U^dag` for a unitary acting on `modes`.
    pub fn conjugate_local(&self, unitary: &DMatrix<C64>, modes: &[usize]) -> Result<Self> {
        self.space.check_modes(modes)?;
        let local: usize = modes.iter().map(|&m| self.space.dims()[m]).product();
        if unitary.nrows() != local || unitary.ncols() != local {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} operator on a {local}-dimensional subspace",
                unitary.nrows(),
                unitary.ncols()
            )));
        }
        // U rho U^dag = ((rho U^dag)^dag U^dag)^dag
        let half = self.right_apply_adjoint(unitary, modes, &self.elements);
        let full = self
            .right_apply_adjoint(unitary, modes, &half.adjoint())
            .adjoint();
        Self::renormalized(full, self.space.clone())
    }

    /// Expectation value of a local operator acting on `modes`.
    pub fn expectation_local(&self, op: &DMatrix<C64>, modes: &[usize]) -> Result<C64> {
        let reduced = self.partial_trace(modes)?;
        if op.nrows() != reduced.elements.nrows() {
            return Err(Error::DimensionMismatch("operator size".into()));
        }
        Ok((op * &reduced.elements).trace() / C64::new(reduced.trace(), 0.0))
    }

    /// Applies a two-mode gate, `modes.0` playing the role of the first
    /// operator in the generator.
    pub fn apply_gate(
        &self,
        gate: TwoModeGate,
        modes: (usize, usize),
        policy: LeakagePolicy,
    ) -> Result<Self> {
        gate.validate()?;
        let pair = [modes.0, modes.1];
        self.space.check_modes(&pair)?;
        if gate.is_identity() {
            return Ok(self.clone());
        }
        if let LeakagePolicy::Check(tolerance) = policy {
            let leakage = self.truncation_leakage(gate, modes)?;
            if leakage > tolerance * self.trace() {
                return Err(Error::TruncationLeakage { leakage, tolerance });
            }
        }
        let da = self.space.dims()[modes.0];
        let db = self.space.dims()[modes.1];
        self.conjugate_local(&gate.unitary(da, db), &pair)
    }

    /// Population the gate would move above the cutoff, estimated by evolving
    /// the reduced pair state in a padded space.
    pub fn truncation_leakage(&self, gate: TwoModeGate, modes: (usize, usize)) -> Result<f64> {
        let reduced = self.partial_trace(&[modes.0, modes.1])?;
        let (da, db) = (reduced.space.dims()[0], reduced.space.dims()[1]);
        let (pa, pb) = (da + LEAKAGE_PADDING, db + LEAKAGE_PADDING);
        let mut big = DMatrix::<C64>::zeros(pa * pb, pa * pb);
        for i in 0..da * db {
            for j in 0..da * db {
                let bi = (i / db) * pb + i % db;
                let bj = (j / db) * pb + j % db;
                big[(bi, bj)] = reduced.elements[(i, j)];
            }
        }
        let u = gate.unitary(pa, pb);
        let evolved = &u * big * u.adjoint();
        let outside: f64 = (0..pa * pb)
            .filter(|&k| k / pb >= da || k % pb >= db)
            .map(|k| evolved[(k, k)].re)
            .sum();
        Ok(outside.max(0.0))
    }

    /// Projects `mode` with `detector`, returning the renormalized state and
    /// the outcome probability.
    pub fn project(&self, mode: usize, detector: Detector) -> Result<(Self, f64)> {
        let dim = self.space.mode_dim(mode)?;
        if let Detector::Fock(k) = detector {
            ensure(
                k < dim,
                "fock level",
                format!("level {k} not below the cutoff {dim}"),
            )?;
        }
        let keep: Vec<bool> = (0..self.space.dim())
            .map(|i| detector.accepts(self.space.level(i, mode)))
            .collect();
        let d = self.space.dim();
        let mut out = DMatrix::zeros(d, d);
        for j in 0..d {
            if !keep[j] {
                continue;
            }
            for i in 0..d {
                if keep[i] {
                    out[(i, j)] = self.elements[(i, j)];
                }
            }
        }
        let probability = out.diagonal().iter().map(|z| z.re).sum::<f64>() / self.trace();
        if probability.is_nan() || probability <= ZERO_PROBABILITY {
            return Err(Error::ZeroProbability);
        }
        Ok((Self::renormalized(out, self.space.clone())?, probability))
    }

    /// Reduced state on `keep`, whose modes appear in the order listed.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::EmptyInput(
                "partial trace needs at least one kept mode",
            ));
        }
        let sub = self.space.subspace(keep)?;
        let (offsets, bases) = self.space.split(keep);
        let n = offsets.len();
        let mut out = DMatrix::zeros(n, n);
        for &b in &bases {
            for (q, oq) in offsets.iter().enumerate() {
                for (p, op) in offsets.iter().enumerate() {
                    out[(p, q)] += self.elements[(b + op, b + oq)];
                }
            }
        }
        Ok(Self {
            space: sub,
            elements: out,
        })
    }

    /// Mean excitation number and Fock distribution of one mode.
    pub fn mode_stats(&self, mode: usize) -> Result<ModeStats> {
        let reduced = self.partial_trace(&[mode])?;
        let tr = reduced.trace();
        let probabilities: Vec<f64> = reduced
            .elements
            .diagonal()
            .iter()
            .map(|z| z.re / tr)
            .collect();
        let mean = probabilities
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum();
        Ok(ModeStats {
            mean,
            probabilities,
        })
    }
}

/// Measurement applied by [`DensityMatrix::project`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Detector {
    /// Number-resolving outcome `|k><k|`.
    Fock(usize),
    /// Threshold detector firing: `1 - |0><0|`.
    Click,
}

impl Detector {
    fn accepts(&self, level: usize) -> bool {
        match *self {
            Detector::Fock(k) => level == k,
            Detector::Click => level > 0,
        }
    }
}

impl Default for Detector {
    fn default() -> Self {
        Detector::Fock(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeStats {
    pub mean: f64,
    pub probabilities: Vec<f64>,
}
