use crate::error::{invalid, Error, Result};

/// Largest number of modes a [`FockSpace`] may hold.
pub const MAX_MODES: usize = 4;

/// Tensor product of truncated single-mode Fock spaces.
///
/// Basis states are ordered row-major with mode 0 most significant, so the
/// flat index of `|n_0, n_1, ...>` is `sum_k n_k * stride_k` where
/// `stride_k` is the product of the dimensions of all later modes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FockSpace {
    dims: Vec<usize>,
    strides: Vec<usize>,
}

impl FockSpace {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(invalid("dims", "a Fock space needs at least one mode"));
        }
        if dims.len() > MAX_MODES {
            return Err(invalid(
                "dims",
                format!(
                    "{} modes requested, at most {MAX_MODES} supported",
                    dims.len()
                ),
            ));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(invalid("dims", format!("mode dimension {d} < 2")));
        }
        let mut strides = vec![1; dims.len()];
        for k in (0..dims.len() - 1).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        Ok(Self { dims, strides })
    }

    /// `count` modes, each truncated at `dim` levels.
    pub fn uniform(count: usize, dim: usize) -> Result<Self> {
        Self::new(vec![dim; count])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn mode_count(&self) -> usize {
        self.dims.len()
    }

    /// Total Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn mode_dim(&self, mode: usize) -> Result<usize> {
        self.check_mode(mode)?;
        Ok(self.dims[mode])
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.dims.len() {
            Ok(())
        } else {
            Err(Error::InvalidMode {
                mode,
                count: self.dims.len(),
            })
        }
    }

    /// Validates a list of distinct, in-range modes.
    pub fn check_modes(&self, modes: &[usize]) -> Result<()> {
        for (i, &m) in modes.iter().enumerate() {
            self.check_mode(m)?;
            if modes[..i].contains(&m) {
                return Err(invalid("modes", format!("mode {m} listed twice")));
            }
        }
        Ok(())
    }

    /// Flat index of an occupation-number tuple.
    pub fn index(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} occupations for {} modes",
                occupations.len(),
                self.dims.len()
            )));
        }
        let mut idx = 0;
        for (k, (&n, &d)) in occupations.iter().zip(&self.dims).enumerate() {
            if n >= d {
                return Err(invalid(
                    "occupation",
                    format!("level {n} on mode {k} exceeds cutoff {d}"),
                ));
            }
            idx += n * self.strides[k];
        }
        Ok(idx)
    }

    /// Occupation of `mode` in basis state `index`.
    #[inline]
    pub(crate) fn level(&self, index: usize, mode: usize) -> usize {
        (index / self.strides[mode]) % self.dims[mode]
    }

    pub fn occupations(&self, index: usize) -> Vec<usize> {
        (0..self.dims.len()).map(|m| self.level(index, m)).collect()
    }

    /// Space spanned by `modes`, in the order given.
    pub fn subspace(&self, modes: &[usize]) -> Result<FockSpace> {
        self.check_modes(modes)?;
        FockSpace::new(modes.iter().map(|&m| self.dims[m]).collect::<Vec<_>>())
    }

    /// For a list of modes, returns `(offsets, bases)`: `offsets[p]` is the
    /// flat-index contribution of local basis state `p` (ordered like
    /// [`FockSpace::subspace`]), and `bases` enumerates every full index whose
    /// occupation on the listed modes is zero.
    pub(crate) fn split(&self, modes: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let local: Vec<usize> = modes.iter().map(|&m| self.dims[m]).collect();
        let local_dim: usize = local.iter().product();
        let mut offsets = Vec::with_capacity(local_dim);
        for p in 0..local_dim {
            let mut rem = p;
            let mut off = 0;
            for (k, &m) in modes.iter().enumerate().rev() {
                let n = rem % local[k];
                rem /= local[k];
                off += n * self.strides[m];
            }
            offsets.push(off);
        }
        let bases = (0..self.dim())
            .filter(|&i| modes.iter().all(|&m| self.level(i, m) == 0))
            .collect();
        (offsets, bases)
    }
}
