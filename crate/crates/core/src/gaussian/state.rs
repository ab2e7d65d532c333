use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{
    squeezed_variance, symplectic_form, LinearForm, Quadrature, QuadratureConvention,
    SymplecticTransform, PHYSICALITY_TOL, VACUUM_VARIANCE,
};
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Mean vector and covariance matrix of an N-mode Gaussian state, `xxpp` ordered.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn vacuum(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::NoModes);
        }
        Ok(Self {
            mean: DVector::zeros(2 * n),
            cov: DMatrix::identity(2 * n, 2 * n) * VACUUM_VARIANCE,
        })
    }

    /// Pure single-mode squeezed vacuum, `db` decibels below shot noise in `quadrature`.
    pub fn squeezed_vacuum(db: f64, quadrature: Quadrature) -> Result<Self> {
        if !(db >= 0.0 && db.is_finite()) {
            return Err(Error::InvalidSqueezing(db));
        }
        let squeezed = squeezed_variance(db);
        let anti = squeezed_variance(-db);
        let (vx, vp) = match quadrature {
            Quadrature::X => (squeezed, anti),
            Quadrature::P => (anti, squeezed),
        };
        Ok(Self {
            mean: DVector::zeros(2),
            cov: DMatrix::from_diagonal(&DVector::from_vec(vec![vx, vp])),
        })
    }

    /// Builds a state from raw moments, checking shape and symmetry only.
    pub fn from_moments(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 {
            return Err(Error::NoModes);
        }
        if dim % 2 != 0 {
            return Err(Error::DimensionMismatch { expected: dim + 1, got: dim });
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: cov.nrows() });
        }
        let asym = (&cov - cov.transpose()).norm() / cov.norm().max(f64::MIN_POSITIVE);
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self { mean, cov })
    }

    /// Direct sum of independent states, modes of `self` first.
    pub fn tensor(&self, other: &GaussianState) -> GaussianState {
        let (n, m) = (self.n_modes(), other.n_modes());
        let total = n + m;
        let mut mean = DVector::zeros(2 * total);
        let mut cov = DMatrix::zeros(2 * total, 2 * total);
        let place = |k: usize, offset: usize, own: usize| {
            if k < own {
                offset + k
            } else {
                total + offset + (k - own)
            }
        };
        for (src, offset) in [(self, 0), (other, n)] {
            let own = src.n_modes();
            for a in 0..2 * own {
                let ra = place(a, offset, own);
                mean[ra] = src.mean[a];
                for b in 0..2 * own {
                    cov[(ra, place(b, offset, own))] = src.cov[(a, b)];
                }
            }
        }
        GaussianState { mean, cov }
    }

    /// Tensor product of a list of states, in order.
    pub fn product(states: &[GaussianState]) -> Result<GaussianState> {
        let (first, rest) = states.split_first().ok_or(Error::NoModes)?;
        Ok(rest.iter().fold(first.clone(), |acc, s| acc.tensor(s)))
    }

    pub fn n_modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub(crate) fn from_parts_unchecked(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self { mean, cov }
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes() {
            return Err(Error::ModeOutOfRange { index: mode, n_modes: self.n_modes() });
        }
        Ok(())
    }

    /// `mean ← S·mean + d`, `cov ← S·cov·Sᵀ`.
    pub fn apply(&self, t: &SymplecticTransform) -> Result<GaussianState> {
        if t.dim() != self.mean.len() {
            return Err(Error::DimensionMismatch { expected: self.mean.len(), got: t.dim() });
        }
        let s = t.matrix();
        Ok(GaussianState {
            mean: s * &self.mean + t.shift(),
            cov: s * &self.cov * s.transpose(),
        })
    }

    /// Pure-loss channel of efficiency `eta` on one mode.
    pub fn apply_loss(&self, mode: usize, eta: f64) -> Result<GaussianState> {
        self.check_mode(mode)?;
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidEfficiency(eta));
        }
        let n = self.n_modes();
        let rows = [mode, n + mode];
        let scale = eta.sqrt();
        let mut mean = self.mean.clone();
        let mut cov = self.cov.clone();
        for &r in &rows {
            mean[r] *= scale;
            cov.row_mut(r).scale_mut(scale);
            cov.column_mut(r).scale_mut(scale);
        }
        for &r in &rows {
            cov[(r, r)] += (1.0 - eta) * VACUUM_VARIANCE;
        }
        Ok(GaussianState { mean, cov })
    }

    /// Adds `s` to quadrature `q` of `mode`.
    pub fn displace(&self, mode: usize, q: Quadrature, s: f64) -> Result<GaussianState> {
        self.check_mode(mode)?;
        let mut out = self.clone();
        out.mean[QuadratureConvention::index(self.n_modes(), mode, q)] += s;
        Ok(out)
    }

    /// `cᵀ·cov·c` for the form's coefficient vector.
    pub fn quadrature_variance(&self, form: &LinearForm) -> Result<f64> {
        let c = form.coefficients(self.n_modes())?;
        Ok((c.transpose() * &self.cov * &c)[(0, 0)])
    }

    pub fn quadrature_mean(&self, form: &LinearForm) -> Result<f64> {
        let c = form.coefficients(self.n_modes())?;
        Ok(c.dot(&self.mean))
    }

    /// Reduced state on the listed modes, in the listed order.
    pub fn marginal(&self, modes: &[usize]) -> Result<GaussianState> {
        for &m in modes {
            self.check_mode(m)?;
        }
        if modes.is_empty() {
            return Err(Error::NoModes);
        }
        let n = self.n_modes();
        let rows: Vec<usize> = modes.iter().copied().chain(modes.iter().map(|m| n + m)).collect();
        let mean = DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.mean[r]));
        let cov = self.cov.select_rows(&rows).select_columns(&rows);
        Ok(GaussianState { mean, cov })
    }

    /// Same state with `mode` traced out.
    pub fn without_mode(&self, mode: usize) -> Result<GaussianState> {
        self.check_mode(mode)?;
        let keep: Vec<usize> = (0..self.n_modes()).filter(|&m| m != mode).collect();
        self.marginal(&keep)
    }

    /// Smallest eigenvalue of the Hermitian matrix `cov + (i/4)J`.
    ///
    /// Evaluated through the real symmetric embedding `[[V, -B], [B, V]]`
    /// with `B = J/4`, whose spectrum is that of the Hermitian matrix doubled.
    pub fn min_uncertainty_eigenvalue(&self) -> f64 {
        let dim = self.cov.nrows();
        let b = symplectic_form(self.n_modes()) * VACUUM_VARIANCE;
        let mut m = DMatrix::zeros(2 * dim, 2 * dim);
        m.view_mut((0, 0), (dim, dim)).copy_from(&self.cov);
        m.view_mut((dim, dim), (dim, dim)).copy_from(&self.cov);
        m.view_mut((0, dim), (dim, dim)).copy_from(&(-&b));
        m.view_mut((dim, 0), (dim, dim)).copy_from(&b);
        SymmetricEigen::new(m).eigenvalues.min()
    }

    pub fn is_physical(&self) -> bool {
        self.min_uncertainty_eigenvalue() >= -PHYSICALITY_TOL
    }

    /// Largest absolute difference over all mean and covariance entries.
    pub fn max_abs_diff(&self, other: &GaussianState) -> f64 {
        if self.mean.len() != other.mean.len() {
            return f64::INFINITY;
        }
        let dm = (&self.mean - &other.mean).amax();
        let dc = (&self.cov - &other.cov).amax();
        dm.max(dc)
    }

    /// Relabels modes: mode `k` of the result is mode `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<GaussianState> {
        if perm.len() != self.n_modes() {
            return Err(Error::WrongLength { expected: self.n_modes(), got: perm.len() });
        }
        self.marginal(perm)
    }
}
