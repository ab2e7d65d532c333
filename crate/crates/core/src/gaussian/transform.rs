use nalgebra::{DMatrix, DVector};

use super::{symplectic_form, Quadrature, QuadratureConvention, SYMPLECTIC_TOL};
use crate::error::{Error, Result};

/// Affine phase-space map `r ↦ S·r + d` with `S` symplectic.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticTransform {
    matrix: DMatrix<f64>,
    shift: DVector<f64>,
}

fn check_range(n: usize, mode: usize) -> Result<()> {
    if mode >= n {
        return Err(Error::ModeOutOfRange { index: mode, n_modes: n });
    }
    Ok(())
}

fn check_pair(n: usize, i: usize, j: usize) -> Result<()> {
    check_range(n, i)?;
    check_range(n, j)?;
    if i == j {
        return Err(Error::SameMode(i));
    }
    Ok(())
}

impl SymplecticTransform {
    pub fn identity(n: usize) -> Self {
        Self { matrix: DMatrix::identity(2 * n, 2 * n), shift: DVector::zeros(2 * n) }
    }

    /// Wraps a matrix and shift, rejecting non-symplectic matrices.
    pub fn new(matrix: DMatrix<f64>, shift: DVector<f64>) -> Result<Self> {
        let dim = matrix.nrows();
        if matrix.ncols() != dim || dim % 2 != 0 {
            return Err(Error::DimensionMismatch { expected: dim, got: matrix.ncols() });
        }
        if shift.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: shift.len() });
        }
        let t = Self { matrix, shift };
        let residual = t.symplectic_residual();
        if residual > SYMPLECTIC_TOL {
            return Err(Error::Decomposition(format!(
                "matrix is not symplectic (residual {residual:e})"
            )));
        }
        Ok(t)
    }

    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<f64>) -> Self {
        let dim = matrix.nrows();
        Self { matrix, shift: DVector::zeros(dim) }
    }

    /// Controlled-phase (QND) coupling `exp(2i g x_i x_j)`:
    /// `p_i ← p_i + g·x_j`, `p_j ← p_j + g·x_i`.
    pub fn qnd(n: usize, i: usize, j: usize, gain: f64) -> Result<Self> {
        check_pair(n, i, j)?;
        let mut t = Self::identity(n);
        t.matrix[(n + i, j)] = gain;
        t.matrix[(n + j, i)] = gain;
        Ok(t)
    }

    /// Real beam splitter with power reflectivity `r`, acting on x and p alike:
    /// `[[√r, √(1−r)], [√(1−r), −√r]]`. It is its own inverse.
    pub fn beam_splitter(n: usize, i: usize, j: usize, reflectivity: f64) -> Result<Self> {
        check_pair(n, i, j)?;
        if !(0.0..=1.0).contains(&reflectivity) {
            return Err(Error::InvalidReflectivity(reflectivity));
        }
        let a = reflectivity.sqrt();
        let b = (1.0 - reflectivity).sqrt();
        let mut t = Self::identity(n);
        for off in [0, n] {
            let (ii, jj) = (off + i, off + j);
            t.matrix[(ii, ii)] = a;
            t.matrix[(ii, jj)] = b;
            t.matrix[(jj, ii)] = b;
            t.matrix[(jj, jj)] = -a;
        }
        Ok(t)
    }

    /// Rotation of mode `i` by `theta`: `x ← x cosθ + p sinθ`, `p ← −x sinθ + p cosθ`.
    /// In terms of the mode operator this is `a ← e^{−iθ} a`.
    pub fn phase_shift(n: usize, i: usize, theta: f64) -> Result<Self> {
        check_range(n, i)?;
        let (s, c) = theta.sin_cos();
        let mut t = Self::identity(n);
        t.matrix[(i, i)] = c;
        t.matrix[(i, n + i)] = s;
        t.matrix[(n + i, i)] = -s;
        t.matrix[(n + i, n + i)] = c;
        Ok(t)
    }

    /// Phase-space displacement adding `s` to one quadrature of one mode.
    pub fn displacement(n: usize, mode: usize, q: Quadrature, s: f64) -> Result<Self> {
        check_range(n, mode)?;
        let mut t = Self::identity(n);
        t.shift[QuadratureConvention::index(n, mode, q)] = s;
        Ok(t)
    }

    /// Single-mode squeezer reducing the variance of `q` on `mode` by `db` decibels.
    pub fn squeezer(n: usize, mode: usize, db: f64, q: Quadrature) -> Result<Self> {
        check_range(n, mode)?;
        if !db.is_finite() {
            return Err(Error::InvalidSqueezing(db));
        }
        let shrink = 10f64.powf(-db / 20.0);
        let (fx, fp) = match q {
            Quadrature::X => (shrink, 1.0 / shrink),
            Quadrature::P => (1.0 / shrink, shrink),
        };
        let mut t = Self::identity(n);
        t.matrix[(mode, mode)] = fx;
        t.matrix[(n + mode, n + mode)] = fp;
        Ok(t)
    }

    pub fn n_modes(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &SymplecticTransform) -> Result<SymplecticTransform> {
        if next.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: next.dim() });
        }
        Ok(Self {
            matrix: &next.matrix * &self.matrix,
            shift: &next.matrix * &self.shift + &next.shift,
        })
    }

    /// Exact inverse using `S⁻¹ = −J Sᵀ J`.
    pub fn inverse(&self) -> SymplecticTransform {
        let j = symplectic_form(self.n_modes());
        let inv = -(&j * self.matrix.transpose() * &j);
        let shift = -(&inv * &self.shift);
        Self { matrix: inv, shift }
    }

    /// Frobenius norm of `SᵀJS − J`.
    pub fn symplectic_residual(&self) -> f64 {
        let j = symplectic_form(self.n_modes());
        (self.matrix.transpose() * &j * &self.matrix - j).norm()
    }

    pub fn is_symplectic(&self) -> bool {
        self.symplectic_residual() <= SYMPLECTIC_TOL
    }

    /// Frobenius norm of `SᵀS − I`; zero for passive (energy-conserving) elements.
    pub fn orthogonality_residual(&self) -> f64 {
        let dim = self.dim();
        (self.matrix.transpose() * &self.matrix - DMatrix::identity(dim, dim)).norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::GaussianState;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn constructors_are_symplectic() {
        let n = 3;
        let ts = [
            SymplecticTransform::qnd(n, 0, 2, 1.3).unwrap(),
            SymplecticTransform::beam_splitter(n, 1, 2, 0.2).unwrap(),
            SymplecticTransform::phase_shift(n, 1, 0.7).unwrap(),
            SymplecticTransform::displacement(n, 2, Quadrature::P, 0.4).unwrap(),
            SymplecticTransform::squeezer(n, 0, 7.0, Quadrature::X).unwrap(),
        ];
        for t in &ts {
            assert!(t.symplectic_residual() < 1e-14, "{t:?}");
        }
    }

    #[test]
    fn zero_gain_qnd_is_identity() {
        assert_eq!(SymplecticTransform::qnd(2, 0, 1, 0.0).unwrap(), SymplecticTransform::identity(2));
    }

    #[test]
    fn qnd_rejects_same_mode() {
        assert!(matches!(SymplecticTransform::qnd(2, 1, 1, 1.0), Err(Error::SameMode(1))));
    }

    #[test]
    fn balanced_splitter_is_an_involution() {
        let b = SymplecticTransform::beam_splitter(2, 0, 1, 0.5).unwrap();
        let bb = b.then(&b).unwrap();
        assert!((bb.matrix() - DMatrix::<f64>::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn reflectivity_out_of_range_rejected() {
        assert!(matches!(
            SymplecticTransform::beam_splitter(2, 0, 1, 1.2),
            Err(Error::InvalidReflectivity(_))
        ));
    }

    #[test]
    fn quarter_turn_maps_x_to_p() {
        let state = GaussianState::vacuum(1)
            .unwrap()
            .displace(0, Quadrature::X, 1.0)
            .unwrap()
            .displace(0, Quadrature::P, 2.0)
            .unwrap();
        let r = SymplecticTransform::phase_shift(1, 0, FRAC_PI_2).unwrap();
        let out = state.apply(&r).unwrap();
        // x' = p, p' = -x
        assert!((out.mean()[0] - 2.0).abs() < 1e-15);
        assert!((out.mean()[1] + 1.0).abs() < 1e-15);
        assert!((out.cov() - state.cov()).amax() < 1e-16);
    }

    #[test]
    fn displacement_of_vacuum() {
        let d = SymplecticTransform::displacement(1, 0, Quadrature::P, 0.7).unwrap();
        let out = GaussianState::vacuum(1).unwrap().apply(&d).unwrap();
        assert_eq!(out.mean().as_slice(), &[0.0, 0.7]);
    }

    #[test]
    fn identity_apply_is_bitwise_noop() {
        let s = GaussianState::squeezed_vacuum(4.0, Quadrature::P).unwrap();
        assert_eq!(s.apply(&SymplecticTransform::identity(1)).unwrap(), s);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let s = GaussianState::vacuum(2).unwrap();
        assert!(matches!(
            s.apply(&SymplecticTransform::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn inverse_composes_to_identity() {
        let t = SymplecticTransform::qnd(3, 0, 1, 0.8)
            .unwrap()
            .then(&SymplecticTransform::squeezer(3, 2, 4.0, Quadrature::P).unwrap())
            .unwrap()
            .then(&SymplecticTransform::displacement(3, 1, Quadrature::X, 0.3).unwrap())
            .unwrap();
        let id = t.then(&t.inverse()).unwrap();
        assert!((id.matrix() - DMatrix::<f64>::identity(6, 6)).amax() < 1e-14);
        assert!(id.shift().amax() < 1e-14);
    }
}
