//! Gaussian phase-space representation of N optical modes.
//!
//! Quadratures follow `a = x + i p` with `[x_j, p_k] = i δ_jk / 2`, so the
//! vacuum variance of every quadrature is 1/4 (one shot-noise unit). Vectors
//! and matrices use the `xxpp` ordering `(x_1, .., x_N, p_1, .., p_N)`.

mod loss;
mod state;
mod transform;

pub use loss::{LossModel, LossStage, StageEfficiency};
pub use state::GaussianState;
pub use transform::SymplecticTransform;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variance of a single vacuum quadrature.
pub const VACUUM_VARIANCE: f64 = 0.25;

/// Lower bound on the smallest eigenvalue of `V + (i/4) J` accepted as physical.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// Tolerance on `‖SᵀJS − J‖_F` for a matrix to count as symplectic.
pub const SYMPLECTIC_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    X,
    P,
}

impl Quadrature {
    /// Homodyne angle selecting this quadrature (`x cosθ + p sinθ`).
    pub fn angle(self) -> f64 {
        match self {
            Quadrature::X => 0.0,
            Quadrature::P => std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Quadrature::X => 'x',
            Quadrature::P => 'p',
        }
    }
}

/// Fixed ordering and scale conventions shared by every module.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QuadratureConvention;

impl QuadratureConvention {
    pub const HBAR: f64 = 0.5;
    pub const VACUUM_VARIANCE: f64 = VACUUM_VARIANCE;

    /// Row of quadrature `q` of mode `mode` in an `xxpp` vector over `n` modes.
    pub fn index(n: usize, mode: usize, q: Quadrature) -> usize {
        match q {
            Quadrature::X => mode,
            Quadrature::P => n + mode,
        }
    }

    /// Symplectic form for `n` modes: `J = [[0, I], [-I, 0]]`.
    pub fn symplectic_form(n: usize) -> DMatrix<f64> {
        symplectic_form(n)
    }
}

pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(k, n + k)] = 1.0;
        j[(n + k, k)] = -1.0;
    }
    j
}

/// Variance of a quadrature squeezed by `db` decibels below shot noise.
pub fn squeezed_variance(db: f64) -> f64 {
    VACUUM_VARIANCE * 10f64.powf(-db / 10.0)
}

/// One term `coeff · q_mode` of a [`LinearForm`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FormTerm {
    pub mode: usize,
    pub quadrature: Quadrature,
    pub coeff: f64,
}

/// Real linear combination of quadratures, addressed by mode index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearForm {
    pub terms: Vec<FormTerm>,
}

impl LinearForm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, mode: usize, quadrature: Quadrature, coeff: f64) -> Self {
        self.terms.push(FormTerm { mode, quadrature, coeff });
        self
    }

    pub fn x(self, mode: usize, coeff: f64) -> Self {
        self.with(mode, Quadrature::X, coeff)
    }

    pub fn p(self, mode: usize, coeff: f64) -> Self {
        self.with(mode, Quadrature::P, coeff)
    }

    /// Coefficient vector in `xxpp` order. Repeated terms accumulate.
    pub fn coefficients(&self, n_modes: usize) -> Result<DVector<f64>> {
        let mut c = DVector::zeros(2 * n_modes);
        for t in &self.terms {
            if t.mode >= n_modes {
                return Err(Error::ModeOutOfRange { index: t.mode, n_modes });
            }
            c[QuadratureConvention::index(n_modes, t.mode, t.quadrature)] += t.coeff;
        }
        Ok(c)
    }

    /// Number of terms, which is also the number of shot-noise units the
    /// form carries on vacuum when every coefficient is ±1.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}
