use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, Quadrature, QuadratureConvention};

/// Marginal variances below this make conditioning numerically meaningless.
pub const MARGINAL_VARIANCE_FLOOR: f64 = 1e-12;

/// Result of one homodyne detection.
///
/// `mode` is the measured mode index for raw state operations and the node
/// label in shaping transcripts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomodyneOutcome {
    pub mode: usize,
    pub angle: f64,
    pub value: f64,
    pub marginal_mean: f64,
    pub marginal_var: f64,
}

/// How the measured value is obtained.
pub enum Readout<'a> {
    Value(f64),
    Sample(&'a mut dyn rand::RngCore),
}

/// Selector `u` with `uᵀr = x cosθ + p sinθ` on one mode.
pub(crate) fn selector(n: usize, mode: usize, angle: f64) -> DVector<f64> {
    let mut u = DVector::zeros(2 * n);
    let (s, c) = angle.sin_cos();
    u[QuadratureConvention::index(n, mode, Quadrature::X)] = c;
    u[QuadratureConvention::index(n, mode, Quadrature::P)] = s;
    u
}

/// Rows of an `xxpp` vector that survive dropping `mode`.
pub(crate) fn kept_rows(n: usize, mode: usize) -> Vec<usize> {
    (0..n).filter(|&k| k != mode).chain((0..n).filter(|&k| k != mode).map(|k| n + k)).collect()
}

/// Outcome-independent part of a homodyne update: everything but the means.
#[derive(Clone, Debug)]
pub(crate) struct Conditioning {
    pub selector: DVector<f64>,
    pub kept: Vec<usize>,
    /// `V_Bu / σ²`, the regression of the kept quadratures on the outcome.
    pub gain: DVector<f64>,
    pub marginal_var: f64,
    pub reduced_cov: DMatrix<f64>,
}

impl Conditioning {
    pub fn new(cov: &DMatrix<f64>, mode: usize, angle: f64) -> Result<Self> {
        let n = cov.nrows() / 2;
        if mode >= n {
            return Err(Error::ModeOutOfRange { index: mode, n_modes: n });
        }
        if n < 2 {
            return Err(Error::NoModes);
        }
        let u = selector(n, mode, angle);
        let vu = cov * &u;
        let marginal_var = u.dot(&vu);
        if !(marginal_var >= MARGINAL_VARIANCE_FLOOR) {
            return Err(Error::SharpQuadrature(marginal_var));
        }
        let kept = kept_rows(n, mode);
        let v_bu = DVector::from_iterator(kept.len(), kept.iter().map(|&r| vu[r]));
        let v_bb = cov.select_rows(&kept).select_columns(&kept);
        let reduced_cov = v_bb - &v_bu * v_bu.transpose() / marginal_var;
        let reduced_cov = (&reduced_cov + reduced_cov.transpose()) * 0.5;
        Ok(Self { gain: v_bu / marginal_var, selector: u, kept, marginal_var, reduced_cov })
    }

    pub fn marginal_mean(&self, mean: &DVector<f64>) -> f64 {
        self.selector.dot(mean)
    }

    /// `μ_B + (V_Bu/σ²)(m − uᵀμ)`.
    pub fn conditional_mean(&self, mean: &DVector<f64>, value: f64) -> DVector<f64> {
        let shift = value - self.marginal_mean(mean);
        DVector::from_iterator(self.kept.len(), self.kept.iter().map(|&r| mean[r]))
            + &self.gain * shift
    }
}

/// Homodyne detection of `x cosθ + p sinθ` on `mode`, followed by discarding the mode.
///
/// The outcome's marginal is `N(uᵀμ, uᵀVu)`; the remaining modes are
/// updated by Gaussian conditioning. Their covariance does not depend on
/// the outcome.
pub fn homodyne(
    state: &GaussianState,
    mode: usize,
    angle: f64,
    readout: Readout<'_>,
) -> Result<(GaussianState, HomodyneOutcome)> {
    let cond = Conditioning::new(state.cov(), mode, angle)?;
    let marginal_mean = cond.marginal_mean(state.mean());
    let value = match readout {
        Readout::Value(v) => v,
        Readout::Sample(rng) => {
            let z: f64 = rng.sample(StandardNormal);
            marginal_mean + cond.marginal_var.sqrt() * z
        }
    };
    let mean = cond.conditional_mean(state.mean(), value);
    let outcome =
        HomodyneOutcome { mode, angle, value, marginal_mean, marginal_var: cond.marginal_var };
    Ok((GaussianState::from_parts_unchecked(mean, cond.reduced_cov), outcome))
}
