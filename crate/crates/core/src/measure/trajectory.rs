use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::homodyne::Conditioning;
use super::shaping::ShapingProtocol;
use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, VACUUM_VARIANCE};
use crate::graph::{ClusterGraph, Nullifier};

/// Everything a trajectory run needs.
#[derive(Clone, Debug)]
pub struct TrajectoryPlan {
    /// State entering the protocol, with all pre-shaping loss applied.
    pub state: GaussianState,
    pub protocol: ShapingProtocol,
    /// Detection efficiency per surviving mode, in output-graph order.
    pub detection: Vec<f64>,
    /// Forms to estimate, on the output graph.
    pub nullifiers: Vec<Nullifier>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NullifierStats {
    pub form: String,
    pub analytic_var: f64,
    pub sample_mean: f64,
    /// `None` for a single trial.
    pub sample_var: Option<f64>,
    pub stderr: Option<f64>,
}

impl NullifierStats {
    /// `(sample − analytic) / stderr`.
    pub fn z_score(&self) -> Option<f64> {
        match (self.sample_var, self.stderr) {
            (Some(v), Some(se)) if se > 0.0 => Some((v - self.analytic_var) / se),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovarianceStats {
    pub analytic: Vec<Vec<f64>>,
    pub sample: Option<Vec<Vec<f64>>>,
    pub stderr: Option<Vec<Vec<f64>>>,
}

impl CovarianceStats {
    /// Largest `|sample − analytic| / stderr` over all entries.
    pub fn max_z_score(&self) -> Option<f64> {
        let (s, e) = (self.sample.as_ref()?, self.stderr.as_ref()?);
        let mut worst: f64 = 0.0;
        for ((a_row, s_row), e_row) in self.analytic.iter().zip(s).zip(e) {
            for ((a, s), e) in a_row.iter().zip(s_row).zip(e_row) {
                if *e > 0.0 {
                    worst = worst.max((s - a).abs() / e);
                }
            }
        }
        Some(worst)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryStats {
    pub trials: usize,
    pub seed: u64,
    pub nullifiers: Vec<NullifierStats>,
    pub covariance: CovarianceStats,
}

struct StageKernel {
    measurements: Vec<Conditioning>,
    /// (mean index, coefficient, measurement index)
    feedforward: Vec<(usize, f64, usize)>,
}

struct Compiled {
    stages: Vec<StageKernel>,
    detection_scale: DVector<f64>,
    cholesky: DMatrix<f64>,
}

fn matrix_sqrt(cov: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = cov.clone().cholesky() {
        return ch.l();
    }
    // semidefinite fallback
    let eig = cov.clone().symmetric_eigen();
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d)
}

fn compile(plan: &TrajectoryPlan) -> Result<Compiled> {
    let mut cov = plan.state.cov().clone();
    let mut stages = Vec::new();
    for stage in &plan.protocol.stages {
        let mut remaining = stage.before.nodes().to_vec();
        let mut measurements = Vec::new();
        for m in &stage.measurements {
            let k = remaining.iter().position(|&x| x == m.node).ok_or(Error::UnknownNode(m.node))?;
            let c = Conditioning::new(&cov, k, m.quadrature.angle())?;
            cov = c.reduced_cov.clone();
            measurements.push(c);
            remaining.remove(k);
        }
        let n = remaining.len();
        let feedforward = stage
            .feedforward
            .iter()
            .map(|f| {
                let k = stage.after.index_of(f.target)?;
                Ok((crate::gaussian::QuadratureConvention::index(n, k, f.quadrature), f.coefficient(), f.source))
            })
            .collect::<Result<_>>()?;
        stages.push(StageKernel { measurements, feedforward });
    }
    let n = cov.nrows() / 2;
    if plan.detection.len() != n {
        return Err(Error::WrongLength { expected: n, got: plan.detection.len() });
    }
    let scale = DVector::from_iterator(2 * n, (0..2 * n).map(|r| plan.detection[r % n].sqrt()));
    let mut detected = DMatrix::from_diagonal(&scale) * cov * DMatrix::from_diagonal(&scale);
    for r in 0..2 * n {
        detected[(r, r)] += (1.0 - plan.detection[r % n]) * VACUUM_VARIANCE;
    }
    Ok(Compiled { stages, detection_scale: scale, cholesky: matrix_sqrt(&detected) })
}

fn sample_one(c: &Compiled, mean0: &DVector<f64>, rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let mut mean = mean0.clone();
    let mut values = Vec::new();
    for stage in &c.stages {
        values.clear();
        for k in &stage.measurements {
            let z: f64 = rng.sample(StandardNormal);
            let m = k.marginal_mean(&mean) + k.marginal_var.sqrt() * z;
            mean = k.conditional_mean(&mean, m);
            values.push(m);
        }
        for &(idx, coeff, src) in &stage.feedforward {
            mean[idx] += coeff * values[src];
        }
    }
    let dim = mean.len();
    let z = DVector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let r = mean.component_mul(&c.detection_scale) + &c.cholesky * z;
    out.copy_from_slice(r.as_slice());
}

/// Outcome-averaged state after the protocol and detection loss.
pub fn analytic_detected(plan: &TrajectoryPlan) -> Result<GaussianState> {
    let mut s = plan.protocol.ensemble(&plan.state)?;
    if plan.detection.len() != s.n_modes() {
        return Err(Error::WrongLength { expected: s.n_modes(), got: plan.detection.len() });
    }
    for (k, &eta) in plan.detection.iter().enumerate() {
        if eta < 1.0 {
            s = s.apply_loss(k, eta)?;
        }
    }
    Ok(s)
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Samples `trials` full trajectories: homodyne outcomes from their
/// conditional marginals, feedforward, detection loss, then a draw of the
/// surviving quadratures.
///
/// Trial `t` uses ChaCha8 seeded with `seed` on stream `t`, so results do
/// not depend on the number of threads.
pub fn run_trajectory(plan: &TrajectoryPlan, trials: usize, seed: u64) -> Result<TrajectoryStats> {
    if trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    let analytic = analytic_detected(plan)?;
    let graph: &ClusterGraph = plan.protocol.output_graph().ok_or(Error::NoModes)?;
    let compiled = compile(plan)?;
    let dim = 2 * analytic.n_modes();
    let mean0 = plan.state.mean().clone();

    let mut samples = vec![0.0; trials * dim];
    samples.par_chunks_mut(dim).enumerate().for_each(|(t, row)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        sample_one(&compiled, &mean0, &mut rng, row);
    });
    let rows = || samples.chunks(dim);
    let nf = trials as f64;

    let mut nullifiers = Vec::new();
    for nul in &plan.nullifiers {
        let c = nul.to_form(graph)?.coefficients(analytic.n_modes())?;
        let analytic_var = (c.transpose() * analytic.cov() * &c)[(0, 0)];
        let vals: Vec<f64> =
            rows().map(|r| r.iter().zip(c.iter()).map(|(a, b)| a * b).sum()).collect();
        let mean = vals.iter().sum::<f64>() / nf;
        let (sample_var, stderr) = if trials > 1 {
            let m2 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
            let m4 = vals.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
            let var = m2 / (nf - 1.0);
            let se2 = (m4 - var * var * (nf - 3.0) / (nf - 1.0)) / nf;
            (Some(var), Some(se2.max(0.0).sqrt()))
        } else {
            (None, None)
        };
        nullifiers.push(NullifierStats {
            form: nul.to_string(),
            analytic_var,
            sample_mean: mean,
            sample_var,
            stderr,
        });
    }

    let covariance = if trials > 1 {
        let mut mu = vec![0.0; dim];
        for r in rows() {
            for (m, x) in mu.iter_mut().zip(r) {
                *m += x / nf;
            }
        }
        let mut sample = DMatrix::zeros(dim, dim);
        let mut stderr = DMatrix::zeros(dim, dim);
        for a in 0..dim {
            for b in a..dim {
                let prods: Vec<f64> = rows().map(|r| (r[a] - mu[a]) * (r[b] - mu[b])).collect();
                let s = prods.iter().sum::<f64>();
                let pm = s / nf;
                let pv = prods.iter().map(|p| (p - pm).powi(2)).sum::<f64>() / (nf - 1.0);
                sample[(a, b)] = s / (nf - 1.0);
                sample[(b, a)] = sample[(a, b)];
                stderr[(a, b)] = (pv / nf).sqrt();
                stderr[(b, a)] = stderr[(a, b)];
            }
        }
        CovarianceStats {
            analytic: to_rows(analytic.cov()),
            sample: Some(to_rows(&sample)),
            stderr: Some(to_rows(&stderr)),
        }
    } else {
        CovarianceStats { analytic: to_rows(analytic.cov()), sample: None, stderr: None }
    };

    Ok(TrajectoryStats { trials, seed, nullifiers, covariance })
}
