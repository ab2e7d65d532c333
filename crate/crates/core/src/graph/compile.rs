//! Bloch–Messiah compilation of a cluster symplectic into single-mode
//! squeezers followed by a beam-splitter/phase-shifter network.

use std::cmp::Ordering;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::canonical::canonical_symplectic;
use super::ClusterGraph;
use crate::error::{Error, Result};
use crate::gaussian::{symplectic_form, GaussianState, Quadrature, SymplecticTransform};

/// Singular values closer than this (relative) to 1 are treated as unsqueezed.
const UNIT_TOL: f64 = 1e-9;
/// Check applied to the recovered passive factors.
const FACTOR_TOL: f64 = 1e-8;

type C64 = Complex<f64>;

/// `S = second · diag(d, 1/d) · first` with `first`, `second` orthogonal symplectic.
#[derive(Clone, Debug)]
pub struct BlochMessiah {
    pub first: SymplecticTransform,
    /// Stretch factors `d_k ≥ 1`, sorted descending.
    pub squeeze_factors: Vec<f64>,
    pub second: SymplecticTransform,
}

impl BlochMessiah {
    pub fn squeezer_matrix(&self) -> DMatrix<f64> {
        let d = &self.squeeze_factors;
        let diag = d.iter().copied().chain(d.iter().map(|x| 1.0 / x));
        DMatrix::from_diagonal(&DVector::from_iterator(2 * d.len(), diag))
    }

    pub fn recompose(&self) -> DMatrix<f64> {
        self.second.matrix() * self.squeezer_matrix() * self.first.matrix()
    }

    /// Max-abs entry of `second · D · first − S`.
    pub fn recomposition_error(&self, target: &SymplecticTransform) -> f64 {
        (self.recompose() - target.matrix()).amax()
    }

    /// Squeezing of each stage in dB (variance reduction of the squeezed quadrature).
    pub fn squeezing_db(&self) -> Vec<f64> {
        self.squeeze_factors.iter().map(|d| 20.0 * d.log10()).collect()
    }
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn sign_normalize(v: &mut DVector<f64>) {
    let mut best = 0;
    for k in 1..v.len() {
        if v[k].abs() > v[best].abs() + 1e-12 {
            best = k;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

fn lexicographic(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        if (x - y).abs() > 1e-12 {
            return x.partial_cmp(y).unwrap_or(Ordering::Equal);
        }
    }
    Ordering::Equal
}

/// Decomposes a symplectic matrix into passive · squeezers · passive.
///
/// The stretched left singular vectors form an isotropic orthonormal set
/// `c_k`; the unstretched subspace is completed with a symplectic
/// Gram–Schmidt pass. Then `second = [c | −J c]` and
/// `first = D⁻¹ · secondᵀ · S`.
pub fn bloch_messiah(s: &SymplecticTransform) -> Result<BlochMessiah> {
    let n = s.n_modes();
    let dim = 2 * n;
    let svd = s.matrix().clone().try_svd(true, false, 1e-15, 10_000).ok_or_else(|| {
        Error::Decomposition("singular value decomposition did not converge".into())
    })?;
    let u = svd.u.ok_or_else(|| Error::Decomposition("missing singular vectors".into()))?;
    let sv = svd.singular_values;

    let mut stretched: Vec<(f64, DVector<f64>)> = Vec::new();
    let mut unit: Vec<DVector<f64>> = Vec::new();
    let mut shrunk = 0usize;
    for k in 0..dim {
        let d = sv[k];
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::Decomposition(format!("degenerate singular value {d}")));
        }
        let col = u.column(k).into_owned();
        if d > 1.0 + UNIT_TOL {
            stretched.push((d, col));
        } else if d < 1.0 - UNIT_TOL {
            shrunk += 1;
        } else {
            unit.push(col);
        }
    }
    if stretched.len() != shrunk || unit.len() % 2 != 0 || stretched.len() + unit.len() / 2 != n {
        return Err(Error::Decomposition(format!(
            "singular values do not pair up ({} stretched, {} shrunk, {} unit)",
            stretched.len(),
            shrunk,
            unit.len()
        )));
    }

    for (_, v) in stretched.iter_mut() {
        sign_normalize(v);
    }
    stretched.sort_by(|(da, va), (db, vb)| {
        if (da - db).abs() <= UNIT_TOL * da.max(*db) {
            lexicographic(vb, va)
        } else {
            db.partial_cmp(da).unwrap_or(Ordering::Equal)
        }
    });

    let j = symplectic_form(n);
    let mut columns: Vec<DVector<f64>> = stretched.iter().map(|(_, v)| v.clone()).collect();
    let mut factors: Vec<f64> = stretched.iter().map(|(d, _)| *d).collect();

    // symplectic Gram–Schmidt on the unit-singular-value subspace
    let mut pool = unit;
    while columns.len() < n {
        let (best, _) = pool
            .iter()
            .enumerate()
            .map(|(k, v)| (k, v.norm()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
            .ok_or_else(|| Error::Decomposition("unit subspace exhausted".into()))?;
        let mut c = pool.swap_remove(best);
        let norm = c.norm();
        if norm < 1e-6 {
            return Err(Error::Decomposition("unit subspace is not J-invariant".into()));
        }
        c /= norm;
        sign_normalize(&mut c);
        let jc = &j * &c;
        for v in pool.iter_mut() {
            let a = c.dot(v);
            let b = jc.dot(v);
            *v -= &c * a + &jc * b;
        }
        columns.push(c);
        factors.push(1.0);
    }

    let mut second = DMatrix::zeros(dim, dim);
    for (k, c) in columns.iter().enumerate() {
        second.set_column(k, c);
        second.set_column(n + k, &(-(&j * c)));
    }
    let d_inv = DMatrix::from_diagonal(&DVector::from_iterator(
        dim,
        factors.iter().map(|d| 1.0 / d).chain(factors.iter().copied()),
    ));
    let first = d_inv * second.transpose() * s.matrix();

    let second = SymplecticTransform::from_matrix_unchecked(second);
    let first = SymplecticTransform::from_matrix_unchecked(first);
    for (name, f) in [("second", &second), ("first", &first)] {
        let orth = f.orthogonality_residual();
        let symp = f.symplectic_residual();
        if orth > FACTOR_TOL || symp > FACTOR_TOL {
            return Err(Error::Decomposition(format!(
                "{name} factor not passive (orthogonality {orth:e}, symplecticity {symp:e})"
            )));
        }
    }
    Ok(BlochMessiah { first, squeeze_factors: factors, second })
}

/// A passive element of a linear-optics network, addressed by mode index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpticalElement {
    BeamSplitter { i: usize, j: usize, reflectivity: f64 },
    PhaseShift { mode: usize, theta: f64 },
}

impl OpticalElement {
    pub fn transform(&self, n: usize) -> Result<SymplecticTransform> {
        match *self {
            OpticalElement::BeamSplitter { i, j, reflectivity } => {
                SymplecticTransform::beam_splitter(n, i, j, reflectivity)
            }
            OpticalElement::PhaseShift { mode, theta } => {
                SymplecticTransform::phase_shift(n, mode, theta)
            }
        }
    }
}

fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(std::f64::consts::TAU);
    if t > std::f64::consts::PI {
        t - std::f64::consts::TAU
    } else {
        t
    }
}

/// Complex unitary `X + iY` of a passive symplectic `[[X, −Y], [Y, X]]`.
fn passive_to_unitary(o: &DMatrix<f64>) -> DMatrix<C64> {
    let n = o.nrows() / 2;
    DMatrix::from_fn(n, n, |r, c| C64::new(o[(r, c)], o[(n + r, c)]))
}

/// Reck-style nulling of a passive symplectic into beam splitters and phase
/// shifts, returned in the order they act on the light.
pub fn decompose_interferometer(o: &SymplecticTransform) -> Result<Vec<OpticalElement>> {
    if o.orthogonality_residual() > FACTOR_TOL || o.symplectic_residual() > FACTOR_TOL {
        return Err(Error::Decomposition("interferometer must be orthogonal symplectic".into()));
    }
    let n = o.n_modes();
    let mut w = passive_to_unitary(o.matrix());
    // each nulling step is (p, reflectivity, alpha): G = B(r) · diag_p(e^{iα})
    let mut steps: Vec<(usize, usize, f64, f64)> = Vec::new();
    for c in 0..n {
        for q in ((c + 1)..n).rev() {
            let p = q - 1;
            let (a, b) = (w[(p, c)], w[(q, c)]);
            if b.norm() < 1e-15 {
                continue;
            }
            let (r, alpha) = if a.norm() < 1e-15 {
                (0.0, 0.0)
            } else {
                (a.norm_sqr() / (a.norm_sqr() + b.norm_sqr()), b.arg() - a.arg())
            };
            let (sr, tr) = (r.sqrt(), (1.0 - r).sqrt());
            let ph = C64::from_polar(1.0, alpha);
            for col in 0..n {
                let (x, y) = (w[(p, col)] * ph, w[(q, col)]);
                w[(p, col)] = x * sr + y * tr;
                w[(q, col)] = x * tr - y * sr;
            }
            steps.push((p, q, r, alpha));
        }
    }

    let mut elements = Vec::new();
    let push_phase = |elements: &mut Vec<OpticalElement>, mode: usize, theta: f64| {
        let theta = wrap_angle(theta);
        if theta.abs() > 1e-14 {
            elements.push(OpticalElement::PhaseShift { mode, theta });
        }
    };
    // U = G_1† ··· G_K† · Φ: phases act first, then G_K†, …, G_1†
    for k in 0..n {
        push_phase(&mut elements, k, -w[(k, k)].arg());
    }
    for &(p, q, r, alpha) in steps.iter().rev() {
        elements.push(OpticalElement::BeamSplitter { i: p, j: q, reflectivity: r });
        push_phase(&mut elements, p, alpha);
    }

    let rebuilt = network_transform(n, &elements)?;
    let err = (rebuilt.matrix() - o.matrix()).amax();
    if err > FACTOR_TOL {
        return Err(Error::Decomposition(format!("interferometer recomposition error {err:e}")));
    }
    Ok(elements)
}

fn network_transform(n: usize, elements: &[OpticalElement]) -> Result<SymplecticTransform> {
    elements
        .iter()
        .try_fold(SymplecticTransform::identity(n), |acc, e| acc.then(&e.transform(n)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezerSetting {
    pub db: f64,
    pub quadrature: Quadrature,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanProvenance {
    Canonical,
    Compiled,
    Preset,
}

/// Squeezed inputs followed by a passive interferometer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkPlan {
    pub squeezers: Vec<SqueezerSetting>,
    pub interferometer: Vec<OpticalElement>,
    pub provenance: PlanProvenance,
}

impl NetworkPlan {
    pub fn n_modes(&self) -> usize {
        self.squeezers.len()
    }

    /// Product of the squeezed input states, before the interferometer.
    pub fn inputs(&self) -> Result<GaussianState> {
        let states = self
            .squeezers
            .iter()
            .map(|s| GaussianState::squeezed_vacuum(s.db, s.quadrature))
            .collect::<Result<Vec<_>>>()?;
        GaussianState::product(&states)
    }

    pub fn interferometer_transform(&self) -> Result<SymplecticTransform> {
        network_transform(self.n_modes(), &self.interferometer)
    }

    pub fn prepare(&self) -> Result<GaussianState> {
        self.inputs()?.apply(&self.interferometer_transform()?)
    }

    pub fn is_passive(&self) -> Result<bool> {
        let n = self.n_modes();
        for e in &self.interferometer {
            if e.transform(n)?.orthogonality_residual() > 1e-12 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn beam_splitter_count(&self) -> usize {
        self.interferometer
            .iter()
            .filter(|e| matches!(e, OpticalElement::BeamSplitter { .. }))
            .count()
    }
}

/// Squeezers plus interferometer that prepare exactly the canonical cluster.
///
/// The canonical symplectic acts on vacuum, and passive optics leave vacuum
/// unchanged, so the first passive factor of the decomposition is dropped.
pub fn compile_network(graph: &ClusterGraph, db: &[f64]) -> Result<NetworkPlan> {
    let s = canonical_symplectic(graph, db)?;
    let bm = bloch_messiah(&s)?;
    let err = bm.recomposition_error(&s);
    if err > FACTOR_TOL {
        return Err(Error::Decomposition(format!("recomposition error {err:e}")));
    }
    let squeezers = bm
        .squeezing_db()
        .into_iter()
        .map(|db| SqueezerSetting { db: db.max(0.0), quadrature: Quadrature::P })
        .collect();
    Ok(NetworkPlan {
        squeezers,
        interferometer: decompose_interferometer(&bm.second)?,
        provenance: PlanProvenance::Compiled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_canonical, Sign};

    fn golden() -> f64 {
        (1.0 + 5f64.sqrt()) / 2.0
    }

    #[test]
    fn single_edge_entangler_stretches_by_golden_ratio() {
        // [[I, 0], [A, I]] with A = antidiag(1, 1)
        let cz = SymplecticTransform::qnd(2, 0, 1, 1.0).unwrap();
        let bm = bloch_messiah(&cz).unwrap();
        for d in &bm.squeeze_factors {
            assert!((d - golden()).abs() < 1e-9, "{d}");
        }
        assert!(bm.recomposition_error(&cz) < 1e-12);
    }

    #[test]
    fn edgeless_graph_compiles_to_bare_squeezers() {
        let g = ClusterGraph::new([1, 2, 3]).unwrap();
        let db = [7.0, 4.0, 2.0];
        let plan = compile_network(&g, &db).unwrap();
        for (s, w) in plan.squeezers.iter().zip(db) {
            assert!((s.db - w).abs() < 1e-9);
        }
        assert!(plan.interferometer.is_empty());

        // unsorted inputs come back sorted; the interferometer only permutes
        let db = [2.0, 7.0, 4.0];
        let plan = compile_network(&g, &db).unwrap();
        let got: Vec<f64> = plan.squeezers.iter().map(|s| s.db).collect();
        for (g, w) in got.iter().zip([7.0, 4.0, 2.0]) {
            assert!((g - w).abs() < 1e-9);
        }
        let state = plan.prepare().unwrap();
        assert!(state.max_abs_diff(&build_canonical(&g, &db).unwrap()) < 1e-12);
    }

    #[test]
    fn wire_plan_reproduces_canonical_state() {
        let g = ClusterGraph::wire4();
        let plan = compile_network(&g, &[5.0; 4]).unwrap();
        assert!(plan.is_passive().unwrap());
        let diff = plan.prepare().unwrap().max_abs_diff(&build_canonical(&g, &[5.0; 4]).unwrap());
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn factors_are_passive_and_pair_up() {
        let mut g = ClusterGraph::linear(5);
        g.add_edge(1, 5, Sign::Minus).unwrap();
        let s = canonical_symplectic(&g, &[1.0, 3.0, 0.0, 8.0, 5.0]).unwrap();
        let bm = bloch_messiah(&s).unwrap();
        assert!(bm.first.orthogonality_residual() < 1e-10);
        assert!(bm.second.orthogonality_residual() < 1e-10);
        assert!(bm.first.symplectic_residual() < 1e-10);
        assert!(bm.second.symplectic_residual() < 1e-10);
        let det = bm.squeezer_matrix().determinant();
        assert!((det - 1.0).abs() < 1e-10);
        assert!(bm.squeeze_factors.windows(2).all(|w| w[0] >= w[1] - 1e-12));
    }

    #[test]
    fn interferometer_rejects_active_input() {
        let sq = SymplecticTransform::squeezer(2, 0, 3.0, Quadrature::P).unwrap();
        assert!(decompose_interferometer(&sq).is_err());
    }

    #[test]
    fn interferometer_round_trip_on_random_network() {
        let n = 4;
        let elems = [
            OpticalElement::BeamSplitter { i: 0, j: 2, reflectivity: 0.3 },
            OpticalElement::PhaseShift { mode: 1, theta: 0.4 },
            OpticalElement::BeamSplitter { i: 1, j: 3, reflectivity: 0.55 },
            OpticalElement::PhaseShift { mode: 3, theta: -2.0 },
            OpticalElement::BeamSplitter { i: 0, j: 1, reflectivity: 0.9 },
        ];
        let o = network_transform(n, &elems).unwrap();
        let rebuilt = decompose_interferometer(&o).unwrap();
        let diff = (network_transform(n, &rebuilt).unwrap().matrix() - o.matrix()).amax();
        assert!(diff < 1e-12);
    }
}
