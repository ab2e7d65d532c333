//! Sufficient entanglement criteria on nullifier variances, plus squeezing
//! reports for modes left isolated by shaping.
//!
//! Each node `i` with at least one neighbour must satisfy
//! `Var(p_i − Σ s_ij x_j) < 1/2`; adjacent pairs must satisfy
//! `Var(n_i) + Var(n_j) < 1`. Both inequalities are strict.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, VACUUM_VARIANCE};
use crate::graph::{nullifiers_of, ClusterGraph, Node};

pub const NULLIFIER_BOUND: f64 = 0.5;
pub const PAIR_BOUND: f64 = 1.0;

pub const REFERENCE_CONVENTION: &str =
    "vacuum variance 1/4; nullifier dB relative to k/4 for a k-term form; residual squeezing dB relative to 1/4";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NullifierCheck {
    pub node: Node,
    pub form: String,
    pub terms: usize,
    pub variance: f64,
    pub bound: f64,
    pub pass: bool,
    pub db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairCheck {
    pub nodes: (Node, Node),
    pub sum_variance: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidualSqueezing {
    pub node: Node,
    pub squeezed_db: f64,
    pub antisqueezed_db: f64,
    /// Quadrature angle θ of `x cosθ + p sinθ` with the smallest variance, in `[0, π)`.
    pub angle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriteriaReport {
    pub nullifiers: Vec<NullifierCheck>,
    pub pairwise: Vec<PairCheck>,
    pub residual_squeezing: Vec<ResidualSqueezing>,
    pub reference_convention: String,
}

impl CriteriaReport {
    pub fn all_pass(&self) -> bool {
        self.nullifiers.iter().all(|c| c.pass) && self.pairwise.iter().all(|c| c.pass)
    }

    /// Every pair whose members pass individually also passes jointly.
    pub fn is_consistent(&self) -> bool {
        let pass_of = |n: Node| self.nullifiers.iter().find(|c| c.node == n).map(|c| c.pass);
        self.pairwise
            .iter()
            .all(|p| !(pass_of(p.nodes.0) == Some(true) && pass_of(p.nodes.1) == Some(true)) || p.pass)
    }

    pub fn variance_of(&self, form: &str) -> Option<f64> {
        self.nullifiers.iter().find(|c| c.form == form).map(|c| c.variance)
    }
}

/// `10·log10(variance / (k/4))` for a `k`-term form.
pub fn nullifier_db(variance: f64, terms: usize) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::NonPositiveVariance(variance));
    }
    Ok(10.0 * (variance / (terms as f64 * VACUUM_VARIANCE)).log10())
}

/// Squeezed and anti-squeezed variances of one mode in dB relative to vacuum.
pub fn residual_squeezing_db(state: &GaussianState, mode: usize) -> Result<(f64, f64, f64)> {
    let m = state.marginal(&[mode])?;
    let c = m.cov();
    let (a, b, off) = (c[(0, 0)], c[(1, 1)], c[(0, 1)]);
    let half_diff = 0.5 * (a - b);
    let radius = half_diff.hypot(off);
    let centre = 0.5 * (a + b);
    let (lo, hi) = (centre - radius, centre + radius);
    let angle = if radius < 1e-12 {
        0.0
    } else {
        // major axis at ½·atan2(2c, a − b); the squeezed axis is a quarter turn away
        (0.5 * off.atan2(half_diff) + 0.5 * PI).rem_euclid(PI)
    };
    if !(lo > 0.0) {
        return Err(Error::NonPositiveVariance(lo));
    }
    let db = |v: f64| 10.0 * (v / VACUUM_VARIANCE).log10();
    Ok((db(lo), db(hi), angle))
}

/// Evaluates both criteria on `state` laid out along `graph`.
///
/// Isolated nodes carry no entanglement claim; they appear only under
/// `residual_squeezing`.
pub fn check_cluster_criteria(state: &GaussianState, graph: &ClusterGraph) -> Result<CriteriaReport> {
    if state.n_modes() != graph.len() {
        return Err(Error::DimensionMismatch { expected: graph.len(), got: state.n_modes() });
    }
    let mut nullifiers = Vec::new();
    let mut residual_squeezing = Vec::new();
    for nul in nullifiers_of(graph) {
        let node = nul.anchor;
        if graph.is_isolated(node) {
            let (squeezed_db, antisqueezed_db, angle) =
                residual_squeezing_db(state, graph.index_of(node)?)?;
            residual_squeezing.push(ResidualSqueezing { node, squeezed_db, antisqueezed_db, angle });
            continue;
        }
        let variance = nul.variance(state, graph)?;
        nullifiers.push(NullifierCheck {
            node,
            form: nul.to_string(),
            terms: nul.term_count(),
            variance,
            bound: NULLIFIER_BOUND,
            pass: variance < NULLIFIER_BOUND,
            db: nullifier_db(variance, nul.term_count())?,
        });
    }
    let var_of = |n: Node| nullifiers.iter().find(|c: &&NullifierCheck| c.node == n).map(|c| c.variance);
    let pairwise = graph
        .edges()
        .map(|(a, b, _)| {
            let sum_variance = var_of(a).expect("non-isolated") + var_of(b).expect("non-isolated");
            PairCheck { nodes: (a, b), sum_variance, bound: PAIR_BOUND, pass: sum_variance < PAIR_BOUND }
        })
        .collect();
    Ok(CriteriaReport {
        nullifiers,
        pairwise,
        residual_squeezing,
        reference_convention: REFERENCE_CONVENTION.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::Quadrature;
    use crate::graph::build_canonical;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn vacuum_wire_fails_everywhere() {
        let g = ClusterGraph::wire4();
        let r = check_cluster_criteria(&GaussianState::vacuum(4).unwrap(), &g).unwrap();
        let v: Vec<f64> = r.nullifiers.iter().map(|c| c.variance).collect();
        assert_eq!(v, [0.5, 0.75, 0.75, 0.5]);
        assert!(r.nullifiers.iter().all(|c| !c.pass));
        assert!(!r.all_pass());
        assert_eq!(r.pairwise.len(), 3);
        assert_eq!(r.nullifiers[0].db, 0.0);
    }

    #[test]
    fn squeezed_wire_passes() {
        let g = ClusterGraph::wire4();
        let r = check_cluster_criteria(&build_canonical(&g, &[5.0; 4]).unwrap(), &g).unwrap();
        assert!(r.all_pass() && r.is_consistent());
        for c in &r.nullifiers {
            assert!((c.variance - 0.079_056_9).abs() < 1e-7);
        }
        assert_eq!(r.pairwise[0].nodes, (1, 2));
        assert!((r.pairwise[0].sum_variance - 2.0 * r.nullifiers[0].variance).abs() < 1e-15);
    }

    #[test]
    fn db_conventions() {
        assert_eq!(nullifier_db(0.5, 2).unwrap(), 0.0);
        assert!((nullifier_db(0.25, 2).unwrap() + 3.0103).abs() < 1e-4);
        assert!((nullifier_db(0.158_114, 2).unwrap() + 5.0).abs() < 1e-5);
        assert!(matches!(nullifier_db(0.0, 2), Err(Error::NonPositiveVariance(_))));
    }

    #[test]
    fn squeezing_ellipse() {
        let (lo, hi, th) = residual_squeezing_db(&GaussianState::vacuum(1).unwrap(), 0).unwrap();
        assert_eq!((lo, hi, th), (0.0, 0.0, 0.0));
        let s = GaussianState::squeezed_vacuum(5.0, Quadrature::P).unwrap();
        let (lo, hi, th) = residual_squeezing_db(&s, 0).unwrap();
        assert!((lo + 5.0).abs() < 1e-12 && (hi - 5.0).abs() < 1e-12);
        assert!((th - FRAC_PI_2).abs() < 1e-12);
        let s = GaussianState::squeezed_vacuum(5.0, Quadrature::X).unwrap();
        assert!(residual_squeezing_db(&s, 0).unwrap().2.abs() < 1e-12);
    }

    #[test]
    fn isolated_nodes_are_reported_not_judged() {
        let mut g = ClusterGraph::linear(2);
        g.add_node(7).unwrap();
        let s = build_canonical(&g, &[5.0; 3]).unwrap();
        let r = check_cluster_criteria(&s, &g).unwrap();
        assert_eq!(r.nullifiers.len(), 2);
        assert_eq!(r.residual_squeezing.len(), 1);
        assert_eq!(r.residual_squeezing[0].node, 7);
        assert!((r.residual_squeezing[0].squeezed_db + 5.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_fails() {
        // two-mode vacuum-level pair sits at exactly 1/2
        let g = ClusterGraph::linear(2);
        let r = check_cluster_criteria(&GaussianState::vacuum(2).unwrap(), &g).unwrap();
        assert!(r.nullifiers.iter().all(|c| c.variance == 0.5 && !c.pass));
        assert!(!r.pairwise[0].pass);
    }
}
