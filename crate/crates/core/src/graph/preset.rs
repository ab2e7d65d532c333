use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;

use super::compile::{NetworkPlan, OpticalElement, PlanProvenance, SqueezerSetting};
use super::{ClusterGraph, Node, Sign};
use crate::error::{Error, Result};
use crate::gaussian::{Quadrature, SymplecticTransform};

/// The four-mode linear cluster from three beam splitters (20:80, 50:50, 50:50).
///
/// Modes 1 and 2 start x-squeezed, modes 3 and 4 p-squeezed. The 20:80
/// splitter mixes modes 1 and 3, the two balanced splitters then act on
/// (1, 2) and (3, 4), and quarter-wave phases on modes 1 and 3 rotate the
/// result onto the wire nullifiers `p_i − Σ x_j`. With equal input
/// squeezing the nullifier covariance is `V_sq·(I + A²)`, so two-term forms
/// sit at `2·V_sq` and three-term forms at `3·V_sq`.
pub fn preset_paper_network(db: f64) -> Result<NetworkPlan> {
    if !(db >= 0.0 && db.is_finite()) {
        return Err(Error::InvalidSqueezing(db));
    }
    let q = [Quadrature::X, Quadrature::X, Quadrature::P, Quadrature::P];
    Ok(NetworkPlan {
        squeezers: q.iter().map(|&quadrature| SqueezerSetting { db, quadrature }).collect(),
        interferometer: vec![
            OpticalElement::BeamSplitter { i: 0, j: 2, reflectivity: 0.2 },
            OpticalElement::BeamSplitter { i: 0, j: 1, reflectivity: 0.5 },
            OpticalElement::BeamSplitter { i: 2, j: 3, reflectivity: 0.5 },
            OpticalElement::PhaseShift { mode: 0, theta: -FRAC_PI_2 },
            OpticalElement::PhaseShift { mode: 2, theta: FRAC_PI_2 },
        ],
        provenance: PlanProvenance::Preset,
    })
}

fn path_order(wire: &ClusterGraph) -> Option<[Node; 4]> {
    let nodes = wire.nodes();
    if nodes.len() != 4 || wire.edge_count() != 3 {
        return None;
    }
    let ordered = [nodes[0], nodes[1], nodes[2], nodes[3]];
    let is_path = ordered.windows(2).all(|w| wire.sign(w[0], w[1]) == Some(Sign::Plus));
    is_path.then_some(ordered)
}

/// Local phases turning the four-mode wire into a four-mode ring.
pub fn wire_to_ring_phases(wire: &ClusterGraph) -> Result<Vec<(Node, f64)>> {
    let [a, b, c, d] = path_order(wire).ok_or_else(|| Error::Precondition {
        node: wire.nodes().first().copied().unwrap_or_default(),
        reason: "expected a four-node linear wire with unit edge signs".into(),
    })?;
    Ok(vec![(a, PI), (b, -FRAC_PI_2), (c, FRAC_PI_2), (d, 0.0)])
}

/// Graph whose ideal nullifiers annihilate the cluster of `graph` after the
/// local `phases` (node, θ) have been applied.
///
/// The rotated nullifier rows `[−A | I]·R⁻¹` are brought back to the form
/// `[−A' | I]`; fails if the p-block is singular or `A'` is not a signed
/// adjacency matrix.
pub fn graph_of_rotated_cluster(graph: &ClusterGraph, phases: &[(Node, f64)]) -> Result<ClusterGraph> {
    let n = graph.len();
    let mut rot = SymplecticTransform::identity(n);
    for &(node, theta) in phases {
        rot = rot.then(&SymplecticTransform::phase_shift(n, graph.index_of(node)?, theta)?)?;
    }
    let a = graph.adjacency_matrix();
    let mut rows = DMatrix::zeros(n, 2 * n);
    rows.view_mut((0, 0), (n, n)).copy_from(&(-&a));
    rows.view_mut((0, n), (n, n)).copy_from(&DMatrix::identity(n, n));
    let m = rows * rot.inverse().matrix();
    let mx = m.columns(0, n).into_owned();
    let mp = m.columns(n, n).into_owned();
    let mp_inv = mp.try_inverse().ok_or_else(|| Error::Precondition {
        node: graph.nodes()[0],
        reason: "rotated cluster has no graph form (singular p-block)".into(),
    })?;
    let new_a = -(mp_inv * mx);

    let mut out = ClusterGraph::new(graph.nodes().iter().copied())?;
    for i in 0..n {
        for j in 0..n {
            let v = new_a[(i, j)];
            let bad = (v - new_a[(j, i)]).abs() > 1e-9
                || (i == j && v.abs() > 1e-9)
                || (v.abs() > 1e-9 && (v.abs() - 1.0).abs() > 1e-9);
            if bad {
                return Err(Error::Precondition {
                    node: graph.nodes()[i],
                    reason: format!("rotated cluster is not a unit-weight graph state (A'[{i}][{j}] = {v})"),
                });
            }
            if j > i && v.abs() > 0.5 {
                let sign = if v > 0.0 { Sign::Plus } else { Sign::Minus };
                out.add_edge(graph.nodes()[i], graph.nodes()[j], sign)?;
            }
        }
    }
    Ok(out)
}
