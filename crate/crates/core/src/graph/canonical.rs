use super::ClusterGraph;
use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, Quadrature, SymplecticTransform};

fn check_db(graph: &ClusterGraph, db: &[f64]) -> Result<()> {
    if db.len() != graph.len() {
        return Err(Error::WrongLength { expected: graph.len(), got: db.len() });
    }
    if let Some(&bad) = db.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(Error::InvalidSqueezing(bad));
    }
    Ok(())
}

/// Product of one QND gate per edge, gain equal to the edge sign.
///
/// All the gates commute, so the order of edges does not matter.
pub fn canonical_entangler(graph: &ClusterGraph) -> SymplecticTransform {
    let n = graph.len();
    let mut t = SymplecticTransform::identity(n);
    for (a, b, s) in graph.edges() {
        let gate = SymplecticTransform::qnd(
            n,
            graph.index_of(a).expect("edge node"),
            graph.index_of(b).expect("edge node"),
            s.value(),
        )
        .expect("distinct in-range modes");
        t = t.then(&gate).expect("same dimension");
    }
    t
}

/// `S_CZ · S_sq`: p-squeezers by `db[k]` on each node, then the entangler.
pub fn canonical_symplectic(graph: &ClusterGraph, db: &[f64]) -> Result<SymplecticTransform> {
    check_db(graph, db)?;
    let n = graph.len();
    let mut t = SymplecticTransform::identity(n);
    for (k, &d) in db.iter().enumerate() {
        t = t.then(&SymplecticTransform::squeezer(n, k, d, Quadrature::P)?)?;
    }
    t.then(&canonical_entangler(graph))
}

/// Tensor product of p-squeezed vacua, one per node.
pub fn squeezed_inputs(db: &[f64]) -> Result<GaussianState> {
    let states = db
        .iter()
        .map(|&d| GaussianState::squeezed_vacuum(d, Quadrature::P))
        .collect::<Result<Vec<_>>>()?;
    GaussianState::product(&states)
}

/// Cluster state from p-squeezed vacua and QND gates along every edge.
pub fn build_canonical(graph: &ClusterGraph, db: &[f64]) -> Result<GaussianState> {
    check_db(graph, db)?;
    squeezed_inputs(db)?.apply(&canonical_entangler(graph))
}
