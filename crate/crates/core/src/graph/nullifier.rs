use std::fmt;

use super::{ClusterGraph, Node};
use crate::error::Result;
use crate::gaussian::{GaussianState, LinearForm, Quadrature};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NullifierTerm {
    pub node: Node,
    pub quadrature: Quadrature,
    pub coeff: f64,
}

/// Linear quadrature form anchored at a node, e.g. `p_2 − x_1 − x_3`.
#[derive(Clone, Debug, PartialEq)]
pub struct Nullifier {
    pub anchor: Node,
    pub terms: Vec<NullifierTerm>,
}

impl Nullifier {
    /// `p_anchor − Σ_j sign_j · x_j`.
    pub fn graph_form(anchor: Node, neighbors: impl IntoIterator<Item = (Node, f64)>) -> Self {
        let mut terms = vec![NullifierTerm { node: anchor, quadrature: Quadrature::P, coeff: 1.0 }];
        terms.extend(neighbors.into_iter().map(|(node, sign)| NullifierTerm {
            node,
            quadrature: Quadrature::X,
            coeff: -sign,
        }));
        Self { anchor, terms }
    }

    /// Resolves node labels to mode indices of `graph`.
    pub fn to_form(&self, graph: &ClusterGraph) -> Result<LinearForm> {
        let mut form = LinearForm::new();
        for t in &self.terms {
            form = form.with(graph.index_of(t.node)?, t.quadrature, t.coeff);
        }
        Ok(form)
    }

    pub fn variance(&self, state: &GaussianState, graph: &ClusterGraph) -> Result<f64> {
        state.quadrature_variance(&self.to_form(graph)?)
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Exactly one `p` term with coefficient +1 and every other term an `x` with ±1.
    pub fn has_graph_structure(&self) -> bool {
        let p_terms: Vec<_> = self.terms.iter().filter(|t| t.quadrature == Quadrature::P).collect();
        p_terms.len() == 1
            && p_terms[0].coeff == 1.0
            && p_terms[0].node == self.anchor
            && self
                .terms
                .iter()
                .filter(|t| t.quadrature == Quadrature::X)
                .all(|t| t.coeff.abs() == 1.0)
    }
}

impl fmt::Display for Nullifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, t) in self.terms.iter().enumerate() {
            let mag = t.coeff.abs();
            let sym = t.quadrature.symbol();
            let body =
                if mag == 1.0 { format!("{sym}{}", t.node) } else { format!("{mag}*{sym}{}", t.node) };
            match (k, t.coeff < 0.0) {
                (0, false) => write!(f, "{body}")?,
                (0, true) => write!(f, "-{body}")?,
                (_, false) => write!(f, " + {body}")?,
                (_, true) => write!(f, " - {body}")?,
            }
        }
        Ok(())
    }
}

/// One nullifier per node, in node order: `p_i − Σ_{j∈N_i} sign(ij)·x_j`.
pub fn nullifiers_of(graph: &ClusterGraph) -> Vec<Nullifier> {
    graph
        .nodes()
        .iter()
        .map(|&i| {
            let nbrs = graph.neighbors(i).expect("node of graph");
            Nullifier::graph_form(
                i,
                nbrs.iter().map(|&j| (j, graph.sign(i, j).expect("edge exists").value())),
            )
        })
        .collect()
}
