//! Cluster graphs, their nullifiers, and the two ways of building the state:
//! QND gates on squeezed inputs, or squeezers followed by a passive network.

mod canonical;
mod compile;
mod format;
mod nullifier;
mod preset;

pub use canonical::{build_canonical, canonical_entangler, canonical_symplectic, squeezed_inputs};
pub use compile::{
    bloch_messiah, compile_network, decompose_interferometer, BlochMessiah, NetworkPlan,
    OpticalElement, PlanProvenance, SqueezerSetting,
};
pub use format::{parse_graph_spec, GraphSpec};
pub use nullifier::{nullifiers_of, Nullifier, NullifierTerm};
pub use preset::{graph_of_rotated_cluster, preset_paper_network, wire_to_ring_phases};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node label. Labels are arbitrary; mode index = position in [`ClusterGraph::nodes`].
pub type Node = usize;

/// Sign carried by an edge; a nullifier reads `p_i − Σ sign(ij)·x_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn from_value(v: f64) -> Option<Sign> {
        if v == 1.0 {
            Some(Sign::Plus)
        } else if v == -1.0 {
            Some(Sign::Minus)
        } else {
            None
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;

    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

fn edge_key(a: Node, b: Node) -> (Node, Node) {
    (a.min(b), a.max(b))
}

/// Undirected graph with signed edges and an ordered node list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterGraph {
    nodes: Vec<Node>,
    adjacency: BTreeMap<Node, BTreeSet<Node>>,
    signs: BTreeMap<(Node, Node), Sign>,
}

impl ClusterGraph {
    pub fn new(nodes: impl IntoIterator<Item = Node>) -> Result<Self> {
        let mut g =
            Self { nodes: Vec::new(), adjacency: BTreeMap::new(), signs: BTreeMap::new() };
        for n in nodes {
            g.add_node(n)?;
        }
        Ok(g)
    }

    /// Path `1 – 2 – … – n` with unit signs.
    pub fn linear(n: usize) -> Self {
        let mut g = Self::new(1..=n).expect("distinct labels");
        for k in 1..n {
            g.add_edge(k, k + 1, Sign::Plus).expect("valid edge");
        }
        g
    }

    /// The four-mode linear wire the shaping experiments start from.
    pub fn wire4() -> Self {
        Self::linear(4)
    }

    pub fn add_node(&mut self, node: Node) -> Result<()> {
        if self.adjacency.contains_key(&node) {
            return Err(Error::DuplicateNode(node));
        }
        self.nodes.push(node);
        self.adjacency.insert(node, BTreeSet::new());
        Ok(())
    }

    pub fn add_edge(&mut self, a: Node, b: Node, sign: Sign) -> Result<()> {
        if a == b {
            return Err(Error::SelfLoop(a));
        }
        for n in [a, b] {
            if !self.contains(n) {
                return Err(Error::UnknownNode(n));
            }
        }
        self.adjacency.get_mut(&a).expect("checked").insert(b);
        self.adjacency.get_mut(&b).expect("checked").insert(a);
        self.signs.insert(edge_key(a, b), sign);
        Ok(())
    }

    pub fn remove_edge(&mut self, a: Node, b: Node) {
        if let Some(s) = self.adjacency.get_mut(&a) {
            s.remove(&b);
        }
        if let Some(s) = self.adjacency.get_mut(&b) {
            s.remove(&a);
        }
        self.signs.remove(&edge_key(a, b));
    }

    /// Drops the node and all of its edges.
    pub fn remove_node(&mut self, node: Node) -> Result<()> {
        let nbrs = self.adjacency.remove(&node).ok_or(Error::UnknownNode(node))?;
        for nb in nbrs {
            self.adjacency.get_mut(&nb).expect("symmetric").remove(&node);
            self.signs.remove(&edge_key(node, nb));
        }
        self.nodes.retain(|&n| n != node);
        Ok(())
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, node: Node) -> bool {
        self.adjacency.contains_key(&node)
    }

    /// Mode index of `node` in any state laid out along this graph.
    pub fn index_of(&self, node: Node) -> Result<usize> {
        self.nodes.iter().position(|&n| n == node).ok_or(Error::UnknownNode(node))
    }

    pub fn neighbors(&self, node: Node) -> Result<&BTreeSet<Node>> {
        self.adjacency.get(&node).ok_or(Error::UnknownNode(node))
    }

    pub fn degree(&self, node: Node) -> usize {
        self.adjacency.get(&node).map_or(0, BTreeSet::len)
    }

    pub fn has_edge(&self, a: Node, b: Node) -> bool {
        self.signs.contains_key(&edge_key(a, b))
    }

    pub fn sign(&self, a: Node, b: Node) -> Option<Sign> {
        self.signs.get(&edge_key(a, b)).copied()
    }

    /// Edges as `(a, b, sign)` with `a < b`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (Node, Node, Sign)> + '_ {
        self.signs.iter().map(|(&(a, b), &s)| (a, b, s))
    }

    pub fn edge_count(&self) -> usize {
        self.signs.len()
    }

    /// Isolated nodes carry no entanglement; they are single-mode squeezed states.
    pub fn is_isolated(&self, node: Node) -> bool {
        self.degree(node) == 0
    }

    /// Signed adjacency matrix in node order.
    pub fn adjacency_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.len();
        let mut a = nalgebra::DMatrix::zeros(n, n);
        for (u, v, s) in self.edges() {
            let (i, j) = (self.index_of(u).unwrap(), self.index_of(v).unwrap());
            a[(i, j)] = s.value();
            a[(j, i)] = s.value();
        }
        a
    }

    /// Flips the sign of every edge touching `node` (local phase π on that mode).
    pub fn flip_signs_at(&mut self, node: Node) -> Result<()> {
        let nbrs: Vec<Node> = self.neighbors(node)?.iter().copied().collect();
        for nb in nbrs {
            let key = edge_key(node, nb);
            let s = self.signs[&key];
            self.signs.insert(key, s.flip());
        }
        Ok(())
    }
}

impl fmt::Display for ClusterGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "nodes {:?}; edges", self.nodes)?;
        for (a, b, s) in self.edges() {
            let c = if s == Sign::Plus { '+' } else { '-' };
            write!(f, " {a}{c}{b}")?;
        }
        Ok(())
    }
}
