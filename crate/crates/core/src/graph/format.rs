//! Plain-text graph exchange format.
//!
//! ```text
//! # four-mode wire
//! node 1 5.0
//! node 2 5.0
//! node 3
//! edge 1 2
//! edge 2 3 -
//! ```
//!
//! `node <id> [dB]` declares a node with optional squeezing; `edge <a> <b>
//! [+|-]` adds an edge, sign `+` when omitted. `#` starts a comment.

use std::fmt::Write as _;

use super::{ClusterGraph, Node, Sign};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GraphSpec {
    pub graph: ClusterGraph,
    /// Squeezing per node in graph order; `None` where the file left it out.
    pub squeezing_db: Vec<Option<f64>>,
}

impl GraphSpec {
    /// Per-node squeezing with `default` filled into unspecified nodes.
    pub fn squeezing_or(&self, default: f64) -> Vec<f64> {
        self.squeezing_db.iter().map(|d| d.unwrap_or(default)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (node, db) in self.graph.nodes().iter().zip(&self.squeezing_db) {
            match db {
                Some(db) => writeln!(out, "node {node} {db}"),
                None => writeln!(out, "node {node}"),
            }
            .expect("write to string");
        }
        for (a, b, s) in self.graph.edges() {
            let c = if s == Sign::Plus { '+' } else { '-' };
            writeln!(out, "edge {a} {b} {c}").expect("write to string");
        }
        out
    }
}

fn parse_node(tok: &str, line: usize) -> Result<Node> {
    tok.parse().map_err(|_| Error::Parse { line, message: format!("bad node id `{tok}`") })
}

pub fn parse_graph_spec(text: &str) -> Result<GraphSpec> {
    let mut graph = ClusterGraph::new([])?;
    let mut squeezing = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        let parse_err = |message: String| Error::Parse { line, message };
        match toks.as_slice() {
            ["node", id, rest @ ..] => {
                let node = parse_node(id, line)?;
                let db = match rest {
                    [] => None,
                    [db] => Some(
                        db.parse::<f64>().map_err(|_| parse_err(format!("bad squeezing `{db}`")))?,
                    ),
                    _ => return Err(parse_err("node takes an id and an optional dB".into())),
                };
                graph.add_node(node).map_err(|e| parse_err(e.to_string()))?;
                squeezing.push(db);
            }
            ["edge", a, b, rest @ ..] => {
                let sign = match rest {
                    [] | ["+"] => Sign::Plus,
                    ["-"] => Sign::Minus,
                    _ => return Err(parse_err("edge sign must be `+` or `-`".into())),
                };
                let (a, b) = (parse_node(a, line)?, parse_node(b, line)?);
                graph.add_edge(a, b, sign).map_err(|e| parse_err(e.to_string()))?;
            }
            _ => return Err(parse_err(format!("unrecognised line `{content}`"))),
        }
    }
    if graph.is_empty() {
        return Err(Error::Parse { line: 0, message: "graph declares no nodes".into() });
    }
    Ok(GraphSpec { graph, squeezing_db: squeezing })
}
