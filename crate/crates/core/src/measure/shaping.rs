use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;

use super::homodyne::{homodyne, kept_rows, selector, HomodyneOutcome, Readout};
use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, Quadrature, QuadratureConvention};
use crate::graph::{ClusterGraph, Node, Sign};

/// Feedforward gain that restores the ideal nullifiers.
pub const DEFAULT_GAIN: f64 = -1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Measurement {
    pub node: Node,
    pub quadrature: Quadrature,
}

/// Displacement `q_target += gain · sign · m_source`, `source` indexing the
/// measurements of the same stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FeedforwardStep {
    pub source: usize,
    pub target: Node,
    pub quadrature: Quadrature,
    pub sign: f64,
    pub gain: f64,
}

impl FeedforwardStep {
    pub fn coefficient(&self) -> f64 {
        self.gain * self.sign
    }
}

/// One round of measurements followed by feedforward onto the survivors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapingStage {
    pub label: String,
    pub measurements: Vec<Measurement>,
    pub feedforward: Vec<FeedforwardStep>,
    #[serde(skip)]
    pub before: ClusterGraph,
    #[serde(skip)]
    pub after: ClusterGraph,
}

impl ShapingStage {
    pub fn new(
        label: impl Into<String>,
        before: ClusterGraph,
        measurements: Vec<Measurement>,
        feedforward: Vec<FeedforwardStep>,
        after: ClusterGraph,
    ) -> Result<Self> {
        let mut survivors = before.clone();
        for m in &measurements {
            survivors.remove_node(m.node)?;
        }
        if survivors.nodes() != after.nodes() {
            return Err(Error::Precondition {
                node: measurements.first().map_or(0, |m| m.node),
                reason: "output graph must list the unmeasured nodes in their original order".into(),
            });
        }
        for f in &feedforward {
            if f.source >= measurements.len() {
                return Err(Error::DanglingOutcome { index: f.source, available: measurements.len() });
            }
            after.index_of(f.target)?;
        }
        Ok(Self { label: label.into(), measurements, feedforward, before, after })
    }

    /// Outcome-averaged map `r ↦ T r` on the quadrature vector.
    pub fn channel(&self) -> Result<DMatrix<f64>> {
        let n = self.before.len();
        let mut rows: Vec<usize> = (0..2 * n).collect();
        let mut remaining: Vec<Node> = self.before.nodes().to_vec();
        for m in &self.measurements {
            let k = remaining.iter().position(|&x| x == m.node).ok_or(Error::UnknownNode(m.node))?;
            let keep = kept_rows(remaining.len(), k);
            rows = keep.iter().map(|&r| rows[r]).collect();
            remaining.remove(k);
        }
        let out_n = remaining.len();
        let mut t = DMatrix::zeros(2 * out_n, 2 * n);
        for (r, &src) in rows.iter().enumerate() {
            t[(r, src)] = 1.0;
        }
        for f in &self.feedforward {
            let m = self.measurements[f.source];
            let u = selector(n, self.before.index_of(m.node)?, m.quadrature.angle());
            let row = QuadratureConvention::index(out_n, self.after.index_of(f.target)?, f.quadrature);
            for c in 0..2 * n {
                t[(row, c)] += f.coefficient() * u[c];
            }
        }
        Ok(t)
    }
}

/// Sequence of measurement-and-feedforward stages acting on a cluster.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapingProtocol {
    pub stages: Vec<ShapingStage>,
}

fn other_neighbor(graph: &ClusterGraph, node: Node, known: Node) -> Result<Node> {
    let nbrs = graph.neighbors(node)?;
    if nbrs.len() != 2 || !nbrs.contains(&known) {
        return Err(Error::Precondition {
            node,
            reason: format!("wire node must have exactly two neighbours including {known}"),
        });
    }
    Ok(*nbrs.iter().find(|&&x| x != known).expect("two neighbours"))
}

impl ShapingProtocol {
    /// `x`-measure `node`; each neighbour gets `p_i += gain · s_ij · x_node`.
    pub fn remove_node(graph: &ClusterGraph, node: Node, gain: f64) -> Result<Self> {
        let nbrs: Vec<Node> = graph.neighbors(node)?.iter().copied().collect();
        let feedforward = nbrs
            .iter()
            .map(|&i| FeedforwardStep {
                source: 0,
                target: i,
                quadrature: Quadrature::P,
                sign: graph.sign(i, node).expect("adjacent").value(),
                gain,
            })
            .collect();
        let mut after = graph.clone();
        after.remove_node(node)?;
        let stage = ShapingStage::new(
            format!("remove {node}"),
            graph.clone(),
            vec![Measurement { node, quadrature: Quadrature::X }],
            feedforward,
            after,
        )?;
        Ok(Self { stages: vec![stage] })
    }

    /// Shortens `e1 – a – b – e4` to a direct edge `e1 – e4` by measuring `p_a`, `p_b`.
    ///
    /// Feedforward is `p_e1 += gain·s(e1,a)·s(a,b)·p_b` and
    /// `p_e4 += gain·s(b,e4)·s(a,b)·p_a`; the new edge carries sign
    /// `−s(e1,a)·s(a,b)·s(b,e4)`.
    pub fn shorten_wire(graph: &ClusterGraph, a: Node, b: Node, gain: f64) -> Result<Self> {
        let s_ab = graph.sign(a, b).ok_or_else(|| Error::Precondition {
            node: a,
            reason: format!("{a} and {b} are not adjacent"),
        })?;
        let e1 = other_neighbor(graph, a, b)?;
        let e4 = other_neighbor(graph, b, a)?;
        if e1 == e4 {
            return Err(Error::Precondition { node: e1, reason: "wire closes into a triangle".into() });
        }
        if graph.has_edge(e1, e4) {
            return Err(Error::Precondition {
                node: e1,
                reason: format!("endpoints {e1} and {e4} are already adjacent"),
            });
        }
        let s_1a = graph.sign(e1, a).expect("adjacent");
        let s_b4 = graph.sign(b, e4).expect("adjacent");
        let mut after = graph.clone();
        after.remove_node(a)?;
        after.remove_node(b)?;
        after.add_edge(e1, e4, Sign::Minus * s_1a * s_ab * s_b4)?;
        let stage = ShapingStage::new(
            format!("shorten {e1}-{a}-{b}-{e4}"),
            graph.clone(),
            vec![
                Measurement { node: a, quadrature: Quadrature::P },
                Measurement { node: b, quadrature: Quadrature::P },
            ],
            vec![
                FeedforwardStep {
                    source: 1,
                    target: e1,
                    quadrature: Quadrature::P,
                    sign: (s_1a * s_ab).value(),
                    gain,
                },
                FeedforwardStep {
                    source: 0,
                    target: e4,
                    quadrature: Quadrature::P,
                    sign: (s_b4 * s_ab).value(),
                    gain,
                },
            ],
            after,
        )?;
        Ok(Self { stages: vec![stage] })
    }

    pub fn then(mut self, next: ShapingProtocol) -> Result<Self> {
        if let (Some(last), Some(first)) = (self.stages.last(), next.stages.first()) {
            if last.after != first.before {
                return Err(Error::Precondition {
                    node: first.before.nodes().first().copied().unwrap_or_default(),
                    reason: "next protocol starts from a different graph".into(),
                });
            }
        }
        self.stages.extend(next.stages);
        Ok(self)
    }

    pub fn input_graph(&self) -> Option<&ClusterGraph> {
        self.stages.first().map(|s| &s.before)
    }

    pub fn output_graph(&self) -> Option<&ClusterGraph> {
        self.stages.last().map(|s| &s.after)
    }

    /// Overrides the gain of every feedforward step onto `target`.
    pub fn set_gain(&mut self, target: Node, gain: f64) {
        for f in self.stages.iter_mut().flat_map(|s| s.feedforward.iter_mut()) {
            if f.target == target {
                f.gain = gain;
            }
        }
    }

    pub fn set_all_gains(&mut self, gain: f64) {
        for f in self.stages.iter_mut().flat_map(|s| s.feedforward.iter_mut()) {
            f.gain = gain;
        }
    }

    pub fn removed(&self) -> Vec<Node> {
        self.stages.iter().flat_map(|s| s.measurements.iter().map(|m| m.node)).collect()
    }

    pub fn measurement_count(&self) -> usize {
        self.stages.iter().map(|s| s.measurements.len()).sum()
    }

    /// Feedforward targets over all stages, deduplicated, in first-use order.
    pub fn feedforward_targets(&self) -> Vec<Node> {
        let mut out = Vec::new();
        for f in self.stages.iter().flat_map(|s| &s.feedforward) {
            if !out.contains(&f.target) {
                out.push(f.target);
            }
        }
        out
    }

    fn check_input(&self, state: &GaussianState) -> Result<()> {
        let g = self.input_graph().ok_or(Error::NoModes)?;
        if g.len() != state.n_modes() {
            return Err(Error::DimensionMismatch { expected: g.len(), got: state.n_modes() });
        }
        Ok(())
    }

    /// State averaged over all measurement outcomes: `(Tμ, TVTᵀ)` stage by stage.
    pub fn ensemble(&self, state: &GaussianState) -> Result<GaussianState> {
        self.check_input(state)?;
        let (mut mean, mut cov) = (state.mean().clone(), state.cov().clone());
        for stage in &self.stages {
            let t = stage.channel()?;
            mean = &t * mean;
            cov = &t * cov * t.transpose();
        }
        Ok(GaussianState::from_parts_unchecked(mean, cov))
    }

    /// Runs the protocol on one trajectory.
    pub fn execute(&self, state: &GaussianState, mut outcomes: Outcomes<'_>) -> Result<ShapingResult> {
        self.check_input(state)?;
        let mut current = state.clone();
        let mut record = Vec::new();
        let mut transcript = Vec::new();
        let mut forced_idx = 0;
        for stage in &self.stages {
            transcript.push(format!("stage {}", stage.label));
            let mut remaining: Vec<Node> = stage.before.nodes().to_vec();
            let first = record.len();
            for m in &stage.measurements {
                let k = remaining.iter().position(|&x| x == m.node).ok_or(Error::UnknownNode(m.node))?;
                let readout = match &mut outcomes {
                    Outcomes::MarginalMean => None,
                    Outcomes::Forced(vals) => {
                        let v = *vals.get(forced_idx).ok_or(Error::WrongLength {
                            expected: self.measurement_count(),
                            got: vals.len(),
                        })?;
                        forced_idx += 1;
                        Some(Readout::Value(v))
                    }
                    Outcomes::Sampled(rng) => Some(Readout::Sample(&mut **rng)),
                };
                let readout = match readout {
                    Some(r) => r,
                    None => {
                        let u = selector(remaining.len(), k, m.quadrature.angle());
                        Readout::Value(u.dot(current.mean()))
                    }
                };
                let (next, mut out) = homodyne(&current, k, m.quadrature.angle(), readout)?;
                out.mode = m.node;
                transcript.push(format!(
                    "measure {}{} = {:.6} (marginal {:.6} ± {:.6})",
                    m.quadrature.symbol(),
                    m.node,
                    out.value,
                    out.marginal_mean,
                    out.marginal_var.sqrt()
                ));
                record.push(out);
                remaining.remove(k);
                current = next;
            }
            for f in &stage.feedforward {
                let out = record.get(first + f.source).ok_or(Error::DanglingOutcome {
                    index: f.source,
                    available: record.len() - first,
                })?;
                let k = stage.after.index_of(f.target)?;
                let shift = f.coefficient() * out.value;
                current = current.displace(k, f.quadrature, shift)?;
                let src = stage.measurements[f.source];
                transcript.push(format!(
                    "feedforward {}{} += {:+}·{}{} = {:+.6}",
                    f.quadrature.symbol(),
                    f.target,
                    f.coefficient(),
                    src.quadrature.symbol(),
                    src.node,
                    shift
                ));
            }
        }
        Ok(ShapingResult {
            state: current,
            ensemble: self.ensemble(state)?,
            graph: self.output_graph().expect("non-empty").clone(),
            outcomes: record,
            removed: self.removed(),
            transcript,
        })
    }
}

impl fmt::Display for ShapingProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<&str> = self.stages.iter().map(|s| s.label.as_str()).collect();
        write!(f, "{}", labels.join(", then "))
    }
}

/// Where measurement values come from when a protocol is executed.
pub enum Outcomes<'a> {
    /// Each outcome equals its marginal mean.
    MarginalMean,
    /// Values in measurement order across all stages.
    Forced(Vec<f64>),
    Sampled(&'a mut dyn rand::RngCore),
}

#[derive(Clone, Debug)]
pub struct ShapingResult {
    /// Conditional state of the unmeasured modes for the recorded outcomes.
    pub state: GaussianState,
    /// Same modes averaged over outcomes; this is what repeated shots sample.
    pub ensemble: GaussianState,
    pub graph: ClusterGraph,
    /// `mode` holds the node label.
    pub outcomes: Vec<HomodyneOutcome>,
    pub removed: Vec<Node>,
    pub transcript: Vec<String>,
}

/// Removes `node` from the cluster with default readout (marginal means).
pub fn remove_node(
    state: &GaussianState,
    graph: &ClusterGraph,
    node: Node,
    gain: f64,
) -> Result<ShapingResult> {
    ShapingProtocol::remove_node(graph, node, gain)?.execute(state, Outcomes::MarginalMean)
}

/// Shortens the wire through `a – b` with default readout.
pub fn shorten_wire(
    state: &GaussianState,
    graph: &ClusterGraph,
    a: Node,
    b: Node,
    gain: f64,
) -> Result<ShapingResult> {
    ShapingProtocol::shorten_wire(graph, a, b, gain)?.execute(state, Outcomes::MarginalMean)
}
