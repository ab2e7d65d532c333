//! Scenario runner behind the `cvshape` binary.
//!
//! A run builds the cluster, applies the configured loss stages, checks the
//! criteria on the initial state, shapes it, checks again, and optionally
//! samples Monte Carlo trajectories of the same configuration.

mod config;
mod emit;

pub use config::{Construction, ExperimentConfig, LossSetting, Operation, OutputFormat, Scenario};
pub use emit::{emit, render, round_sig, validate_report_json, SCHEMA_VERSION};

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, LossModel, LossStage, SymplecticTransform};
use crate::graph::{
    canonical_entangler, compile_network, graph_of_rotated_cluster, nullifiers_of,
    parse_graph_spec, preset_paper_network, squeezed_inputs, wire_to_ring_phases, ClusterGraph,
    Node, Sign,
};
use crate::measure::{
    run_trajectory, Outcomes, ShapingProtocol, ShapingStage, TrajectoryPlan, TrajectoryStats,
};
use crate::verify::{check_cluster_criteria, CriteriaReport, ResidualSqueezing};

/// Single global efficiency `η` with `η·v0 + (1 − η)·k/4 = target`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Calibration {
    pub target: f64,
    pub lossless_variance: f64,
    pub terms: usize,
    pub eta: f64,
    pub stage: LossStage,
}

impl Calibration {
    pub fn loss_model(&self) -> LossModel {
        LossModel::uniform(self.stage, self.eta).expect("eta validated")
    }
}

/// Solves for the efficiency mapping the lossless `v0` of a `terms`-term form onto `target`.
pub fn calibrate_loss(target: f64, v0: f64, terms: usize) -> Result<Calibration> {
    let vacuum = terms as f64 * 0.25;
    let infeasible = || Error::InfeasibleTarget { target, lossless: v0, vacuum };
    if !(v0 < vacuum) || !target.is_finite() {
        return Err(infeasible());
    }
    let eta = (vacuum - target) / (vacuum - v0);
    let eta = if (eta - 1.0).abs() < 1e-12 { 1.0 } else { eta };
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(infeasible());
    }
    Ok(Calibration { target, lossless_variance: v0, terms, eta, stage: LossStage::Detection })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphEcho {
    pub nodes: Vec<Node>,
    pub edges: Vec<(Node, Node, i8)>,
}

impl From<&ClusterGraph> for GraphEcho {
    fn from(g: &ClusterGraph) -> Self {
        Self {
            nodes: g.nodes().to_vec(),
            edges: g.edges().map(|(a, b, s)| (a, b, if s == Sign::Plus { 1 } else { -1 })).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapingEcho {
    pub protocol: String,
    pub stages: Vec<ShapingStage>,
    pub transcript: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RingRouteComparison {
    pub phases: Vec<(Node, f64)>,
    pub ring: GraphEcho,
    pub direct_covariance: Vec<Vec<f64>>,
    pub ring_covariance: Vec<Vec<f64>>,
    /// Largest absolute entry of the covariance difference.
    pub discrepancy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PublishedComparison {
    pub stage: String,
    pub quantity: String,
    pub published: f64,
    pub simulated: f64,
    pub difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema_version: String,
    pub config: ExperimentConfig,
    pub calibration: Option<Calibration>,
    pub effective_loss: LossModel,
    pub graph_initial: GraphEcho,
    pub initial: CriteriaReport,
    pub shaping: ShapingEcho,
    pub graph_final: GraphEcho,
    #[serde(rename = "final")]
    pub final_report: CriteriaReport,
    pub residual_squeezing: Vec<ResidualSqueezing>,
    pub ring_route: Option<RingRouteComparison>,
    pub monte_carlo: Option<TrajectoryStats>,
    pub published: Vec<PublishedComparison>,
    pub all_pass: bool,
    pub wall_time_s: Option<f64>,
}

fn scenario_graph(config: &ExperimentConfig) -> Result<ClusterGraph> {
    match &config.graph {
        Some(text) => Ok(parse_graph_spec(text)?.graph),
        None => Ok(ClusterGraph::wire4()),
    }
}

fn squeezing(config: &ExperimentConfig, graph: &ClusterGraph) -> Result<Vec<f64>> {
    if let Some(&node) = config.squeezing_per_node.keys().find(|&&n| !graph.contains(n)) {
        return Err(Error::UnknownNode(node));
    }
    let mut db: Vec<f64> = graph
        .nodes()
        .iter()
        .map(|n| config.squeezing_per_node.get(n).copied().unwrap_or(config.squeezing_db))
        .collect();
    // per-node squeezing from a graph file fills in where the config is silent
    if let Some(text) = &config.graph {
        let spec = parse_graph_spec(text)?;
        for (k, (node, file_db)) in graph.nodes().iter().zip(&spec.squeezing_db).enumerate() {
            if let (Some(d), false) = (file_db, config.squeezing_per_node.contains_key(node)) {
                db[k] = *d;
            }
        }
    }
    Ok(db)
}

/// Cluster after source loss, before any later stage.
fn construct(
    config: &ExperimentConfig,
    graph: &ClusterGraph,
    db: &[f64],
    loss: &LossModel,
) -> Result<GaussianState> {
    let nodes = graph.nodes();
    let (inputs, network) = match config.construction {
        Construction::Canonical => (squeezed_inputs(db)?, canonical_entangler(graph)),
        Construction::Compiled => {
            let plan = compile_network(graph, db)?;
            (plan.inputs()?, plan.interferometer_transform()?)
        }
        Construction::PresetPaper => {
            if *graph != ClusterGraph::wire4() {
                return Err(Error::Config("preset-paper construction only builds the four-mode wire".into()));
            }
            if db.iter().any(|&d| d != db[0]) {
                return Err(Error::Config("preset-paper construction needs equal squeezing on all nodes".into()));
            }
            let plan = preset_paper_network(db[0])?;
            (plan.inputs()?, plan.interferometer_transform()?)
        }
    };
    loss.apply_stage(&inputs, LossStage::Source, nodes)?.apply(&network)
}

fn detect(state: &GaussianState, graph: &ClusterGraph, loss: &LossModel) -> Result<GaussianState> {
    loss.apply_stage(state, LossStage::Detection, graph.nodes())
}

fn tap(state: &GaussianState, graph: &ClusterGraph, protocol: &ShapingProtocol, loss: &LossModel) -> Result<GaussianState> {
    let mut out = state.clone();
    for node in protocol.feedforward_targets() {
        let eta = loss.efficiency(LossStage::FeedforwardTap, node);
        if eta < 1.0 {
            out = out.apply_loss(graph.index_of(node)?, eta)?;
        }
    }
    Ok(out)
}

fn build_protocol(config: &ExperimentConfig, graph: &ClusterGraph) -> Result<ShapingProtocol> {
    let ops = match config.scenario {
        Scenario::RemoveEdge => vec![Operation::Remove { node: 4 }],
        Scenario::RemoveInner => vec![Operation::Remove { node: 3 }],
        Scenario::ShortenWire | Scenario::RingRouteCheck => vec![Operation::Shorten { a: 2, b: 3 }],
        Scenario::Custom => config.operations.clone(),
    };
    let mut protocol: Option<ShapingProtocol> = None;
    for op in ops {
        let current = protocol.as_ref().and_then(|p| p.output_graph()).unwrap_or(graph).clone();
        let next = match op {
            Operation::Remove { node } => ShapingProtocol::remove_node(&current, node, config.gain)?,
            Operation::Shorten { a, b } => ShapingProtocol::shorten_wire(&current, a, b, config.gain)?,
        };
        protocol = Some(match protocol {
            Some(p) => p.then(next)?,
            None => next,
        });
    }
    let mut protocol = protocol.ok_or_else(|| Error::Config("no shaping operations".into()))?;
    for (&node, &g) in &config.gain_per_node {
        if !graph.contains(node) {
            return Err(Error::UnknownNode(node));
        }
        protocol.set_gain(node, g);
    }
    Ok(protocol)
}

/// Initial-nullifier form used for calibration: the first with the fewest terms.
fn calibration_form(graph: &ClusterGraph) -> Option<crate::graph::Nullifier> {
    nullifiers_of(graph)
        .into_iter()
        .filter(|n| !graph.is_isolated(n.anchor))
        .min_by_key(|n| n.term_count())
}

fn published_values(config: &ExperimentConfig) -> (Vec<(&'static str, f64)>, Vec<(&'static str, f64)>) {
    if config.scenario == Scenario::Custom {
        return (Vec::new(), Vec::new());
    }
    let initial = vec![("p1 - x2", 0.25), ("p2 - x1 - x3", 0.25), ("p3 - x2 - x4", 0.25), ("p4 - x3", 0.25)];
    let fin = match config.scenario {
        Scenario::RemoveEdge => vec![("p1 - x2", 0.14), ("p2 - x1 - x3", 0.22), ("p3 - x2", 0.26)],
        Scenario::RemoveInner => vec![("p1 - x2", 0.17), ("p2 - x1", 0.25)],
        _ => vec![("p1 + x4", 0.25), ("p4 + x1", 0.24)],
    };
    (initial, fin)
}

/// Published squeezing of the mode left behind by inner-node removal, in dB.
pub const PUBLISHED_RESIDUAL_DB: f64 = -1.5;

fn compare(stage: &str, report: &CriteriaReport, values: &[(&str, f64)]) -> Vec<PublishedComparison> {
    values
        .iter()
        .filter_map(|&(form, published)| {
            report.variance_of(form).map(|simulated| PublishedComparison {
                stage: stage.into(),
                quantity: form.into(),
                published,
                simulated,
                difference: simulated - published,
            })
        })
        .collect()
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn ring_route(
    state: &GaussianState,
    graph: &ClusterGraph,
    config: &ExperimentConfig,
    loss: &LossModel,
    direct: &GaussianState,
) -> Result<RingRouteComparison> {
    let phases = wire_to_ring_phases(graph)?;
    let n = graph.len();
    let mut rotated = state.clone();
    for &(node, theta) in &phases {
        rotated = rotated.apply(&SymplecticTransform::phase_shift(n, graph.index_of(node)?, theta)?)?;
    }
    let ring = graph_of_rotated_cluster(graph, &phases)?;
    let first = ShapingProtocol::remove_node(&ring, 2, config.gain)?;
    let mid = first.output_graph().expect("one stage").clone();
    let protocol = first.then(ShapingProtocol::remove_node(&mid, 3, config.gain)?)?;
    let out_graph = protocol.output_graph().expect("two stages").clone();
    let tapped = tap(&rotated, &ring, &protocol, loss)?;
    let mut shaped = protocol.ensemble(&tapped)?;
    // undo the rotation on the surviving modes
    for &(node, theta) in &phases {
        if let Ok(k) = out_graph.index_of(node) {
            shaped = shaped.apply(&SymplecticTransform::phase_shift(out_graph.len(), k, -theta)?)?;
        }
    }
    let ring_final = detect(&shaped, &out_graph, loss)?;
    let discrepancy = (ring_final.cov() - direct.cov()).amax().max((ring_final.mean() - direct.mean()).amax());
    Ok(RingRouteComparison {
        phases,
        ring: (&ring).into(),
        direct_covariance: rows(direct.cov()),
        ring_covariance: rows(ring_final.cov()),
        discrepancy,
    })
}

/// Runs one configured experiment end to end.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    config.validate()?;
    let graph = scenario_graph(config)?;
    if config.scenario != Scenario::Custom && graph != ClusterGraph::wire4() {
        return Err(Error::Config("built-in scenarios run on the four-mode wire".into()));
    }
    let db = squeezing(config, &graph)?;
    let protocol = build_protocol(config, &graph)?;

    let (loss, calibration) = match config.loss {
        LossSetting::Lossless => (LossModel::lossless(), None),
        LossSetting::Explicit => (config.loss_model.clone(), None),
        LossSetting::Calibrated => {
            let base = &config.loss_model;
            let pre = construct(config, &graph, &db, base)?;
            let pre = detect(&base.apply_stage(&pre, LossStage::Propagation, graph.nodes())?, &graph, base)?;
            let form = calibration_form(&graph)
                .ok_or_else(|| Error::Config("graph has no edges to calibrate on".into()))?;
            let cal = calibrate_loss(config.calibration_target, form.variance(&pre, &graph)?, form.term_count())?;
            let mut loss = base.clone();
            loss.scale_stage(cal.stage, cal.eta)?;
            (loss, Some(cal))
        }
    };

    let built = construct(config, &graph, &db, &loss)?;
    let propagated = loss.apply_stage(&built, LossStage::Propagation, graph.nodes())?;
    let initial = check_cluster_criteria(&detect(&propagated, &graph, &loss)?, &graph)?;

    let tapped = tap(&propagated, &graph, &protocol, &loss)?;
    let executed = protocol.execute(&tapped, Outcomes::MarginalMean)?;
    let out_graph = executed.graph.clone();
    let final_state = detect(&executed.ensemble, &out_graph, &loss)?;
    let final_report = check_cluster_criteria(&final_state, &out_graph)?;

    let ring = match config.scenario {
        Scenario::RingRouteCheck => Some(ring_route(&propagated, &graph, config, &loss, &final_state)?),
        _ => None,
    };

    let monte_carlo = if config.trials > 0 {
        let plan = TrajectoryPlan {
            state: tapped.clone(),
            protocol: protocol.clone(),
            detection: out_graph.nodes().iter().map(|&n| loss.efficiency(LossStage::Detection, n)).collect(),
            nullifiers: nullifiers_of(&out_graph),
        };
        Some(run_trajectory(&plan, config.trials, config.seed)?)
    } else {
        None
    };

    let (pub_initial, pub_final) = published_values(config);
    let mut published = compare("initial", &initial, &pub_initial);
    published.extend(compare("final", &final_report, &pub_final));
    if config.scenario == Scenario::RemoveInner {
        if let Some(r) = final_report.residual_squeezing.iter().find(|r| r.node == 4) {
            published.push(PublishedComparison {
                stage: "final".into(),
                quantity: "squeezed_db(4)".into(),
                published: PUBLISHED_RESIDUAL_DB,
                simulated: r.squeezed_db,
                difference: r.squeezed_db - PUBLISHED_RESIDUAL_DB,
            });
        }
    }

    let all_pass = initial.all_pass() && final_report.all_pass();
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION.into(),
        config: config.clone(),
        calibration,
        effective_loss: loss,
        graph_initial: (&graph).into(),
        initial,
        shaping: ShapingEcho {
            protocol: protocol.to_string(),
            stages: protocol.stages.clone(),
            transcript: executed.transcript,
        },
        graph_final: (&out_graph).into(),
        residual_squeezing: final_report.residual_squeezing.clone(),
        final_report,
        ring_route: ring,
        monte_carlo,
        published,
        all_pass,
        wall_time_s: config.timing.then(|| started.elapsed().as_secs_f64()),
    })
}
