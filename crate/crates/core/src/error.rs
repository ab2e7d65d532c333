use thiserror::Error;

use crate::graph::Node;

#[derive(Debug, Error)]
pub enum Error {
    #[error("a Gaussian state needs at least one mode")]
    NoModes,
    #[error("squeezing level must be non-negative and finite, got {0} dB")]
    InvalidSqueezing(f64),
    #[error("mode index {index} out of range for {n_modes} modes")]
    ModeOutOfRange { index: usize, n_modes: usize },
    #[error("two-mode gate needs distinct modes, got {0} twice")]
    SameMode(usize),
    #[error("reflectivity must lie in [0, 1], got {0}")]
    InvalidReflectivity(f64),
    #[error("efficiency must lie in (0, 1], got {0}")]
    InvalidEfficiency(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariance matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("measured quadrature variance {0:e} is below the conditioning floor")]
    SharpQuadrature(f64),
    #[error("feedforward references outcome {index} but only {available} outcomes exist")]
    DanglingOutcome { index: usize, available: usize },
    #[error("node {0} is not in the graph")]
    UnknownNode(Node),
    #[error("node {0} already exists")]
    DuplicateNode(Node),
    #[error("self-loop on node {0}")]
    SelfLoop(Node),
    #[error("graph precondition violated at node {node}: {reason}")]
    Precondition { node: Node, reason: String },
    #[error("expected {expected} per-node values, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("decomposition failed: {0}")]
    Decomposition(String),
    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("calibration target {target} outside feasible interval [{lossless}, {vacuum})")]
    InfeasibleTarget { target: f64, lossless: f64, vacuum: f64 },
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
