//! Homodyne measurement, feedforward and the two shaping primitives.
//!
//! Measured modes are discarded. [`ShapingResult::state`] is the conditional
//! state for one set of outcomes; [`ShapingResult::ensemble`] averages over
//! outcomes and is the state that repeated experimental shots reproduce.

mod homodyne;
mod shaping;
mod trajectory;

pub use homodyne::{homodyne, HomodyneOutcome, Readout, MARGINAL_VARIANCE_FLOOR};
pub use shaping::{
    remove_node, shorten_wire, FeedforwardStep, Measurement, Outcomes, ShapingProtocol,
    ShapingResult, ShapingStage, DEFAULT_GAIN,
};
pub use trajectory::{
    analytic_detected, run_trajectory, CovarianceStats, NullifierStats, TrajectoryPlan,
    TrajectoryStats,
};
