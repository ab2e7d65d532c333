//! Gaussian simulation of continuous-variable cluster states and their
//! reshaping by homodyne measurement and feedforward.
//!
//! * [`gaussian`]: states, symplectic gates and loss in the ħ = 1/2 convention.
//! * [`graph`]: cluster graphs, nullifiers, and cluster construction.
//! * [`measure`]: homodyne conditioning, feedforward, node removal, wire shortening,
//!   and Monte Carlo trajectories.
//! * [`verify`]: nullifier-variance entanglement criteria and squeezing reports.
//! * [`experiment`]: scenario runner and report emitter behind the `cvshape` binary.

pub mod error;
pub mod gaussian;
pub mod graph;
pub mod measure;
pub mod verify;
pub mod experiment;

pub use error::{Error, Result};
