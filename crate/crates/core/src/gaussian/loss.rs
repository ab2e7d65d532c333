use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GaussianState;
use crate::error::{Error, Result};
use crate::graph::Node;

/// Where along the optical path a loss acts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossStage {
    /// Squeezed inputs, before the cluster is entangled.
    Source,
    /// Cluster modes between generation and shaping.
    Propagation,
    /// Verification homodynes on the surviving modes.
    Detection,
    /// The 99:1 coupler that injects feedforward into a target mode.
    FeedforwardTap,
}

impl LossStage {
    pub const ALL: [LossStage; 4] =
        [LossStage::Source, LossStage::Propagation, LossStage::Detection, LossStage::FeedforwardTap];

    pub fn name(self) -> &'static str {
        match self {
            LossStage::Source => "source",
            LossStage::Propagation => "propagation",
            LossStage::Detection => "detection",
            LossStage::FeedforwardTap => "feedforward_tap",
        }
    }
}

impl fmt::Display for LossStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossStage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown loss stage `{s}`")))
    }
}

/// Efficiency of one stage: a default plus per-node overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageEfficiency {
    pub default: f64,
    pub per_node: BTreeMap<Node, f64>,
}

impl StageEfficiency {
    fn unit() -> Self {
        Self { default: 1.0, per_node: BTreeMap::new() }
    }

    pub fn of(&self, node: Node) -> f64 {
        self.per_node.get(&node).copied().unwrap_or(self.default)
    }
}

fn check_eta(eta: f64) -> Result<f64> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(eta)
    } else {
        Err(Error::InvalidEfficiency(eta))
    }
}

/// Staged per-node efficiencies; the composite efficiency of a node is the
/// product over stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    stages: BTreeMap<LossStage, StageEfficiency>,
}

impl Default for LossModel {
    fn default() -> Self {
        Self::lossless()
    }
}

impl LossModel {
    pub fn lossless() -> Self {
        Self { stages: LossStage::ALL.into_iter().map(|s| (s, StageEfficiency::unit())).collect() }
    }

    pub fn uniform(stage: LossStage, eta: f64) -> Result<Self> {
        let mut m = Self::lossless();
        m.set_default(stage, eta)?;
        Ok(m)
    }

    pub fn set_default(&mut self, stage: LossStage, eta: f64) -> Result<()> {
        self.stage_mut(stage).default = check_eta(eta)?;
        Ok(())
    }

    pub fn set_node(&mut self, stage: LossStage, node: Node, eta: f64) -> Result<()> {
        let eta = check_eta(eta)?;
        self.stage_mut(stage).per_node.insert(node, eta);
        Ok(())
    }

    fn stage_mut(&mut self, stage: LossStage) -> &mut StageEfficiency {
        self.stages.entry(stage).or_insert_with(StageEfficiency::unit)
    }

    /// Multiplies every efficiency of `stage`, default and per-node, by `factor`.
    pub fn scale_stage(&mut self, stage: LossStage, factor: f64) -> Result<()> {
        check_eta(factor)?;
        let s = self.stage_mut(stage);
        s.default *= factor;
        for eta in s.per_node.values_mut() {
            *eta *= factor;
        }
        Ok(())
    }

    pub fn stage(&self, stage: LossStage) -> Option<&StageEfficiency> {
        self.stages.get(&stage)
    }

    pub fn efficiency(&self, stage: LossStage, node: Node) -> f64 {
        self.stages.get(&stage).map_or(1.0, |s| s.of(node))
    }

    pub fn composite(&self, node: Node) -> f64 {
        LossStage::ALL.iter().map(|&s| self.efficiency(s, node)).product()
    }

    pub fn is_lossless(&self) -> bool {
        self.stages.values().all(|s| s.default == 1.0 && s.per_node.values().all(|&e| e == 1.0))
    }

    /// Applies one stage to every mode; `nodes[k]` labels mode `k` of `state`.
    pub fn apply_stage(
        &self,
        state: &GaussianState,
        stage: LossStage,
        nodes: &[Node],
    ) -> Result<GaussianState> {
        if nodes.len() != state.n_modes() {
            return Err(Error::WrongLength { expected: state.n_modes(), got: nodes.len() });
        }
        let mut out = state.clone();
        for (mode, &node) in nodes.iter().enumerate() {
            let eta = self.efficiency(stage, node);
            if eta < 1.0 {
                out = out.apply_loss(mode, eta)?;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::Quadrature;

    #[test]
    fn composite_is_product_of_stages() {
        let mut m = LossModel::lossless();
        m.set_default(LossStage::Detection, 0.99).unwrap();
        m.set_default(LossStage::Propagation, 0.9).unwrap();
        m.set_node(LossStage::Propagation, 3, 0.5).unwrap();
        assert!((m.composite(1) - 0.891).abs() < 1e-15);
        assert!((m.composite(3) - 0.495).abs() < 1e-15);
        assert!(!m.is_lossless());
        assert!(LossModel::lossless().is_lossless());
    }

    #[test]
    fn invalid_efficiency_rejected() {
        assert!(LossModel::uniform(LossStage::Source, 0.0).is_err());
        assert!(LossModel::uniform(LossStage::Source, 1.01).is_err());
    }

    #[test]
    fn apply_stage_matches_per_mode_loss() {
        let s = GaussianState::squeezed_vacuum(5.0, Quadrature::P)
            .unwrap()
            .tensor(&GaussianState::squeezed_vacuum(2.0, Quadrature::X).unwrap());
        let mut m = LossModel::lossless();
        m.set_node(LossStage::Detection, 7, 0.6).unwrap();
        let out = m.apply_stage(&s, LossStage::Detection, &[3, 7]).unwrap();
        let direct = s.apply_loss(1, 0.6).unwrap();
        assert_eq!(out, direct);
    }

    #[test]
    fn stage_names_round_trip() {
        for st in LossStage::ALL {
            assert_eq!(st.name().parse::<LossStage>().unwrap(), st);
        }
    }
}
