use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{LossModel, LossStage};
use crate::graph::Node;
use crate::measure::DEFAULT_GAIN;

macro_rules! keyword_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
        pub enum $name {
            $(#[serde(rename = $text)] #[value(name = $text)] $variant),+
        }

        impl $name {
            pub fn name(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($name), " `{}`"), s
                    ))),
                }
            }
        }
    };
}

keyword_enum!(Scenario {
    RemoveEdge => "remove-edge",
    RemoveInner => "remove-inner",
    ShortenWire => "shorten-wire",
    RingRouteCheck => "ring-route-check",
    Custom => "custom",
});

keyword_enum!(Construction {
    Canonical => "canonical",
    Compiled => "compiled",
    PresetPaper => "preset-paper",
});

keyword_enum!(OutputFormat {
    Json => "json",
    Csv => "csv",
});

keyword_enum!(
    /// `calibrated` solves one detection efficiency from `calibration_target`
    /// on top of any explicit stage efficiencies.
    LossSetting {
        Lossless => "lossless",
        Calibrated => "calibrated",
        Explicit => "explicit",
    }
);

/// One shaping step of a custom scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Operation {
    Remove { node: Node },
    Shorten { a: Node, b: Node },
}

impl FromStr for Operation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let toks: Vec<&str> = s.split_whitespace().collect();
        let node = |t: &str| {
            t.parse::<Node>().map_err(|_| Error::Config(format!("bad node `{t}` in operation `{s}`")))
        };
        match toks.as_slice() {
            ["remove", n] => Ok(Operation::Remove { node: node(n)? }),
            ["shorten", a, b] => Ok(Operation::Shorten { a: node(a)?, b: node(b)? }),
            _ => Err(Error::Config(format!("unknown operation `{s}` (use `remove N` or `shorten A B`)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub construction: Construction,
    /// Squeezing of every node without an override.
    pub squeezing_db: f64,
    pub squeezing_per_node: BTreeMap<Node, f64>,
    /// Graph in the text exchange format; `None` means the four-mode wire.
    pub graph: Option<String>,
    pub operations: Vec<Operation>,
    pub loss: LossSetting,
    pub calibration_target: f64,
    pub loss_model: LossModel,
    pub gain: f64,
    pub gain_per_node: BTreeMap<Node, f64>,
    /// 0 runs the analytic path only.
    pub trials: usize,
    pub seed: u64,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    /// Record wall time in the report (breaks byte-identical output).
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::RemoveEdge,
            construction: Construction::PresetPaper,
            squeezing_db: 5.0,
            squeezing_per_node: BTreeMap::new(),
            graph: None,
            operations: Vec::new(),
            loss: LossSetting::Calibrated,
            calibration_target: 0.25,
            loss_model: LossModel::lossless(),
            gain: DEFAULT_GAIN,
            gain_per_node: BTreeMap::new(),
            trials: 0,
            seed: 1,
            output: None,
            format: OutputFormat::Json,
            timing: false,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Parse { line, message: format!("bad value `{value}` for `{key}`") })
}

impl ExperimentConfig {
    /// Parses the `key = value` format; relative `graph_file` paths resolve against `base`.
    ///
    /// ```text
    /// scenario = shorten-wire
    /// squeezing_db = 5
    /// squeezing_db.3 = 4.5
    /// loss = calibrated
    /// loss.propagation.2 = 0.95
    /// gain.1 = -0.9
    /// operations = remove 4; shorten 2 3
    /// ```
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Parse { line, message: format!("expected `key = value`, got `{content}`") })?;
            let at_line = |e: Error| match e {
                Error::Parse { .. } => e,
                other => Error::Parse { line, message: other.to_string() },
            };
            let parts: Vec<&str> = key.split('.').collect();
            match parts.as_slice() {
                ["scenario"] => cfg.scenario = value.parse().map_err(at_line)?,
                ["construction"] => cfg.construction = value.parse().map_err(at_line)?,
                ["squeezing_db"] => cfg.squeezing_db = parse_num(key, value, line)?,
                ["squeezing_db", node] => {
                    cfg.squeezing_per_node
                        .insert(parse_num(key, node, line)?, parse_num(key, value, line)?);
                }
                ["graph_file"] => {
                    let path = match base {
                        Some(b) => b.join(value),
                        None => PathBuf::from(value),
                    };
                    cfg.graph = Some(std::fs::read_to_string(&path).map_err(|e| Error::Parse {
                        line,
                        message: format!("cannot read graph file {}: {e}", path.display()),
                    })?);
                }
                ["operations"] => {
                    cfg.operations = value
                        .split(';')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::parse)
                        .collect::<Result<_>>()
                        .map_err(at_line)?;
                }
                ["loss"] => cfg.loss = value.parse().map_err(at_line)?,
                ["calibration_target"] => cfg.calibration_target = parse_num(key, value, line)?,
                ["loss", stage] => {
                    let stage: LossStage = stage.parse().map_err(at_line)?;
                    cfg.loss_model
                        .set_default(stage, parse_num(key, value, line)?)
                        .map_err(at_line)?;
                }
                ["loss", stage, node] => {
                    let stage: LossStage = stage.parse().map_err(at_line)?;
                    cfg.loss_model
                        .set_node(stage, parse_num(key, node, line)?, parse_num(key, value, line)?)
                        .map_err(at_line)?;
                }
                ["gain"] => cfg.gain = parse_num(key, value, line)?,
                ["gain", node] => {
                    cfg.gain_per_node.insert(parse_num(key, node, line)?, parse_num(key, value, line)?);
                }
                ["trials"] => cfg.trials = parse_num(key, value, line)?,
                ["seed"] => cfg.seed = parse_num(key, value, line)?,
                ["output"] => cfg.output = Some(PathBuf::from(value)),
                ["format"] => cfg.format = value.parse().map_err(at_line)?,
                ["timing"] => cfg.timing = parse_num(key, value, line)?,
                _ => return Err(Error::Parse { line, message: format!("unknown key `{key}`") }),
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent())
    }

    /// Checks that do not need the graph.
    pub fn validate(&self) -> Result<()> {
        let bad_db = |d: f64| !(d >= 0.0 && d.is_finite());
        if bad_db(self.squeezing_db) {
            return Err(Error::InvalidSqueezing(self.squeezing_db));
        }
        if let Some(&d) = self.squeezing_per_node.values().find(|&&d| bad_db(d)) {
            return Err(Error::InvalidSqueezing(d));
        }
        match (self.scenario, self.operations.is_empty()) {
            (Scenario::Custom, true) => {
                return Err(Error::Config("custom scenario needs `operations`".into()));
            }
            (s, false) if s != Scenario::Custom => {
                return Err(Error::Config(format!("`operations` only apply to the custom scenario, not {s}")));
            }
            _ => {}
        }
        if self.graph.is_some() && self.scenario != Scenario::Custom {
            return Err(Error::Config("a graph file only applies to the custom scenario".into()));
        }
        if !self.gain.is_finite() || self.gain_per_node.values().any(|g| !g.is_finite()) {
            return Err(Error::Config("feedforward gains must be finite".into()));
        }
        Ok(())
    }
}
