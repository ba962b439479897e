//! Scenario files: strict TOML (or the JSON emitted in `summary.json`).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use airdroplab_core::abm::discrete::DiscreteHonest;
use airdroplab_core::policy::{Lever, LeverGrid, SweepSpec};
use airdroplab_core::{ChainId, ChainParams, Engine, MarketParams, SimConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("[{block}] {message}")]
    Domain {
        block: &'static str,
        message: String,
    },
    #[error("[{block}] is required for the {command} command")]
    MissingBlock {
        block: &'static str,
        command: &'static str,
    },
    #[error("expected exactly one command block, found {}", .0.join(", "))]
    CommandCount(Vec<&'static str>),
}

fn domain(block: &'static str, message: impl ToString) -> ScenarioError {
    ScenarioError::Domain {
        block,
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HonestGroup {
    #[serde(default = "one")]
    pub count: usize,
    #[serde(default)]
    pub transport: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locked: Option<ChainId>,
}

fn one() -> usize {
    1
}

fn default_sweeps() -> usize {
    1000
}

/// Explicitly listed honest agents for small discrete games.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteBlock {
    #[serde(default = "default_sweeps")]
    pub max_sweeps: usize,
    pub honest: Vec<HonestGroup>,
}

impl DiscreteBlock {
    pub fn agents(&self) -> Vec<DiscreteHonest> {
        self.honest
            .iter()
            .flat_map(|g| {
                std::iter::repeat_n(
                    DiscreteHonest {
                        transport: g.transport,
                        locked: g.locked,
                    },
                    g.count,
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmptyBlock {}

fn default_count() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_target() -> ChainId {
    ChainId::One
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeBlock {
    #[serde(default = "default_target")]
    pub target: ChainId,
    #[serde(default)]
    pub issuance_cost_tracks_reward: bool,
    pub levers: BTreeMap<Lever, Vec<f64>>,
}

impl OptimizeBlock {
    pub fn grid(&self) -> LeverGrid {
        LeverGrid {
            levers: self.levers.clone(),
            issuance_cost_tracks_reward: self.issuance_cost_tracks_reward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsBlock {
    /// CSV with header `date,chain,metric,value`, relative to the scenario file.
    pub series: PathBuf,
    /// Optional CSV with header `date,label`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<PathBuf>,
    pub numerator_chain: String,
    pub denominator_chain: String,
    pub metric: String,
    #[serde(default)]
    pub percent: bool,
    #[serde(default = "default_window")]
    pub pre_days: u32,
    #[serde(default = "default_window")]
    pub post_days: u32,
}

fn default_window() -> u32 {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market: Option<MarketParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain1: Option<ChainParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain2: Option<ChainParams>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete: Option<DiscreteBlock>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<EmptyBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<EmptyBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(
        rename = "verify-fixed",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub verify_fixed: Option<VerifyBlock>,
    #[serde(
        rename = "verify-proportional",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub verify_proportional: Option<VerifyBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsBlock>,

    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Solve,
    Simulate,
    Sweep,
    VerifyFixed,
    VerifyProportional,
    Optimize,
    Metrics,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Solve => "solve",
            CommandKind::Simulate => "simulate",
            CommandKind::Sweep => "sweep",
            CommandKind::VerifyFixed => "verify-fixed",
            CommandKind::VerifyProportional => "verify-proportional",
            CommandKind::Optimize => "optimize",
            CommandKind::Metrics => "metrics",
        }
    }

    fn needs_market(self) -> bool {
        !matches!(
            self,
            CommandKind::VerifyFixed | CommandKind::VerifyProportional | CommandKind::Metrics
        )
    }
}

/// A market with both chains, as required by most commands.
#[derive(Debug, Clone, Copy)]
pub struct Market<'a> {
    pub market: &'a MarketParams,
    pub chain1: &'a ChainParams,
    pub chain2: &'a ChainParams,
}

impl ScenarioFile {
    pub fn parse_toml(text: &str, path: &Path) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Syntax {
            path: path.to_path_buf(),
            message: e.to_string().trim_end().to_string(),
        })?;
        file.finish(path)
    }

    pub fn parse_json(text: &str, path: &Path) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Syntax {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        file.finish(path)
    }

    fn finish(mut self, path: &Path) -> Result<Self, ScenarioError> {
        self.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        self.validate()?;
        Ok(self)
    }

    pub fn command(&self) -> Result<CommandKind, ScenarioError> {
        let present: Vec<CommandKind> = [
            (self.solve.is_some(), CommandKind::Solve),
            (self.simulate.is_some(), CommandKind::Simulate),
            (self.sweep.is_some(), CommandKind::Sweep),
            (self.verify_fixed.is_some(), CommandKind::VerifyFixed),
            (
                self.verify_proportional.is_some(),
                CommandKind::VerifyProportional,
            ),
            (self.optimize.is_some(), CommandKind::Optimize),
            (self.metrics.is_some(), CommandKind::Metrics),
        ]
        .into_iter()
        .filter_map(|(on, k)| on.then_some(k))
        .collect();
        match present.as_slice() {
            [one] => Ok(*one),
            _ => Err(ScenarioError::CommandCount(
                present.iter().map(|k| k.name()).collect(),
            )),
        }
    }

    pub fn market(&self) -> Result<Market<'_>, ScenarioError> {
        let command = self.command()?.name();
        let missing = |block| ScenarioError::MissingBlock { block, command };
        Ok(Market {
            market: self.market.as_ref().ok_or_else(|| missing("market"))?,
            chain1: self.chain1.as_ref().ok_or_else(|| missing("chain1"))?,
            chain2: self.chain2.as_ref().ok_or_else(|| missing("chain2"))?,
        })
    }

    /// Engine for single-outcome commands: the discrete game when agents are
    /// listed, otherwise the closed form (simulator for hybrids).
    pub fn engine(&self) -> Engine {
        match &self.discrete {
            Some(d) => Engine::Discrete {
                honest: d.agents(),
                max_sweeps: d.max_sweeps,
            },
            None => Engine::ClosedFormOrAbm(self.sim),
        }
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Override every seed in the file.
    pub fn set_seed(&mut self, seed: u64) {
        self.sim.seed = seed;
        for v in [&mut self.verify_fixed, &mut self.verify_proportional]
            .into_iter()
            .flatten()
        {
            v.seed = seed;
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let command = self.command()?;
        if let Some(m) = &self.market {
            m.validate().map_err(|e| domain("market", e))?;
        }
        for (block, c) in [("chain1", &self.chain1), ("chain2", &self.chain2)] {
            if let Some(c) = c {
                c.validate().map_err(|e| domain(block, e))?;
            }
        }
        self.sim.validate().map_err(|e| domain("sim", e))?;
        if command.needs_market() {
            self.market()?;
        }
        if let (Some(d), Some(m)) = (&self.discrete, &self.market) {
            let agents: usize = d.honest.iter().map(|g| g.count).sum();
            if agents as u64 != m.honest_count {
                return Err(domain(
                    "discrete",
                    format!(
                        "{agents} honest agents listed but honest_count_H is {}",
                        m.honest_count
                    ),
                ));
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(domain("sweep", "values must not be empty"));
            }
            let m = self.market()?;
            for &v in &s.values {
                let mut market = *m.market;
                let mut chains = [*m.chain1, *m.chain2];
                s.axis
                    .apply(v, &mut market, &mut chains)
                    .map_err(|e| domain("sweep", e))?;
            }
        }
        for (block, v) in [
            ("verify-fixed", &self.verify_fixed),
            ("verify-proportional", &self.verify_proportional),
        ] {
            if v.as_ref().is_some_and(|v| v.count == 0) {
                return Err(domain(block, "count must be at least 1"));
            }
        }
        if let Some(o) = &self.optimize {
            if o.levers.is_empty() || o.levers.values().any(Vec::is_empty) {
                return Err(domain("optimize", "every lever needs at least one value"));
            }
            if let Some((lever, v)) = o
                .levers
                .iter()
                .flat_map(|(l, vs)| vs.iter().map(move |v| (l, v)))
                .find(|(_, v)| !v.is_finite())
            {
                return Err(domain(
                    "optimize",
                    format!("{lever:?} value {v} is not finite"),
                ));
            }
        }
        Ok(())
    }
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioFile, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if path.extension().is_some_and(|e| e == "json") {
        ScenarioFile::parse_json(&text, path)
    } else {
        ScenarioFile::parse_toml(&text, path)
    }
}
