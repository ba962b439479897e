use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::PolicyError;
use crate::abm::SimConfig;
use crate::engine::{Engine, EngineKind, EngineOutcome};
use crate::model::{ChainId, ChainParams, MarketParams, SybilCap};

/// A settable scalar, written `market.<key>` (or just `<key>`) for market
/// parameters and `chain1.<key>` / `chain2.<key>` for chain levers, using the
/// scenario-file key names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamPath {
    Market(&'static str),
    Chain(ChainId, &'static str),
}

const MARKET_KEYS: [&str; 7] = [
    "value_v",
    "network_gamma",
    "complementarity_delta",
    "honest_count_H",
    "farmer_count_F",
    "farmer_cost_scale_lambda",
    "sybil_cap_S",
];

const CHAIN_KEYS: [&str; 6] = [
    "fee_p",
    "eligibility_cost_c",
    "fixed_reward_f",
    "proportional_budget_B",
    "issuance_cost_k",
    "resist_rho",
];

impl FromStr for ParamPath {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || PolicyError::UnknownParameter(s.to_string());
        let (scope, key) = s.split_once('.').unwrap_or(("market", s));
        let lookup = |keys: &[&'static str]| keys.iter().copied().find(|k| *k == key);
        match scope {
            "market" => lookup(&MARKET_KEYS)
                .map(ParamPath::Market)
                .ok_or_else(unknown),
            "chain1" | "chain2" => {
                let chain = if scope == "chain1" {
                    ChainId::One
                } else {
                    ChainId::Two
                };
                lookup(&CHAIN_KEYS)
                    .map(|k| ParamPath::Chain(chain, k))
                    .ok_or_else(unknown)
            }
            _ => Err(unknown()),
        }
    }
}

impl fmt::Display for ParamPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamPath::Market(k) => write!(f, "market.{k}"),
            ParamPath::Chain(c, k) => write!(f, "{c}.{k}"),
        }
    }
}

impl Serialize for ParamPath {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ParamPath {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn count(path: ParamPath, value: f64) -> Result<u64, PolicyError> {
    if value >= 0.0 && value.fract() == 0.0 && value < u64::MAX as f64 {
        Ok(value as u64)
    } else {
        Err(PolicyError::InvalidValue {
            path: path.to_string(),
            value,
            reason: "expected a non-negative integer".into(),
        })
    }
}

impl ParamPath {
    /// Set the parameter and re-validate the touched block.
    pub fn apply(
        self,
        value: f64,
        market: &mut MarketParams,
        chains: &mut [ChainParams; 2],
    ) -> Result<(), PolicyError> {
        let invalid = |e: crate::model::ModelError| PolicyError::InvalidValue {
            path: self.to_string(),
            value,
            reason: e.to_string(),
        };
        match self {
            ParamPath::Market(key) => {
                match key {
                    "value_v" => market.value = value,
                    "network_gamma" => market.network_gamma = value,
                    "complementarity_delta" => market.complementarity_delta = value,
                    "honest_count_H" => market.honest_count = count(self, value)?,
                    "farmer_count_F" => market.farmer_count = count(self, value)?,
                    "farmer_cost_scale_lambda" => market.farmer_cost_scale = value,
                    "sybil_cap_S" => {
                        market.sybil_cap = if value == f64::INFINITY {
                            SybilCap::Unbounded
                        } else {
                            SybilCap::Finite(count(self, value)?)
                        }
                    }
                    _ => unreachable!("keys come from MARKET_KEYS"),
                }
                market.validate().map_err(invalid)
            }
            ParamPath::Chain(chain, key) => {
                let c = &mut chains[chain.index()];
                match key {
                    "fee_p" => c.fee = value,
                    "eligibility_cost_c" => c.eligibility_cost = value,
                    "fixed_reward_f" => c.fixed_reward = value,
                    "proportional_budget_B" => c.budget = value,
                    "issuance_cost_k" => c.issuance_cost = value,
                    "resist_rho" => c.resist = value,
                    _ => unreachable!("keys come from CHAIN_KEYS"),
                }
                c.validate().map_err(invalid)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: ParamPath,
    pub values: Vec<f64>,
    #[serde(default)]
    pub engine: EngineKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: EngineOutcome,
}

/// Evaluate the market once per axis value, in the given order. Flagged
/// outcomes are kept; solver errors abort the sweep.
pub fn sweep(
    market: &MarketParams,
    chain1: &ChainParams,
    chain2: &ChainParams,
    spec: &SweepSpec,
    sim: &SimConfig,
) -> Result<Vec<SweepRow>, PolicyError> {
    if spec.values.is_empty() {
        return Err(PolicyError::EmptySweep);
    }
    let engine = Engine::from_kind(spec.engine, *sim);
    let points = spec
        .values
        .iter()
        .map(|&value| {
            let mut m = *market;
            let mut chains = [*chain1, *chain2];
            spec.axis.apply(value, &mut m, &mut chains)?;
            Ok((value, m, chains))
        })
        .collect::<Result<Vec<_>, PolicyError>>()?;
    points
        .into_par_iter()
        .map(|(value, m, [c1, c2])| {
            Ok(SweepRow {
                value,
                outcome: engine.evaluate(&m, &c1, &c2)?,
            })
        })
        .collect()
}
