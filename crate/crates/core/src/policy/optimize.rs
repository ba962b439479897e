use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PolicyError;
use crate::engine::{Engine, EngineOutcome};
use crate::model::{ChainId, ChainParams, MarketParams};

/// Issuer levers in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Lever {
    #[serde(rename = "fee_p")]
    Fee,
    #[serde(rename = "eligibility_cost_c")]
    EligibilityCost,
    #[serde(rename = "fixed_reward_f")]
    FixedReward,
    #[serde(rename = "proportional_budget_B")]
    Budget,
    #[serde(rename = "resist_rho")]
    Resist,
}

impl Lever {
    fn set(self, chain: &mut ChainParams, value: f64) {
        match self {
            Lever::Fee => chain.fee = value,
            Lever::EligibilityCost => chain.eligibility_cost = value,
            Lever::FixedReward => chain.fixed_reward = value,
            Lever::Budget => chain.budget = value,
            Lever::Resist => chain.resist = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeverGrid {
    pub levers: BTreeMap<Lever, Vec<f64>>,
    /// Set the issuance cost `k` equal to the fixed reward at every point.
    #[serde(default)]
    pub issuance_cost_tracks_reward: bool,
}

impl LeverGrid {
    /// All lever tuples in lexicographic order of (lever, ascending value).
    pub fn points(&self) -> Result<Vec<Vec<(Lever, f64)>>, PolicyError> {
        if self.levers.is_empty() || self.levers.values().any(|v| v.is_empty()) {
            return Err(PolicyError::EmptyGrid);
        }
        let mut axes = Vec::new();
        for (&lever, values) in &self.levers {
            let mut values = values.clone();
            values.sort_by(f64::total_cmp);
            values.dedup();
            axes.push((lever, values));
        }
        let mut points = vec![Vec::new()];
        for (lever, values) in &axes {
            points = points
                .into_iter()
                .flat_map(|prefix: Vec<(Lever, f64)>| {
                    values.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push((*lever, v));
                        p
                    })
                })
                .collect();
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub levers: Vec<(Lever, f64)>,
    pub params: ChainParams,
    /// Target chain net revenue; `None` when the point was excluded.
    pub net_revenue: Option<f64>,
    /// Why the point was excluded, if it was.
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyOptimum {
    pub target: ChainId,
    pub best: ChainParams,
    pub net_revenue: f64,
    pub outcome: EngineOutcome,
    pub evaluated: usize,
    pub excluded: usize,
    pub points: Vec<GridPoint>,
}

/// Exhaustive grid search over the target chain's levers against a fixed
/// opponent. Points that error, fail to converge or carry blocking flags are
/// excluded; ties go to the lexicographically first lever tuple.
pub fn optimize_policy(
    market: &MarketParams,
    target: ChainId,
    base: &ChainParams,
    opponent: &ChainParams,
    grid: &LeverGrid,
    engine: &Engine,
) -> Result<PolicyOptimum, PolicyError> {
    let points = grid.points()?;
    let evaluated: Vec<(GridPoint, Option<EngineOutcome>)> = points
        .into_par_iter()
        .map(|levers| {
            let mut params = *base;
            for &(lever, v) in &levers {
                lever.set(&mut params, v);
            }
            if grid.issuance_cost_tracks_reward {
                params.issuance_cost = params.fixed_reward;
            }
            let chains = match target {
                ChainId::One => [params, *opponent],
                ChainId::Two => [*opponent, params],
            };
            let result = engine.evaluate(market, &chains[0], &chains[1]);
            let (net_revenue, excluded, outcome) = match result {
                Err(e) => (None, Some(e.to_string()), None),
                Ok(o) => {
                    let s = o.summary();
                    if !s.converged {
                        (None, Some("did not converge".into()), None)
                    } else if s.validity.is_blocking() {
                        (None, Some(s.validity.to_string()), None)
                    } else {
                        (Some(s.chain(target).net_revenue), None, Some(o))
                    }
                }
            };
            let point = GridPoint {
                levers,
                params,
                net_revenue,
                excluded,
            };
            (point, outcome)
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, (p, _)) in evaluated.iter().enumerate() {
        if let Some(v) = p.net_revenue {
            if best.is_none_or(|b| v > evaluated[b].0.net_revenue.unwrap_or(f64::NEG_INFINITY)) {
                best = Some(i);
            }
        }
    }
    let total = evaluated.len();
    let excluded = evaluated
        .iter()
        .filter(|(p, _)| p.net_revenue.is_none())
        .count();
    let Some(b) = best else {
        return Err(PolicyError::NoFeasiblePolicy { evaluated: total });
    };
    let (best_point, best_outcome) = evaluated[b].clone();
    Ok(PolicyOptimum {
        target,
        best: best_point.params,
        net_revenue: best_point.net_revenue.expect("best point is admissible"),
        outcome: best_outcome.expect("admissible points keep their outcome"),
        evaluated: total,
        excluded,
        points: evaluated.into_iter().map(|(p, _)| p).collect(),
    })
}
