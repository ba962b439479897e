use serde::Serialize;

use super::{PolicyError, Scenario};
use crate::abm::SimConfig;
use crate::engine::Engine;

/// Acceptable per-capita gap between the closed form and a grid population
/// of `honest_count` agents.
pub fn oracle_tolerance(honest_count: u64) -> f64 {
    (10.0 / honest_count as f64).max(1e-6)
}

/// Largest absolute difference per honest user, over both chains, between
/// the closed-form solution and the agent-based fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleGap {
    pub honest_users: f64,
    pub honest_eligible: f64,
    pub farmer_mass: f64,
    pub gross_revenue: f64,
    pub net_revenue: f64,
    pub tolerance: f64,
    pub converged: bool,
}

impl OracleGap {
    pub fn max(&self) -> f64 {
        [
            self.honest_users,
            self.honest_eligible,
            self.farmer_mass,
            self.gross_revenue,
            self.net_revenue,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn agrees(&self) -> bool {
        self.converged && self.max() <= self.tolerance
    }
}

pub fn oracle_gap(scenario: &Scenario, sim: &SimConfig) -> Result<OracleGap, PolicyError> {
    let Scenario {
        market,
        chain1,
        chain2,
    } = scenario;
    let closed = Engine::ClosedForm
        .evaluate(market, chain1, chain2)?
        .summary();
    let abm = Engine::Abm(*sim)
        .evaluate(market, chain1, chain2)?
        .summary();
    let scale = market.honest().max(1.0);
    let gap = |f: fn(&crate::engine::ChainSummary) -> f64| {
        closed
            .chains
            .iter()
            .zip(&abm.chains)
            .map(|(a, b)| {
                let (x, y) = (f(a), f(b));
                if x == y {
                    0.0
                } else {
                    (x - y).abs() / scale
                }
            })
            .fold(0.0, f64::max)
    };
    Ok(OracleGap {
        honest_users: gap(|c| c.honest_users),
        honest_eligible: gap(|c| c.honest_eligible),
        farmer_mass: gap(|c| c.farmer_mass),
        gross_revenue: gap(|c| c.gross_revenue),
        net_revenue: gap(|c| c.net_revenue),
        tolerance: oracle_tolerance(market.honest_count),
        converged: abm.converged,
    })
}
