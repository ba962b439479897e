//! One entry point over the three ways of evaluating a market: closed form,
//! agent-based fixed point, and explicit discrete games.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abm::discrete::{DiscreteGame, DiscreteHonest, DiscreteOutcome};
use crate::abm::{find_fixed_point, sample_population, SimConfig, SimError, SimOutcome};
use crate::equilibrium::{solve_market, EquilibriumError, EquilibriumOutcome, Validity};
use crate::model::{ChainId, ChainParams, DropKind, MarketParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("discrete population has {agents} honest agents but honest_count_H is {declared}")]
    PopulationMismatch { agents: usize, declared: u64 },
}

/// Engine selector as it appears in sweep specs and scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EngineKind {
    #[default]
    ClosedForm,
    Abm,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Engine {
    ClosedForm,
    /// Closed form for pure policies, agent-based oracle for hybrids.
    ClosedFormOrAbm(SimConfig),
    Abm(SimConfig),
    Discrete {
        honest: Vec<DiscreteHonest>,
        max_sweeps: usize,
    },
}

impl Engine {
    pub fn from_kind(kind: EngineKind, sim: SimConfig) -> Engine {
        match kind {
            EngineKind::ClosedForm => Engine::ClosedForm,
            EngineKind::Abm => Engine::Abm(sim),
        }
    }

    pub fn evaluate(
        &self,
        market: &MarketParams,
        chain1: &ChainParams,
        chain2: &ChainParams,
    ) -> Result<EngineOutcome, EngineError> {
        match self {
            Engine::ClosedForm => Ok(EngineOutcome::ClosedForm(solve_market(
                market, chain1, chain2,
            )?)),
            Engine::ClosedFormOrAbm(sim) => {
                let hybrid = [chain1, chain2]
                    .iter()
                    .any(|c| c.kind() == DropKind::Hybrid);
                if hybrid {
                    Engine::Abm(*sim).evaluate(market, chain1, chain2)
                } else {
                    Engine::ClosedForm.evaluate(market, chain1, chain2)
                }
            }
            Engine::Abm(sim) => {
                let population = sample_population(market, sim);
                Ok(EngineOutcome::Abm(find_fixed_point(
                    &population,
                    market,
                    chain1,
                    chain2,
                    sim,
                )?))
            }
            Engine::Discrete { honest, max_sweeps } => {
                if honest.len() as u64 != market.honest_count {
                    return Err(EngineError::PopulationMismatch {
                        agents: honest.len(),
                        declared: market.honest_count,
                    });
                }
                let game = DiscreteGame {
                    market: *market,
                    chains: [*chain1, *chain2],
                    honest: honest.clone(),
                    max_sweeps: *max_sweeps,
                };
                Ok(EngineOutcome::Discrete(game.solve()?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "engine", rename_all = "snake_case")]
pub enum EngineOutcome {
    ClosedForm(EquilibriumOutcome),
    Abm(SimOutcome),
    Discrete(DiscreteOutcome),
}

/// Engine-independent per-chain view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainSummary {
    pub honest_users: f64,
    pub honest_eligible: f64,
    pub farmer_mass: f64,
    pub userbase: f64,
    pub gross_revenue: f64,
    pub net_revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeSummary {
    pub chains: [ChainSummary; 2],
    pub validity: Validity,
    pub converged: bool,
}

impl OutcomeSummary {
    pub fn chain(&self, id: ChainId) -> &ChainSummary {
        &self.chains[id.index()]
    }

    /// Usable for optimisation: converged and free of blocking flags.
    pub fn is_admissible(&self) -> bool {
        self.converged && !self.validity.is_blocking()
    }
}

impl EngineOutcome {
    pub fn summary(&self) -> OutcomeSummary {
        match self {
            EngineOutcome::ClosedForm(o) => OutcomeSummary {
                chains: o.chains.map(|c| ChainSummary {
                    honest_users: c.honest_users,
                    honest_eligible: c.honest_eligible,
                    farmer_mass: c.farmer_mass,
                    userbase: c.userbase,
                    gross_revenue: c.gross_revenue,
                    net_revenue: c.net_revenue,
                }),
                validity: o.validity.clone(),
                converged: true,
            },
            EngineOutcome::Abm(o) => OutcomeSummary {
                chains: o.chains.map(sim_summary),
                validity: Validity::new(),
                converged: o.converged,
            },
            EngineOutcome::Discrete(o) => OutcomeSummary {
                chains: o.chains.map(sim_summary),
                validity: Validity::new(),
                converged: o.converged,
            },
        }
    }
}

fn sim_summary(c: crate::abm::SimChainOutcome) -> ChainSummary {
    ChainSummary {
        honest_users: c.honest_users,
        honest_eligible: c.honest_eligible,
        farmer_mass: c.farmer_accounts,
        userbase: c.userbase,
        gross_revenue: c.gross_revenue,
        net_revenue: c.net_revenue,
    }
}
