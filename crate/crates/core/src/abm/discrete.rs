//! Small finite games with explicitly listed agents.
//!
//! Unlike the continuum-style simulator, an agent's network benefit counts
//! only the *other* users of a chain, and agents may carry arbitrary
//! per-chain transport costs or be locked to one chain. Agents best-respond
//! in index order (honest first, then farmers) until a full sweep changes
//! nothing.

use serde::{Deserialize, Serialize};

use super::{
    best_option, farmer_best_count, farmer_caps, option_utility, SimChainOutcome, SimError,
};
use crate::model::{farmer_unit_cost, ActorChoice, ChainId, ChainParams, MarketParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteHonest {
    /// Transport cost of using chain 1 and chain 2.
    pub transport: [f64; 2],
    /// Agents locked to a chain never abstain or switch.
    #[serde(default)]
    pub locked: Option<ChainId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteGame {
    pub market: MarketParams,
    pub chains: [ChainParams; 2],
    pub honest: Vec<DiscreteHonest>,
    pub max_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteHonestOutcome {
    pub choice: ActorChoice,
    pub utility: f64,
    /// Utility of each option in [`ActorChoice::all`] order at the final
    /// state; `None` where the option is unavailable.
    pub option_utilities: [Option<f64>; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteOutcome {
    pub chains: [SimChainOutcome; 2],
    pub honest: Vec<DiscreteHonestOutcome>,
    pub farmer_accounts: Vec<[u64; 2]>,
    /// Sum over farmers of per-account `r - lambda*c`.
    pub farmer_profit: f64,
    /// Issuer expense on sybil accounts minus what they paid in, per chain.
    pub farmer_loss: [f64; 2],
    pub sweeps: usize,
    pub converged: bool,
}

impl DiscreteOutcome {
    pub fn chain(&self, id: ChainId) -> &SimChainOutcome {
        &self.chains[id.index()]
    }
}

struct Tally {
    users: [f64; 2],
    eligible: [f64; 2],
    accounts: [f64; 2],
}

impl Tally {
    fn of(choices: &[ActorChoice], accounts: &[[u64; 2]]) -> Tally {
        let mut t = Tally {
            users: [0.0; 2],
            eligible: [0.0; 2],
            accounts: [0.0; 2],
        };
        for c in choices {
            if let Some(id) = c.chain {
                t.users[id.index()] += 1.0;
                if c.eligible {
                    t.eligible[id.index()] += 1.0;
                }
            }
        }
        for a in accounts {
            t.accounts[0] += a[0] as f64;
            t.accounts[1] += a[1] as f64;
        }
        t
    }

    /// Userbase and eligible total as seen by an honest agent currently
    /// playing `mine`, excluding the agent itself.
    fn without(&self, mine: ActorChoice) -> ([f64; 2], [f64; 2]) {
        let mut userbase = [
            self.users[0] + self.accounts[0],
            self.users[1] + self.accounts[1],
        ];
        let mut eligible = [
            self.eligible[0] + self.accounts[0],
            self.eligible[1] + self.accounts[1],
        ];
        if let Some(id) = mine.chain {
            userbase[id.index()] -= 1.0;
            if mine.eligible {
                eligible[id.index()] -= 1.0;
            }
        }
        (userbase, eligible)
    }
}

fn join_reward(chain: &ChainParams, others_eligible: f64) -> f64 {
    if chain.budget > 0.0 {
        chain.fixed_reward + chain.budget / (others_eligible + 1.0)
    } else {
        chain.fixed_reward
    }
}

impl DiscreteGame {
    fn option_values(
        &self,
        agent: &DiscreteHonest,
        userbase: [f64; 2],
        others_eligible: [f64; 2],
    ) -> [Option<f64>; 5] {
        let chains = [&self.chains[0], &self.chains[1]];
        let rewards = [
            join_reward(chains[0], others_eligible[0]),
            join_reward(chains[1], others_eligible[1]),
        ];
        ActorChoice::all().map(|o| {
            let available = match o.chain {
                None => agent.locked.is_none(),
                Some(id) => {
                    agent.locked.is_none_or(|l| l == id)
                        && (!o.eligible || chains[id.index()].has_airdrop())
                }
            };
            available.then(|| {
                option_utility(&self.market, chains, agent.transport, userbase, rewards, o)
            })
        })
    }

    pub fn solve(&self) -> Result<DiscreteOutcome, SimError> {
        self.market.validate()?;
        for c in &self.chains {
            c.validate()?;
        }
        let chains = [&self.chains[0], &self.chains[1]];
        let caps = farmer_caps(&self.market, chains);
        let mut choices = vec![ActorChoice::NONE; self.honest.len()];
        let mut accounts = vec![[0u64; 2]; caps.len()];
        let mut sweeps = 0;
        let mut converged = false;

        while sweeps < self.max_sweeps.max(1) {
            sweeps += 1;
            let mut changed = false;
            for (k, agent) in self.honest.iter().enumerate() {
                let tally = Tally::of(&choices, &accounts);
                let (userbase, others_eligible) = tally.without(choices[k]);
                let rewards = [
                    join_reward(chains[0], others_eligible[0]),
                    join_reward(chains[1], others_eligible[1]),
                ];
                let (best, _) = best_option(
                    &self.market,
                    chains,
                    agent.transport,
                    agent.locked,
                    userbase,
                    rewards,
                );
                if best != choices[k] {
                    choices[k] = best;
                    changed = true;
                }
            }
            for (j, cap) in caps.iter().enumerate() {
                for id in ChainId::BOTH {
                    let i = id.index();
                    let tally = Tally::of(&choices, &accounts);
                    let others = tally.eligible[i] + tally.accounts[i] - accounts[j][i] as f64;
                    let n = farmer_best_count(&self.market, chains[i], id, others, cap[i])?;
                    if n != accounts[j][i] {
                        accounts[j][i] = n;
                        changed = true;
                    }
                }
            }
            if !changed {
                converged = true;
                break;
            }
        }

        let tally = Tally::of(&choices, &accounts);
        let outcome_chains = [0, 1].map(|i| {
            SimChainOutcome::settle(
                &self.market,
                chains[i],
                tally.users[i],
                tally.eligible[i],
                tally.accounts[i],
            )
        });
        let honest = self
            .honest
            .iter()
            .zip(&choices)
            .map(|(agent, &choice)| {
                let (userbase, others_eligible) = tally.without(choice);
                let option_utilities = self.option_values(agent, userbase, others_eligible);
                let slot = ActorChoice::all()
                    .iter()
                    .position(|o| *o == choice)
                    .expect("choice is one of the five options");
                DiscreteHonestOutcome {
                    choice,
                    utility: option_utilities[slot].unwrap_or(0.0),
                    option_utilities,
                }
            })
            .collect();

        let mut farmer_profit = 0.0;
        let mut farmer_loss = [0.0; 2];
        for i in 0..2 {
            let c = chains[i];
            let total = tally.eligible[i] + tally.accounts[i];
            if total == 0.0 {
                continue;
            }
            let reward = c.fixed_reward + c.budget / total;
            let unit = farmer_unit_cost(&self.market, c);
            let sybils = tally.accounts[i];
            farmer_profit += sybils * (reward - unit);
            let expense_per_account = c.per_account_expense() + c.budget / total;
            farmer_loss[i] = sybils * (expense_per_account - unit);
        }

        Ok(DiscreteOutcome {
            chains: outcome_chains,
            honest,
            farmer_accounts: accounts,
            farmer_profit,
            farmer_loss,
            sweeps,
            converged,
        })
    }
}
