//! Finite-agent best-response simulator.
//!
//! Honest agents sit on the bias axis and pick one of five options against
//! an *expected* aggregate state; farmers then pick per-chain account counts
//! one at a time (each sees the others' current counts). The expected state
//! is damped toward the realized one until the two agree, which is the
//! rational-expectations fixed point the closed forms describe.

pub mod discrete;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::RevenueBreakdown;
use crate::model::{
    farmer_unit_cost, honest_utility_at_distance, ActorChoice, ChainId, ChainParams, MarketParams,
    ModelError, SybilCap,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("{chain}: farming is profitable for every account and the sybil cap is unbounded")]
    UnboundedSybils { chain: ChainId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PopulationMode {
    /// Deterministic midpoint grid `(j + 0.5) / H`.
    #[default]
    Grid,
    /// Uniform iid draws from the configured seed.
    Random,
}

/// Aggregates agents form expectations about.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedState {
    pub userbase: [f64; 2],
    pub eligible_total: [f64; 2],
    pub farmer_mass: [f64; 2],
}

impl ExpectedState {
    fn max_abs_diff(&self, other: &ExpectedState) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            worst = worst
                .max((self.userbase[i] - other.userbase[i]).abs())
                .max((self.eligible_total[i] - other.eligible_total[i]).abs())
                .max((self.farmer_mass[i] - other.farmer_mass[i]).abs());
        }
        worst
    }

    fn blend(&self, realized: &ExpectedState, damping: f64) -> ExpectedState {
        let mix = |a: [f64; 2], b: [f64; 2]| {
            [
                (1.0 - damping) * a[0] + damping * b[0],
                (1.0 - damping) * a[1] + damping * b[1],
            ]
        };
        ExpectedState {
            userbase: mix(self.userbase, realized.userbase),
            eligible_total: mix(self.eligible_total, realized.eligible_total),
            farmer_mass: mix(self.farmer_mass, realized.farmer_mass),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub population_mode: PopulationMode,
    pub seed: u64,
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub replications: usize,
    /// Starting expectation; the first best response replaces it outright.
    pub initial_expectation: ExpectedState,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            population_mode: PopulationMode::Grid,
            seed: 0,
            damping: 0.5,
            tolerance: 1e-9,
            max_iterations: 10_000,
            replications: 1,
            initial_expectation: ExpectedState::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(SimError::Config(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(SimError::Config(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(SimError::Config("max_iterations must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(SimError::Config("replications must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentPopulation {
    /// Sorted ascending.
    pub honest_biases: Vec<f64>,
    pub farmer_ids: Vec<usize>,
}

impl AgentPopulation {
    pub fn is_empty(&self) -> bool {
        self.honest_biases.is_empty() && self.farmer_ids.is_empty()
    }
}

pub fn sample_population(market: &MarketParams, config: &SimConfig) -> AgentPopulation {
    let h = market.honest_count as usize;
    let mut honest_biases: Vec<f64> = match config.population_mode {
        PopulationMode::Grid => (0..h).map(|j| (j as f64 + 0.5) / h as f64).collect(),
        PopulationMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            (0..h).map(|_| rng.gen::<f64>()).collect()
        }
    };
    honest_biases.sort_by(f64::total_cmp);
    AgentPopulation {
        honest_biases,
        farmer_ids: (0..market.farmer_count as usize).collect(),
    }
}

/// Per-chain aggregate results of one best-response round or of a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SimChainOutcome {
    pub honest_users: f64,
    pub honest_eligible: f64,
    pub farmer_accounts: f64,
    pub userbase: f64,
    pub revenue: RevenueBreakdown,
    pub gross_revenue: f64,
    pub net_revenue: f64,
}

impl SimChainOutcome {
    fn settle(
        market: &MarketParams,
        chain: &ChainParams,
        honest_users: f64,
        honest_eligible: f64,
        farmer_accounts: f64,
    ) -> Self {
        let revenue = RevenueBreakdown {
            fees: chain.fee * honest_users,
            honest_eligibility: chain.eligibility_cost * honest_eligible,
            farmer_eligibility: farmer_unit_cost(market, chain) * farmer_accounts,
        };
        let eligible_total = honest_eligible + farmer_accounts;
        let budget_paid = if eligible_total > 0.0 {
            chain.budget
        } else {
            0.0
        };
        let net_revenue =
            revenue.gross() - chain.per_account_expense() * eligible_total - budget_paid;
        SimChainOutcome {
            honest_users,
            honest_eligible,
            farmer_accounts,
            userbase: honest_users + farmer_accounts,
            revenue,
            gross_revenue: revenue.gross(),
            net_revenue,
        }
    }
}

/// Realized result of a best-response round.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizedState {
    pub chains: [SimChainOutcome; 2],
    pub honest_choices: Vec<ActorChoice>,
    pub farmer_accounts: Vec<[u64; 2]>,
}

impl RealizedState {
    pub fn aggregates(&self) -> ExpectedState {
        let mut s = ExpectedState::default();
        for i in 0..2 {
            let c = &self.chains[i];
            s.userbase[i] = c.userbase;
            s.eligible_total[i] = c.honest_eligible + c.farmer_accounts;
            s.farmer_mass[i] = c.farmer_accounts;
        }
        s
    }
}

/// Reward an account expects when the chain's eligible total is `total`.
/// An account never shares the budget with fewer than one account (itself).
pub(crate) fn expected_reward(chain: &ChainParams, total: f64) -> f64 {
    if chain.budget > 0.0 {
        chain.fixed_reward + chain.budget / total.max(1.0)
    } else {
        chain.fixed_reward
    }
}

/// Per-farmer, per-chain caps: the first `ceil(rho * F)` farmers are
/// detected and keep a single account. `None` is unbounded.
pub(crate) fn farmer_caps(
    market: &MarketParams,
    chains: [&ChainParams; 2],
) -> Vec<[Option<u64>; 2]> {
    let f = market.farmer_count as usize;
    let detected: Vec<usize> = chains
        .iter()
        .map(|c| ((c.resist * f as f64).ceil() as usize).min(f))
        .collect();
    (0..f)
        .map(|j| {
            let cap = |i: usize| {
                if j < detected[i] {
                    Some(1)
                } else {
                    match market.sybil_cap {
                        SybilCap::Finite(s) => Some(s),
                        SybilCap::Unbounded => None,
                    }
                }
            };
            [cap(0), cap(1)]
        })
        .collect()
}

/// Largest account count whose marginal account still breaks even, given
/// `others` eligible accounts already on the chain.
pub(crate) fn farmer_best_count(
    market: &MarketParams,
    chain: &ChainParams,
    id: ChainId,
    others: f64,
    cap: Option<u64>,
) -> Result<u64, SimError> {
    if !chain.has_airdrop() {
        return Ok(0);
    }
    let unit_cost = farmer_unit_cost(market, chain);
    let margin = chain.fixed_reward - unit_cost;
    let unlimited = |cap: Option<u64>| cap.ok_or(SimError::UnboundedSybils { chain: id });
    if chain.budget == 0.0 {
        // fixed drop: strict profitability
        return if margin > 0.0 { unlimited(cap) } else { Ok(0) };
    }
    if margin >= 0.0 {
        return unlimited(cap);
    }
    let slack = 1e-12 * (1.0 + chain.budget.abs());
    let profitable =
        |n: u64| chain.fixed_reward + chain.budget / (others + n as f64) - unit_cost >= -slack;
    let threshold = chain.budget / (-margin) - others;
    let mut n = if threshold.is_finite() && threshold > 0.0 {
        threshold.floor() as u64
    } else {
        0
    };
    if let Some(c) = cap {
        n = n.min(c);
    }
    while n > 0 && !profitable(n) {
        n -= 1;
    }
    while cap.is_none_or(|c| n < c) && profitable(n + 1) {
        n += 1;
    }
    Ok(n)
}

fn options_for(
    chains: [&ChainParams; 2],
    locked: Option<ChainId>,
) -> impl Iterator<Item = ActorChoice> + '_ {
    ActorChoice::all()
        .into_iter()
        .filter(move |o| match o.chain {
            None => locked.is_none(),
            Some(id) => {
                locked.is_none_or(|l| l == id) && (!o.eligible || chains[id.index()].has_airdrop())
            }
        })
}

/// Best option for an honest agent at the given distances; ties keep the
/// earlier option in [`ActorChoice::all`] order.
pub(crate) fn best_option(
    market: &MarketParams,
    chains: [&ChainParams; 2],
    distances: [f64; 2],
    locked: Option<ChainId>,
    userbase: [f64; 2],
    rewards: [f64; 2],
) -> (ActorChoice, f64) {
    let mut best = (ActorChoice::NONE, f64::NEG_INFINITY);
    for option in options_for(chains, locked) {
        let u = option_utility(market, chains, distances, userbase, rewards, option);
        if u > best.1 {
            best = (option, u);
        }
    }
    best
}

pub(crate) fn option_utility(
    market: &MarketParams,
    chains: [&ChainParams; 2],
    distances: [f64; 2],
    userbase: [f64; 2],
    rewards: [f64; 2],
    option: ActorChoice,
) -> f64 {
    match option.chain {
        None => 0.0,
        Some(id) => {
            let i = id.index();
            honest_utility_at_distance(
                market,
                chains[i],
                true,
                distances[i],
                option.eligible,
                userbase[i],
                rewards[i],
            )
        }
    }
}

/// One synchronous honest round against `expected`, followed by a
/// sequential farmer round against the realized honest eligibility and the
/// other farmers' current counts (`previous_accounts`).
pub fn best_response_step(
    population: &AgentPopulation,
    market: &MarketParams,
    chain1: &ChainParams,
    chain2: &ChainParams,
    expected: &ExpectedState,
    previous_accounts: &[[u64; 2]],
) -> Result<RealizedState, SimError> {
    let chains = [chain1, chain2];
    let rewards = [
        expected_reward(chain1, expected.eligible_total[0]),
        expected_reward(chain2, expected.eligible_total[1]),
    ];
    let mut users = [0.0f64; 2];
    let mut eligible = [0.0f64; 2];
    let honest_choices: Vec<ActorChoice> = population
        .honest_biases
        .iter()
        .map(|&x| {
            let (choice, _) = best_option(
                market,
                chains,
                [x, 1.0 - x],
                None,
                expected.userbase,
                rewards,
            );
            choice
        })
        .collect();
    for choice in &honest_choices {
        if let Some(id) = choice.chain {
            users[id.index()] += 1.0;
            if choice.eligible {
                eligible[id.index()] += 1.0;
            }
        }
    }

    let caps = farmer_caps(market, chains);
    let mut accounts: Vec<[u64; 2]> = if previous_accounts.len() == caps.len() {
        previous_accounts.to_vec()
    } else {
        vec![[0, 0]; caps.len()]
    };
    let mut totals = [0.0f64; 2];
    for a in &accounts {
        totals[0] += a[0] as f64;
        totals[1] += a[1] as f64;
    }
    for (j, cap) in caps.iter().enumerate() {
        for id in ChainId::BOTH {
            let i = id.index();
            let mine = accounts[j][i] as f64;
            let others = eligible[i] + totals[i] - mine;
            let n = farmer_best_count(market, chains[i], id, others, cap[i])?;
            totals[i] += n as f64 - mine;
            accounts[j][i] = n;
        }
    }

    Ok(RealizedState {
        chains: [
            SimChainOutcome::settle(market, chain1, users[0], eligible[0], totals[0]),
            SimChainOutcome::settle(market, chain2, users[1], eligible[1], totals[1]),
        ],
        honest_choices,
        farmer_accounts: accounts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutcome {
    pub chains: [SimChainOutcome; 2],
    pub iterations_used: usize,
    pub converged: bool,
    pub residual: f64,
    #[serde(skip)]
    pub final_expectation: ExpectedState,
    #[serde(skip)]
    pub honest_choices: Vec<ActorChoice>,
    #[serde(skip)]
    pub farmer_accounts: Vec<[u64; 2]>,
}

impl SimOutcome {
    pub fn chain(&self, id: ChainId) -> &SimChainOutcome {
        &self.chains[id.index()]
    }
}

/// Damped best-response iteration from `config.initial_expectation`.
/// Non-convergence is reported through `converged` and `residual`.
pub fn find_fixed_point(
    population: &AgentPopulation,
    market: &MarketParams,
    chain1: &ChainParams,
    chain2: &ChainParams,
    config: &SimConfig,
) -> Result<SimOutcome, SimError> {
    config.validate()?;
    market.validate()?;
    chain1.validate()?;
    chain2.validate()?;
    let mut expected = config.initial_expectation;
    let mut accounts: Vec<[u64; 2]> = Vec::new();
    for iteration in 1..=config.max_iterations {
        let realized =
            best_response_step(population, market, chain1, chain2, &expected, &accounts)?;
        let aggregates = realized.aggregates();
        let residual = aggregates.max_abs_diff(&expected);
        let converged = residual <= config.tolerance;
        let done = converged || iteration == config.max_iterations;
        if done {
            return Ok(SimOutcome {
                chains: realized.chains,
                iterations_used: iteration,
                converged,
                residual,
                final_expectation: expected,
                honest_choices: realized.honest_choices,
                farmer_accounts: realized.farmer_accounts,
            });
        }
        expected = if iteration == 1 {
            aggregates
        } else {
            expected.blend(&aggregates, config.damping)
        };
        accounts = realized.farmer_accounts;
    }
    unreachable!("the final iteration always returns")
}

/// Largest utility gain any single agent could get by deviating, evaluated
/// at the realized aggregates of `outcome`: `(honest, farmer)`.
pub fn max_regret(
    population: &AgentPopulation,
    market: &MarketParams,
    chain1: &ChainParams,
    chain2: &ChainParams,
    outcome: &SimOutcome,
) -> (f64, f64) {
    let chains = [chain1, chain2];
    let userbase = [outcome.chains[0].userbase, outcome.chains[1].userbase];
    let totals = [
        outcome.chains[0].honest_eligible + outcome.chains[0].farmer_accounts,
        outcome.chains[1].honest_eligible + outcome.chains[1].farmer_accounts,
    ];
    let rewards = [
        expected_reward(chain1, totals[0]),
        expected_reward(chain2, totals[1]),
    ];
    let mut honest: f64 = 0.0;
    for (&x, &choice) in population.honest_biases.iter().zip(&outcome.honest_choices) {
        let d = [x, 1.0 - x];
        let (_, best) = best_option(market, chains, d, None, userbase, rewards);
        let mine = option_utility(market, chains, d, userbase, rewards, choice);
        honest = honest.max(best - mine);
    }
    let caps = farmer_caps(market, chains);
    let mut farmer: f64 = 0.0;
    for (acc, cap) in outcome.farmer_accounts.iter().zip(&caps) {
        for i in 0..2 {
            let c = chains[i];
            if !c.has_airdrop() {
                continue;
            }
            // per-account payoffs: the next account must not pay, the last
            // deployed one must not lose
            let unit = farmer_unit_cost(market, c);
            let n = acc[i] as f64;
            let others = totals[i] - n;
            let gain_add = if cap[i].is_none_or(|m| acc[i] < m) {
                expected_reward(c, others + n + 1.0) - unit
            } else {
                f64::NEG_INFINITY
            };
            let last_account = if n >= 1.0 {
                -(expected_reward(c, others + n) - unit)
            } else {
                f64::NEG_INFINITY
            };
            farmer = farmer.max(gain_add).max(last_account);
        }
    }
    (honest, farmer)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        if values.is_empty() {
            return Stat::default();
        }
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return Stat { mean, stderr: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Stat {
            mean,
            stderr: (var / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ChainStats {
    pub honest_users: Stat,
    pub honest_eligible: Stat,
    pub farmer_accounts: Stat,
    pub userbase: Stat,
    pub gross_revenue: Stat,
    pub net_revenue: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub replications: usize,
    pub converged_runs: usize,
    pub chains: [ChainStats; 2],
    pub iterations_used: Stat,
}

/// Independent RANDOM-population runs with seeds `seed + r`.
pub fn monte_carlo(
    market: &MarketParams,
    chain1: &ChainParams,
    chain2: &ChainParams,
    config: &SimConfig,
) -> Result<MonteCarloSummary, SimError> {
    config.validate()?;
    if config.population_mode != PopulationMode::Random {
        return Err(SimError::Config(
            "monte carlo replications need RANDOM populations".into(),
        ));
    }
    let runs: Vec<SimOutcome> = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| {
            let cfg = SimConfig {
                seed: config.seed.wrapping_add(r),
                ..*config
            };
            let population = sample_population(market, &cfg);
            find_fixed_point(&population, market, chain1, chain2, &cfg)
        })
        .collect::<Result<_, _>>()?;

    let column = |f: &dyn Fn(&SimOutcome) -> f64| Stat::of(&runs.iter().map(f).collect::<Vec<_>>());
    let chain_stats = |i: usize| ChainStats {
        honest_users: column(&|o| o.chains[i].honest_users),
        honest_eligible: column(&|o| o.chains[i].honest_eligible),
        farmer_accounts: column(&|o| o.chains[i].farmer_accounts),
        userbase: column(&|o| o.chains[i].userbase),
        gross_revenue: column(&|o| o.chains[i].gross_revenue),
        net_revenue: column(&|o| o.chains[i].net_revenue),
    };
    Ok(MonteCarloSummary {
        replications: runs.len(),
        converged_runs: runs.iter().filter(|o| o.converged).count(),
        chains: [chain_stats(0), chain_stats(1)],
        iterations_used: column(&|o| o.iterations_used as f64),
    })
}

/// Deterministic helper used by tests and the sampler: a uniform draw in
/// `[lo, hi)` from a ChaCha stream.
pub(crate) fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}
