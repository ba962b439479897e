//! Equilibrium solver, agent-based oracle and policy lab for a two-chain
//! market where honest users pick a chain (Hotelling style, with network
//! effects) and farmers run sybil accounts to collect airdrops.
//!
//! * [`model`] holds parameters and the primitive payoff formulas.
//! * [`equilibrium`] solves pure fixed / proportional policies in closed form.
//! * [`abm`] finds the same equilibria by best-response iteration over
//!   finite agent populations, and handles hybrid policies.
//! * [`policy`] sweeps parameters, samples scenarios, checks the optimal
//!   sybil-resistance results and grid-searches issuer levers.
//! * [`metrics`] computes cross-chain ratio series from daily metric CSVs.

pub mod abm;
pub mod engine;
pub mod equilibrium;
pub mod metrics;
pub mod model;
pub mod policy;

pub use abm::{
    discrete::{DiscreteGame, DiscreteHonest, DiscreteOutcome},
    find_fixed_point, monte_carlo, sample_population, AgentPopulation, PopulationMode, SimConfig,
    SimError, SimOutcome,
};
pub use engine::{Engine, EngineError, EngineKind, EngineOutcome, OutcomeSummary};
pub use equilibrium::{solve_market, EquilibriumError, EquilibriumOutcome, Flag, Validity};
pub use metrics::{compute_ratio_series, window_stats, MetricsError, MetricsSeries};
pub use model::{ActorChoice, ChainId, ChainParams, DropKind, MarketParams, ModelError, SybilCap};
pub use policy::{
    optimize_policy, sample_valid_scenarios, sweep, verify_theorem_fixed,
    verify_theorem_proportional, LeverGrid, PolicyError, Scenario, ScenarioConstraints, SweepSpec,
    VerificationReport,
};
