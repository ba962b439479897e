use airdroplab_core::abm::{max_regret, monte_carlo};
use airdroplab_core::equilibrium::TOLERANCE;
use airdroplab_core::model::effective_sybil_capacity;
use airdroplab_core::policy::{oracle_gap, sample_valid_scenarios, Scenario, ScenarioConstraints};
use airdroplab_core::{
    find_fixed_point, sample_population, solve_market, ActorChoice, ChainId, ChainParams, DropKind,
    MarketParams, PopulationMode, SimConfig, SybilCap,
};

fn market(h: u64, gamma: f64) -> MarketParams {
    MarketParams {
        value: 0.6,
        network_gamma: gamma,
        complementarity_delta: 1.0,
        honest_count: h,
        farmer_count: 4,
        farmer_cost_scale: 0.5,
        sybil_cap: SybilCap::Finite(3),
    }
}

fn fixed_drop(resist: f64) -> ChainParams {
    ChainParams {
        fee: 0.1,
        eligibility_cost: 0.1,
        fixed_reward: 0.08,
        budget: 0.0,
        issuance_cost: 0.02,
        resist,
    }
}

#[test]
fn grid_population_is_the_midpoint_grid() {
    let pop = sample_population(&market(4, 0.0), &SimConfig::default());
    assert_eq!(pop.honest_biases, vec![0.125, 0.375, 0.625, 0.875]);
    assert!(sample_population(&market(0, 0.0), &SimConfig::default())
        .honest_biases
        .is_empty());
}

#[test]
fn random_population_is_reproducible() {
    let cfg = SimConfig {
        population_mode: PopulationMode::Random,
        seed: 9,
        ..Default::default()
    };
    let m = market(1000, 0.0);
    assert_eq!(sample_population(&m, &cfg), sample_population(&m, &cfg));
}

#[test]
fn empty_market_converges_immediately() {
    let m = MarketParams {
        honest_count: 0,
        farmer_count: 0,
        ..market(0, 0.0)
    };
    let cfg = SimConfig::default();
    let out = find_fixed_point(
        &sample_population(&m, &cfg),
        &m,
        &fixed_drop(0.0),
        &ChainParams::no_drop(0.1),
        &cfg,
    )
    .unwrap();
    assert!(out.converged);
    assert_eq!(out.iterations_used, 1);
    for c in out.chains {
        assert_eq!(c.userbase, 0.0);
        assert_eq!(c.net_revenue, 0.0);
    }
}

#[test]
fn no_network_effects_need_at_most_two_rounds() {
    let m = market(500, 0.0);
    let cfg = SimConfig::default();
    let out = find_fixed_point(
        &sample_population(&m, &cfg),
        &m,
        &fixed_drop(0.5),
        &ChainParams::no_drop(0.2),
        &cfg,
    )
    .unwrap();
    assert!(out.converged);
    assert!(out.iterations_used <= 2, "{}", out.iterations_used);
}

#[test]
fn threshold_rule_without_airdrops() {
    let m = market(10, 0.0);
    let cfg = SimConfig::default();
    let out = find_fixed_point(
        &sample_population(&m, &cfg),
        &m,
        &ChainParams::no_drop(0.1),
        &ChainParams::no_drop(5.0),
        &cfg,
    )
    .unwrap();
    let pop = sample_population(&m, &cfg);
    for (bias, choice) in pop.honest_biases.iter().zip(&out.honest_choices) {
        let expected = if *bias < 0.5 {
            ActorChoice::on(ChainId::One, false)
        } else {
            ActorChoice::NONE
        };
        assert_eq!(*choice, expected, "bias {bias}");
    }
}

#[test]
fn farmers_stop_at_the_break_even_total() {
    // Two honest users always join and opt in; B / (lambda*c) = 4 eligible.
    let m = MarketParams {
        value: 2.0,
        network_gamma: 0.0,
        complementarity_delta: 1.0,
        honest_count: 2,
        farmer_count: 1,
        farmer_cost_scale: 0.5,
        sybil_cap: SybilCap::Unbounded,
    };
    let drop = ChainParams {
        fee: 0.0,
        eligibility_cost: 1.0,
        fixed_reward: 0.0,
        budget: 2.0,
        issuance_cost: 0.0,
        resist: 0.0,
    };
    let cfg = SimConfig::default();
    let out = find_fixed_point(
        &sample_population(&m, &cfg),
        &m,
        &drop,
        &ChainParams::no_drop(100.0),
        &cfg,
    )
    .unwrap();
    assert!(out.converged);
    assert_eq!(out.chain(ChainId::One).honest_eligible, 2.0);
    assert_eq!(out.chain(ChainId::One).farmer_accounts, 2.0);
}

#[test]
fn reference_proportional_scenario_matches_farmer_mass() {
    let s = Scenario {
        market: MarketParams {
            value: 0.55,
            network_gamma: 0.4 / 10_000.0,
            complementarity_delta: 1.0,
            honest_count: 10_000,
            farmer_count: 10,
            farmer_cost_scale: 0.5,
            sybil_cap: SybilCap::Unbounded,
        },
        chain1: ChainParams {
            fee: 0.05,
            eligibility_cost: 1.0,
            fixed_reward: 0.0,
            budget: 500.0,
            issuance_cost: 0.0,
            resist: 0.0,
        },
        chain2: ChainParams::no_drop(0.5),
    };
    let closed = solve_market(&s.market, &s.chain1, &s.chain2).unwrap();
    assert!(closed.validity.is_clean(), "{}", closed.validity);
    let gap = oracle_gap(&s, &SimConfig::default()).unwrap();
    assert!(gap.agrees(), "{gap:?}");
    assert!(gap.farmer_mass * 10_000.0 <= 10.0);
}

#[test]
fn no_agent_regrets_a_converged_outcome() {
    let constraints = ScenarioConstraints {
        drop_kind: DropKind::Fixed,
        opponent_kind: DropKind::Proportional,
        honest_count: Some(1_000),
        ..Default::default()
    };
    let cfg = SimConfig::default();
    for s in sample_valid_scenarios(10, 21, &constraints).unwrap() {
        let pop = sample_population(&s.market, &cfg);
        let out = find_fixed_point(&pop, &s.market, &s.chain1, &s.chain2, &cfg).unwrap();
        assert!(out.converged);
        let (honest, farmer) = max_regret(&pop, &s.market, &s.chain1, &s.chain2, &out);
        assert!(honest <= 1e-6, "honest regret {honest}");
        assert!(farmer <= 1e-6, "farmer regret {farmer}");
    }
}

#[test]
fn choices_are_conserved_and_caps_respected() {
    let m = market(777, 0.3 / 777.0);
    let cfg = SimConfig::default();
    let c1 = fixed_drop(0.5);
    let c2 = ChainParams {
        budget: 5.0,
        fixed_reward: 0.0,
        ..fixed_drop(0.25)
    };
    let out = find_fixed_point(&sample_population(&m, &cfg), &m, &c1, &c2, &cfg).unwrap();
    let none = out
        .honest_choices
        .iter()
        .filter(|c| c.chain.is_none())
        .count() as f64;
    assert_eq!(
        out.chains[0].honest_users + out.chains[1].honest_users + none,
        777.0
    );
    for (i, c) in [c1, c2].iter().enumerate() {
        assert!(
            out.chains[i].farmer_accounts <= effective_sybil_capacity(&m, c.resist) + TOLERANCE
        );
    }
}

#[test]
fn hybrid_drops_run_in_the_simulator() {
    let m = market(300, 0.2 / 300.0);
    let hybrid = ChainParams {
        budget: 3.0,
        ..fixed_drop(0.0)
    };
    let cfg = SimConfig::default();
    assert!(solve_market(&m, &hybrid, &ChainParams::no_drop(0.1)).is_err());
    let out = find_fixed_point(
        &sample_population(&m, &cfg),
        &m,
        &hybrid,
        &ChainParams::no_drop(0.1),
        &cfg,
    )
    .unwrap();
    assert!(out.converged);
    assert!(out.chain(ChainId::One).farmer_accounts > 0.0);
}

#[test]
fn runs_are_deterministic() {
    let m = market(2000, 0.5 / 2000.0);
    let cfg = SimConfig {
        population_mode: PopulationMode::Random,
        seed: 5,
        replications: 3,
        ..Default::default()
    };
    let a = monte_carlo(&m, &fixed_drop(0.25), &ChainParams::no_drop(0.1), &cfg).unwrap();
    let b = monte_carlo(&m, &fixed_drop(0.25), &ChainParams::no_drop(0.1), &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_replication_has_zero_stderr() {
    let m = market(2000, 0.5 / 2000.0);
    let cfg = SimConfig {
        population_mode: PopulationMode::Random,
        seed: 5,
        ..Default::default()
    };
    let summary = monte_carlo(&m, &fixed_drop(0.25), &ChainParams::no_drop(0.1), &cfg).unwrap();
    let single = find_fixed_point(
        &sample_population(&m, &cfg),
        &m,
        &fixed_drop(0.25),
        &ChainParams::no_drop(0.1),
        &cfg,
    )
    .unwrap();
    let users = summary.chains[0].honest_users;
    assert_eq!(users.mean, single.chains[0].honest_users);
    assert_eq!(users.stderr, 0.0);
}

#[test]
fn random_populations_scatter_around_the_closed_form_share() {
    let m = MarketParams {
        value: 0.4,
        ..market(10_000, 0.3 / 10_000.0)
    };
    let (c1, c2) = (fixed_drop(0.5), ChainParams::no_drop(0.2));
    let cfg = SimConfig {
        population_mode: PopulationMode::Random,
        seed: 100,
        replications: 100,
        ..Default::default()
    };
    let summary = monte_carlo(&m, &c1, &c2, &cfg).unwrap();
    assert_eq!(summary.converged_runs, 100);
    let closed = solve_market(&m, &c1, &c2).unwrap();
    assert!(closed.validity.is_clean(), "{}", closed.validity);
    for i in 0..2 {
        let s = summary.chains[i].honest_users;
        let target = closed.chains[i].honest_users;
        assert!(
            (s.mean - target).abs() <= 3.0 * s.stderr,
            "chain {i}: mean {} stderr {} closed form {target}",
            s.mean,
            s.stderr
        );
    }
}
