use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PolicyError, Scenario, RESIST_GRID};
use crate::abm::uniform;
use crate::equilibrium::solve_market;
use crate::model::{ChainParams, DropKind, MarketParams, SybilCap};

/// Sampling stops with an infeasibility error once this many draws have been
/// made and fewer than 1% were accepted.
pub const MAX_DRAWS_BEFORE_GIVING_UP: usize = 100_000;

/// Restrictions on [`sample_valid_scenarios`]. Unset fields are drawn from
/// the default ranges:
///
/// | parameter | range |
/// |---|---|
/// | v | [0.2, 0.8] |
/// | p | [0, 0.3] |
/// | c | [0.01, 0.3] |
/// | delta | [0.2, 2] |
/// | lambda | [0, 1] |
/// | gamma*H | [0, 0.8] |
/// | H | integers 100..=10000 |
/// | B | [0, 0.5*lambda*c*H] |
/// | f, k | [0, 0.3] |
/// | F | multiples of 4 in [0, max_farmer_share*H] |
/// | S | integers 1..=5 |
/// | rho | one of 0, 0.25, 0.5, 0.75, 1 per chain |
///
/// `F` is kept a multiple of 4 so every grid value of rho detects a whole
/// number of farmers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConstraints {
    /// Drop run by chain 1.
    pub drop_kind: DropKind,
    /// Drop run by chain 2.
    pub opponent_kind: DropKind,
    pub farmer_cost_scale: Option<f64>,
    pub honest_count: Option<u64>,
    pub sybil_cap: Option<SybilCap>,
    /// Applied to both chains when set.
    pub resist: Option<f64>,
    pub max_farmer_share: f64,
}

impl Default for ScenarioConstraints {
    fn default() -> Self {
        ScenarioConstraints {
            drop_kind: DropKind::Proportional,
            opponent_kind: DropKind::None,
            farmer_cost_scale: None,
            honest_count: None,
            sybil_cap: None,
            resist: None,
            max_farmer_share: 0.1,
        }
    }
}

fn draw_chain(
    rng: &mut ChaCha8Rng,
    kind: DropKind,
    lambda: f64,
    honest: f64,
    resist: Option<f64>,
) -> ChainParams {
    let fee = uniform(rng, 0.0, 0.3);
    let eligibility_cost = uniform(rng, 0.01, 0.3);
    let resist = resist.unwrap_or_else(|| RESIST_GRID[rng.gen_range(0..RESIST_GRID.len())]);
    let mut chain = ChainParams {
        fee,
        eligibility_cost,
        fixed_reward: 0.0,
        budget: 0.0,
        issuance_cost: 0.0,
        resist,
    };
    match kind {
        DropKind::None => {}
        DropKind::Fixed => {
            chain.fixed_reward = uniform(rng, 0.0, 0.3);
            chain.issuance_cost = uniform(rng, 0.0, 0.3);
        }
        DropKind::Proportional => {
            chain.budget = uniform(rng, 0.0, 0.5 * lambda * eligibility_cost * honest);
        }
        DropKind::Hybrid => unreachable!("hybrids are rejected before sampling"),
    }
    chain
}

fn draw(rng: &mut ChaCha8Rng, constraints: &ScenarioConstraints) -> Scenario {
    let honest_count = constraints
        .honest_count
        .unwrap_or_else(|| rng.gen_range(100..=10_000));
    let h = honest_count as f64;
    let farmer_blocks = (constraints.max_farmer_share * h / 4.0).floor() as u64;
    let market = MarketParams {
        value: uniform(rng, 0.2, 0.8),
        network_gamma: uniform(rng, 0.0, 0.8) / h.max(1.0),
        complementarity_delta: uniform(rng, 0.2, 2.0),
        honest_count,
        farmer_count: 4 * rng.gen_range(0..=farmer_blocks),
        farmer_cost_scale: constraints
            .farmer_cost_scale
            .unwrap_or_else(|| uniform(rng, 0.0, 1.0)),
        sybil_cap: constraints
            .sybil_cap
            .unwrap_or_else(|| SybilCap::Finite(rng.gen_range(1..=5))),
    };
    let lambda = market.farmer_cost_scale;
    let chain1 = draw_chain(rng, constraints.drop_kind, lambda, h, constraints.resist);
    let chain2 = draw_chain(
        rng,
        constraints.opponent_kind,
        lambda,
        h,
        constraints.resist,
    );
    Scenario {
        market,
        chain1,
        chain2,
    }
}

fn accepted(s: &Scenario, constraints: &ScenarioConstraints) -> bool {
    s.chain1.kind() == constraints.drop_kind
        && s.chain2.kind() == constraints.opponent_kind
        && solve_market(&s.market, &s.chain1, &s.chain2).is_ok_and(|o| o.validity.is_clean())
}

/// Rejection-sample scenarios whose closed-form solution carries no flags.
/// Deterministic in `seed`.
pub fn sample_valid_scenarios(
    count: usize,
    seed: u64,
    constraints: &ScenarioConstraints,
) -> Result<Vec<Scenario>, PolicyError> {
    if count == 0 {
        return Err(PolicyError::NoScenarios);
    }
    for (name, kind) in [
        ("drop_kind", constraints.drop_kind),
        ("opponent_kind", constraints.opponent_kind),
    ] {
        if kind == DropKind::Hybrid {
            return Err(PolicyError::InvalidValue {
                path: name.into(),
                value: f64::NAN,
                reason: "hybrid drops have no closed form to validate against".into(),
            });
        }
    }
    if !(0.0..=1.0).contains(&constraints.max_farmer_share) {
        return Err(PolicyError::InvalidValue {
            path: "max_farmer_share".into(),
            value: constraints.max_farmer_share,
            reason: "expected a share in [0, 1]".into(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut draws = 0;
    while out.len() < count {
        let s = draw(&mut rng, constraints);
        draws += 1;
        // Range checks on fixed constraints surface as model errors.
        s.market.validate()?;
        if accepted(&s, constraints) {
            out.push(s);
        }
        if draws >= MAX_DRAWS_BEFORE_GIVING_UP && out.len() * 100 < draws {
            return Err(PolicyError::ConstraintInfeasible {
                accepted: out.len(),
                draws,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{solve_eligible_distance_proportional, validate_ordering};

    #[test]
    fn sampling_is_deterministic() {
        let c = ScenarioConstraints::default();
        assert_eq!(
            sample_valid_scenarios(3, 11, &c).unwrap(),
            sample_valid_scenarios(3, 11, &c).unwrap()
        );
        assert_ne!(
            sample_valid_scenarios(1, 11, &c).unwrap(),
            sample_valid_scenarios(1, 12, &c).unwrap()
        );
    }

    #[test]
    fn every_sample_is_ordered() {
        let c = ScenarioConstraints {
            drop_kind: DropKind::Fixed,
            opponent_kind: DropKind::Proportional,
            ..Default::default()
        };
        for s in sample_valid_scenarios(100, 3, &c).unwrap() {
            let o = solve_market(&s.market, &s.chain1, &s.chain2).unwrap();
            assert!(validate_ordering(&o.biases()).is_clean());
            assert_eq!(s.chain1.kind(), DropKind::Fixed);
            assert_eq!(s.market.farmer_count % 4, 0);
        }
    }

    #[test]
    fn full_farmer_cost_puts_eligible_marginal_at_v() {
        let c = ScenarioConstraints {
            farmer_cost_scale: Some(1.0),
            ..Default::default()
        };
        for s in sample_valid_scenarios(50, 5, &c).unwrap() {
            let d = solve_eligible_distance_proportional(&s.market, &s.chain1).unwrap();
            assert!((d.distance - s.market.value).abs() < 1e-12);
        }
    }

    #[test]
    fn impossible_constraints_are_reported() {
        // Every farmer cost is zero, so no proportional drop has a closed form.
        let c = ScenarioConstraints {
            farmer_cost_scale: Some(0.0),
            ..Default::default()
        };
        assert!(matches!(
            sample_valid_scenarios(1, 0, &c),
            Err(PolicyError::ConstraintInfeasible { accepted: 0, .. })
        ));
    }

    #[test]
    fn zero_count_is_an_error() {
        assert_eq!(
            sample_valid_scenarios(0, 0, &ScenarioConstraints::default()),
            Err(PolicyError::NoScenarios)
        );
    }
}
