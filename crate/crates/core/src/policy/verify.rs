use rayon::prelude::*;
use serde::Serialize;

use super::{sample_valid_scenarios, PolicyError, Scenario, ScenarioConstraints};
use crate::equilibrium::{solve_market, TOLERANCE};
use crate::model::{farmer_unit_cost, DropKind, SybilCap};

/// Resistance levels checked for fixed drops.
pub const RESIST_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    /// Fixed drops with unbounded sybils: no resistance is optimal when
    /// `k <= lambda*c`, full resistance otherwise.
    FixedDropResistance,
    /// Proportional drops: no resistance is never worse than full resistance.
    ProportionalDropResistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckCase {
    /// Farming never pays, so resistance cannot matter.
    Vacuous,
    ZeroResistOptimal,
    FullResistOptimal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioCheck {
    pub index: usize,
    pub scenario: Scenario,
    pub case: CheckCase,
    pub resist: Vec<f64>,
    /// Chain 1 net revenue at each resistance level; NaN if the solver failed.
    pub net_revenue: Vec<f64>,
    pub expected_rho: f64,
    pub observed_rho: f64,
    /// Revenue at the expected optimum minus the best alternative.
    pub margin: f64,
    pub tie: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub scenario: usize,
    pub expected_rho: f64,
    pub observed_rho: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub theorem: TheoremId,
    pub scenarios_tested: usize,
    pub vacuous: usize,
    pub ties: usize,
    pub violations: Vec<Violation>,
    pub passed: bool,
    pub checks: Vec<ScenarioCheck>,
}

impl VerificationReport {
    pub fn from_checks(theorem: TheoremId, checks: Vec<ScenarioCheck>) -> Self {
        let violations: Vec<Violation> = checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| Violation {
                scenario: c.index,
                expected_rho: c.expected_rho,
                observed_rho: c.observed_rho,
                margin: c.margin,
            })
            .collect();
        VerificationReport {
            theorem,
            scenarios_tested: checks.len(),
            vacuous: checks
                .iter()
                .filter(|c| c.case == CheckCase::Vacuous)
                .count(),
            ties: checks.iter().filter(|c| c.tie).count(),
            passed: violations.is_empty(),
            violations,
            checks,
        }
    }
}

fn revenues(s: &Scenario, resist: &[f64]) -> Vec<f64> {
    resist
        .iter()
        .map(|&rho| {
            let chain1 = crate::model::ChainParams {
                resist: rho,
                ..s.chain1
            };
            solve_market(&s.market, &chain1, &s.chain2)
                .map(|o| o.chains[0].net_revenue)
                .unwrap_or(f64::NAN)
        })
        .collect()
}

fn within(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= TOLERANCE
}

/// Index of the first entry within tolerance of the maximum, and whether
/// any other entry is too.
fn argmax(values: &[f64]) -> (usize, bool) {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut hits = values.iter().enumerate().filter(|(_, &v)| within(v, best));
    let first = hits.next().map_or(0, |(i, _)| i);
    (first, hits.next().is_some())
}

fn margin(values: &[f64], expected: usize) -> f64 {
    let target = values[expected];
    let rival = values
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != expected)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if target == rival {
        0.0
    } else {
        target - rival
    }
}

/// Check one fixed-drop scenario over [`RESIST_GRID`] on chain 1.
pub fn check_fixed(index: usize, scenario: &Scenario) -> ScenarioCheck {
    let chain = &scenario.chain1;
    let unit = farmer_unit_cost(&scenario.market, chain);
    let resist = RESIST_GRID.to_vec();
    let net = revenues(scenario, &resist);
    let last = resist.len() - 1;
    let (observed, tie) = argmax(&net);
    let farming = scenario.market.farmer_count > 0 && chain.fixed_reward - unit > 0.0;

    let (case, expected, passed) = if !farming {
        let inert = net.iter().all(|&v| within(v, net[0]));
        (CheckCase::Vacuous, 0, inert)
    } else if chain.per_account_expense() <= unit + TOLERANCE {
        (
            CheckCase::ZeroResistOptimal,
            0,
            observed == 0 && !net[0].is_nan(),
        )
    } else {
        let ok = net[..last].iter().all(|&v| v == f64::NEG_INFINITY) && net[last].is_finite();
        (CheckCase::FullResistOptimal, last, ok)
    };
    ScenarioCheck {
        index,
        scenario: *scenario,
        case,
        expected_rho: resist[expected],
        observed_rho: resist[observed],
        margin: margin(&net, expected),
        tie: tie && case != CheckCase::Vacuous,
        passed,
        resist,
        net_revenue: net,
    }
}

/// Check one proportional scenario: chain 1 revenue at no resistance against
/// full resistance.
pub fn check_proportional(index: usize, scenario: &Scenario) -> ScenarioCheck {
    let resist = vec![0.0, 1.0];
    let net = revenues(scenario, &resist);
    let (observed, tie) = argmax(&net);
    let margin = margin(&net, 0);
    let vacuous = scenario.market.farmer_count == 0;
    ScenarioCheck {
        index,
        scenario: *scenario,
        case: if vacuous {
            CheckCase::Vacuous
        } else {
            CheckCase::ZeroResistOptimal
        },
        expected_rho: 0.0,
        observed_rho: resist[observed],
        margin,
        tie: tie && !vacuous,
        passed: net[0] >= net[1] - TOLERANCE,
        resist,
        net_revenue: net,
    }
}

fn run(
    theorem: TheoremId,
    count: usize,
    seed: u64,
    constraints: ScenarioConstraints,
    check: fn(usize, &Scenario) -> ScenarioCheck,
) -> Result<VerificationReport, PolicyError> {
    let scenarios = sample_valid_scenarios(count, seed, &constraints)?;
    let checks = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, s)| check(i, s))
        .collect();
    Ok(VerificationReport::from_checks(theorem, checks))
}

/// Sample fixed-drop scenarios with unbounded sybils (valid at full
/// resistance) and check the optimal resistance on each.
pub fn verify_theorem_fixed(count: usize, seed: u64) -> Result<VerificationReport, PolicyError> {
    let constraints = ScenarioConstraints {
        drop_kind: DropKind::Fixed,
        opponent_kind: DropKind::None,
        sybil_cap: Some(SybilCap::Unbounded),
        resist: Some(1.0),
        max_farmer_share: 0.1,
        ..Default::default()
    };
    run(
        TheoremId::FixedDropResistance,
        count,
        seed,
        constraints,
        check_fixed,
    )
}

/// Sample proportional scenarios with unbounded sybils (valid at zero
/// resistance) and compare zero against full resistance.
pub fn verify_theorem_proportional(
    count: usize,
    seed: u64,
) -> Result<VerificationReport, PolicyError> {
    let constraints = ScenarioConstraints {
        drop_kind: DropKind::Proportional,
        opponent_kind: DropKind::None,
        sybil_cap: Some(SybilCap::Unbounded),
        resist: Some(0.0),
        max_farmer_share: 0.1,
        ..Default::default()
    };
    run(
        TheoremId::ProportionalDropResistance,
        count,
        seed,
        constraints,
        check_proportional,
    )
}
