//! Closed-form rational-expectations equilibrium for pure airdrop policies.
//!
//! Each chain is solved independently: the eligible marginal user first,
//! then the farmer mass, then the ineligible marginal user whose position
//! depends on the farmer-inflated userbase. Results are checked against the
//! market-segment ordering `0 <= x1_el <= x1_inel <= x2_inel <= x2_el <= 1`
//! and anything suspicious is reported through [`Validity`] flags rather
//! than dropped.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    effective_sybil_capacity, farmer_unit_cost, ChainId, ChainParams, DropKind, MarketParams,
    ModelError,
};

/// Absolute tolerance for every equality and ordering check.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{chain}: share denominator 1 - gamma*H = {denominator} is not positive")]
    DenominatorNonpositive { chain: ChainId, denominator: f64 },
    #[error("complementarity delta is zero; the eligibility indifference has no unique root")]
    DegenerateComplementarity,
    #[error("{chain}: farmer eligibility cost lambda*c = {unit_cost} is not positive, break-even mass is undefined")]
    UnboundedFarmerProfit { chain: ChainId, unit_cost: f64 },
    #[error(
        "{chain}: hybrid fixed+proportional drops have no closed form; use the agent-based oracle"
    )]
    UnsupportedClosedForm { chain: ChainId },
}

/// Conditions attached to a solved outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Flag {
    OrderingViolated,
    UnboundedSybils,
    DenominatorNonpositive,
    FarmerMassClamped,
    EligibleDistanceClamped,
    FarmerCapBinding,
}

impl Flag {
    /// Blocking flags mark an outcome outside the model's admissible
    /// region. The others are informational.
    pub fn is_blocking(self) -> bool {
        matches!(
            self,
            Flag::OrderingViolated | Flag::UnboundedSybils | Flag::DenominatorNonpositive
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Flag::OrderingViolated => "ORDERING_VIOLATED",
            Flag::UnboundedSybils => "UNBOUNDED_SYBILS",
            Flag::DenominatorNonpositive => "DENOMINATOR_NONPOSITIVE",
            Flag::FarmerMassClamped => "FARMER_MASS_CLAMPED",
            Flag::EligibleDistanceClamped => "ELIGIBLE_DISTANCE_CLAMPED",
            Flag::FarmerCapBinding => "FARMER_CAP_BINDING",
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Validity(BTreeSet<Flag>);

impl Validity {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, flag: Flag) {
        self.0.insert(flag);
    }

    pub fn contains(&self, flag: Flag) -> bool {
        self.0.contains(&flag)
    }

    pub fn extend(&mut self, other: &Validity) {
        self.0.extend(other.0.iter().copied());
    }

    /// No flags at all.
    pub fn is_clean(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_blocking(&self) -> bool {
        self.0.iter().any(|f| f.is_blocking())
    }

    pub fn iter(&self) -> impl Iterator<Item = Flag> + '_ {
        self.0.iter().copied()
    }
}

impl fmt::Display for Validity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.0.iter().map(|fl| fl.as_str()).collect();
        f.write_str(&names.join("|"))
    }
}

/// Marginal biases of both chains, indexed by [`ChainId::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginalBiases {
    pub ineligible: [f64; 2],
    pub eligible: [f64; 2],
}

impl MarginalBiases {
    /// Arguments in segment order along the bias axis.
    pub fn from_ordered(x1_el: f64, x1_inel: f64, x2_inel: f64, x2_el: f64) -> Self {
        MarginalBiases {
            ineligible: [x1_inel, x2_inel],
            eligible: [x1_el, x2_el],
        }
    }

    pub fn ordered(&self) -> [f64; 4] {
        [
            self.eligible[0],
            self.ineligible[0],
            self.ineligible[1],
            self.eligible[1],
        ]
    }
}

/// Chain revenue split by source.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RevenueBreakdown {
    pub fees: f64,
    pub honest_eligibility: f64,
    pub farmer_eligibility: f64,
}

impl RevenueBreakdown {
    pub fn gross(&self) -> f64 {
        self.fees + self.honest_eligibility + self.farmer_eligibility
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainOutcome {
    pub x_ineligible: f64,
    pub x_eligible: f64,
    /// Eligible sybil accounts; `+inf` when unbounded.
    pub farmer_mass: f64,
    pub honest_users: f64,
    pub honest_eligible: f64,
    pub userbase: f64,
    pub revenue: RevenueBreakdown,
    pub gross_revenue: f64,
    /// `-inf` / `+inf` when unbounded farming dominates.
    pub net_revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumOutcome {
    pub chains: [ChainOutcome; 2],
    pub validity: Validity,
}

impl EquilibriumOutcome {
    pub fn chain(&self, id: ChainId) -> &ChainOutcome {
        &self.chains[id.index()]
    }

    pub fn biases(&self) -> MarginalBiases {
        MarginalBiases {
            ineligible: [self.chains[0].x_ineligible, self.chains[1].x_ineligible],
            eligible: [self.chains[0].x_eligible, self.chains[1].x_eligible],
        }
    }
}

/// Distance from the chain endpoint, with a note when it had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampedDistance {
    pub distance: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarmerMass {
    pub mass: f64,
    /// Break-even mass was negative.
    pub clamped: bool,
    /// The sybil capacity is below the break-even mass.
    pub cap_binding: bool,
}

fn distance_of(chain: ChainId, bias: f64) -> f64 {
    match chain {
        ChainId::One => bias,
        ChainId::Two => 1.0 - bias,
    }
}

fn network_term(gamma: f64, mass: f64) -> f64 {
    if gamma == 0.0 {
        0.0
    } else {
        gamma * mass
    }
}

fn scaled(unit: f64, mass: f64) -> f64 {
    if unit == 0.0 {
        0.0
    } else {
        unit * mass
    }
}

/// Ineligible marginal bias for `chain` given its eligible farmer mass,
/// together with whether the share denominator was non-positive.
fn ineligible_bias_raw(
    market: &MarketParams,
    chain_params: &ChainParams,
    chain: ChainId,
    farmer_mass: f64,
) -> (f64, bool) {
    let denominator = 1.0 - market.network_gamma * market.honest();
    let share = (market.value - chain_params.fee + network_term(market.network_gamma, farmer_mass))
        / denominator;
    (chain.bias_at_distance(share), denominator <= 0.0)
}

/// Bias of the honest user indifferent between `chain` and abstaining.
///
/// The share `d = (v - p + gamma*E) / (1 - gamma*H)` solves
/// `v - d - p + gamma*(H*d + E) = 0` on either chain; chain 2 maps it back
/// to the bias axis as `1 - d`.
pub fn solve_marginal_ineligible(
    market: &MarketParams,
    chain_params: &ChainParams,
    chain: ChainId,
    farmer_mass: f64,
) -> Result<f64, EquilibriumError> {
    let (bias, bad_denominator) = ineligible_bias_raw(market, chain_params, chain, farmer_mass);
    if bad_denominator {
        return Err(EquilibriumError::DenominatorNonpositive {
            chain,
            denominator: 1.0 - market.network_gamma * market.honest(),
        });
    }
    Ok(bias)
}

/// Bias of the user on `chain` indifferent between opting in and out of
/// the airdrop when each eligible account receives `reward`.
pub fn solve_marginal_eligible_fixed(
    market: &MarketParams,
    chain_params: &ChainParams,
    chain: ChainId,
    reward: f64,
) -> Result<f64, EquilibriumError> {
    if market.complementarity_delta == 0.0 {
        return Err(EquilibriumError::DegenerateComplementarity);
    }
    let distance =
        market.value + (reward - chain_params.eligibility_cost) / market.complementarity_delta;
    Ok(chain.bias_at_distance(distance))
}

/// Eligible marginal distance under a pure proportional drop, where farmer
/// entry drives the reward down to `lambda * c`. Independent of B, H and F.
pub fn solve_eligible_distance_proportional(
    market: &MarketParams,
    chain_params: &ChainParams,
) -> Result<ClampedDistance, EquilibriumError> {
    let delta = market.complementarity_delta;
    if delta == 0.0 {
        return Err(EquilibriumError::DegenerateComplementarity);
    }
    let raw =
        market.value + chain_params.eligibility_cost / delta * (market.farmer_cost_scale - 1.0);
    let distance = raw.clamp(0.0, 1.0);
    Ok(ClampedDistance {
        distance,
        clamped: distance != raw,
    })
}

/// Break-even sybil mass under a pure proportional drop, limited by the
/// farmers' effective capacity at the chain's resistance level.
pub fn solve_farmer_mass_proportional(
    market: &MarketParams,
    chain_params: &ChainParams,
    honest_eligible: f64,
) -> Result<FarmerMass, EquilibriumError> {
    let unit_cost = farmer_unit_cost(market, chain_params);
    if unit_cost <= 0.0 {
        return Err(EquilibriumError::UnboundedFarmerProfit {
            chain: ChainId::One,
            unit_cost,
        });
    }
    let raw = chain_params.budget / unit_cost - honest_eligible;
    let interior = raw.max(0.0);
    let cap = effective_sybil_capacity(market, chain_params.resist);
    Ok(FarmerMass {
        mass: interior.min(cap),
        clamped: raw < 0.0,
        cap_binding: cap < interior,
    })
}

/// Sybil mass under a pure fixed drop: zero unless `f > lambda * c`, in
/// which case every farmer runs its full capacity (possibly unbounded).
pub fn solve_farmer_mass_fixed(market: &MarketParams, chain_params: &ChainParams) -> f64 {
    let margin = chain_params.fixed_reward - farmer_unit_cost(market, chain_params);
    if margin <= 0.0 {
        0.0
    } else {
        effective_sybil_capacity(market, chain_params.resist)
    }
}

/// Userbase contributing to network effects: honest users plus eligible
/// sybil accounts.
pub fn compute_userbase(
    market: &MarketParams,
    chain: ChainId,
    x_ineligible: f64,
    farmer_mass: f64,
) -> f64 {
    market.honest() * distance_of(chain, x_ineligible) + farmer_mass
}

/// Gross revenue `p*H*d(x_inel) + c*H*d(x_el) + lambda*c*E`, split by source.
pub fn compute_revenue(
    market: &MarketParams,
    chain_params: &ChainParams,
    chain: ChainId,
    x_ineligible: f64,
    x_eligible: f64,
    farmer_mass: f64,
) -> RevenueBreakdown {
    let h = market.honest();
    RevenueBreakdown {
        fees: chain_params.fee * h * distance_of(chain, x_ineligible),
        honest_eligibility: chain_params.eligibility_cost * h * distance_of(chain, x_eligible),
        farmer_eligibility: scaled(farmer_unit_cost(market, chain_params), farmer_mass),
    }
}

/// Net revenue after issuance expenses: `k` per eligible account for fixed
/// rewards plus the whole proportional budget.
///
/// With an unbounded farmer mass the sign of the per-account margin
/// `lambda*c - k` decides between `+inf` and `-inf`; a zero margin leaves
/// the honest part.
pub fn compute_net_revenue(
    market: &MarketParams,
    chain_params: &ChainParams,
    revenue: &RevenueBreakdown,
    honest_eligible: f64,
    farmer_mass: f64,
) -> f64 {
    let per_account = chain_params.per_account_expense();
    let honest_part = revenue.fees + revenue.honest_eligibility
        - per_account * honest_eligible
        - chain_params.budget;
    if farmer_mass.is_infinite() {
        let margin = farmer_unit_cost(market, chain_params) - per_account;
        if margin > TOLERANCE {
            f64::INFINITY
        } else if margin < -TOLERANCE {
            f64::NEG_INFINITY
        } else {
            honest_part
        }
    } else {
        honest_part + revenue.farmer_eligibility - scaled(per_account, farmer_mass)
    }
}

/// Checks the segment ordering at [`TOLERANCE`]. NaNs never pass.
pub fn validate_ordering(biases: &MarginalBiases) -> Validity {
    let [a, b, c, d] = biases.ordered();
    let chain = [0.0, a, b, c, d, 1.0];
    let ok = chain.windows(2).all(|w| w[0] <= w[1] + TOLERANCE);
    let mut validity = Validity::new();
    if !ok {
        validity.insert(Flag::OrderingViolated);
    }
    validity
}

struct EligibleSide {
    x_eligible: f64,
    honest_eligible: f64,
    farmer_mass: f64,
}

fn solve_eligible_side(
    market: &MarketParams,
    chain_params: &ChainParams,
    chain: ChainId,
    validity: &mut Validity,
) -> Result<EligibleSide, EquilibriumError> {
    let h = market.honest();
    match chain_params.kind() {
        DropKind::None => Ok(EligibleSide {
            x_eligible: chain.bias_at_distance(0.0),
            honest_eligible: 0.0,
            farmer_mass: 0.0,
        }),
        DropKind::Fixed => {
            let farmer_mass = solve_farmer_mass_fixed(market, chain_params);
            if farmer_mass.is_infinite() {
                validity.insert(Flag::UnboundedSybils);
            }
            let x_eligible = solve_marginal_eligible_fixed(
                market,
                chain_params,
                chain,
                chain_params.fixed_reward,
            )?;
            Ok(EligibleSide {
                x_eligible,
                honest_eligible: h * distance_of(chain, x_eligible),
                farmer_mass,
            })
        }
        DropKind::Proportional => {
            let d = solve_eligible_distance_proportional(market, chain_params)?;
            if d.clamped {
                validity.insert(Flag::EligibleDistanceClamped);
            }
            let honest_eligible = h * d.distance;
            let mass = solve_farmer_mass_proportional(market, chain_params, honest_eligible)
                .map_err(|e| match e {
                    EquilibriumError::UnboundedFarmerProfit { unit_cost, .. } => {
                        EquilibriumError::UnboundedFarmerProfit { chain, unit_cost }
                    }
                    other => other,
                })?;
            if mass.clamped {
                validity.insert(Flag::FarmerMassClamped);
            }
            if mass.cap_binding {
                validity.insert(Flag::FarmerCapBinding);
            }
            Ok(EligibleSide {
                x_eligible: chain.bias_at_distance(d.distance),
                honest_eligible,
                farmer_mass: mass.mass,
            })
        }
        DropKind::Hybrid => Err(EquilibriumError::UnsupportedClosedForm { chain }),
    }
}

fn solve_chain(
    market: &MarketParams,
    chain_params: &ChainParams,
    chain: ChainId,
    validity: &mut Validity,
) -> Result<ChainOutcome, EquilibriumError> {
    let side = solve_eligible_side(market, chain_params, chain, validity)?;
    let (x_ineligible, bad_denominator) =
        ineligible_bias_raw(market, chain_params, chain, side.farmer_mass);
    if bad_denominator {
        validity.insert(Flag::DenominatorNonpositive);
    }

    // an unbounded userbase pulls every honest user onto the chain
    let saturated = side.farmer_mass.is_infinite() && market.network_gamma > 0.0;
    let share = if saturated {
        1.0
    } else {
        distance_of(chain, x_ineligible)
    };
    let revenue_bias = chain.bias_at_distance(share);
    let honest_users = market.honest() * share;
    let userbase = compute_userbase(market, chain, revenue_bias, side.farmer_mass);
    let revenue = compute_revenue(
        market,
        chain_params,
        chain,
        revenue_bias,
        side.x_eligible,
        side.farmer_mass,
    );
    let net_revenue = compute_net_revenue(
        market,
        chain_params,
        &revenue,
        side.honest_eligible,
        side.farmer_mass,
    );
    Ok(ChainOutcome {
        x_ineligible,
        x_eligible: side.x_eligible,
        farmer_mass: side.farmer_mass,
        honest_users,
        honest_eligible: side.honest_eligible,
        userbase,
        revenue,
        gross_revenue: revenue.gross(),
        net_revenue,
    })
}

/// Solves both chains for pure (none, fixed or proportional) policies.
/// Hybrid policies are rejected with [`EquilibriumError::UnsupportedClosedForm`].
pub fn solve_market(
    market: &MarketParams,
    chain1: &ChainParams,
    chain2: &ChainParams,
) -> Result<EquilibriumOutcome, EquilibriumError> {
    market.validate()?;
    chain1.validate()?;
    chain2.validate()?;
    let mut validity = Validity::new();
    let c1 = solve_chain(market, chain1, ChainId::One, &mut validity)?;
    let c2 = solve_chain(market, chain2, ChainId::Two, &mut validity)?;
    let mut outcome = EquilibriumOutcome {
        chains: [c1, c2],
        validity,
    };
    let ordering = validate_ordering(&outcome.biases());
    outcome.validity.extend(&ordering);
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SybilCap;
    use proptest::prelude::*;

    fn market() -> MarketParams {
        MarketParams {
            value: 0.6,
            network_gamma: 0.0,
            complementarity_delta: 1.0,
            honest_count: 10,
            farmer_count: 1,
            farmer_cost_scale: 0.5,
            sybil_cap: SybilCap::Unbounded,
        }
    }

    fn chain(fee: f64, cost: f64, fixed: f64, budget: f64) -> ChainParams {
        ChainParams {
            fee,
            eligibility_cost: cost,
            fixed_reward: fixed,
            budget,
            issuance_cost: 0.0,
            resist: 0.0,
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn ineligible_marginal_examples() {
        let m = market();
        let x =
            solve_marginal_ineligible(&m, &chain(0.1, 0.0, 0.0, 0.0), ChainId::One, 0.0).unwrap();
        assert!(close(x, 0.5));

        let m = MarketParams {
            network_gamma: 0.02,
            ..market()
        };
        let x =
            solve_marginal_ineligible(&m, &chain(0.1, 0.0, 0.0, 0.0), ChainId::One, 5.0).unwrap();
        assert!(close(x, 0.75));
        // chain 2 share (0.6 - 0.1) / (1 - 0.2) = 0.625 from the right endpoint
        let x =
            solve_marginal_ineligible(&m, &chain(0.1, 0.0, 0.0, 0.0), ChainId::Two, 0.0).unwrap();
        assert!(close(x, 0.375));
    }

    #[test]
    fn ineligible_denominator_guard() {
        let m = MarketParams {
            network_gamma: 0.1,
            ..market()
        };
        let err = solve_marginal_ineligible(&m, &chain(0.1, 0.0, 0.0, 0.0), ChainId::One, 0.0);
        assert!(matches!(
            err,
            Err(EquilibriumError::DenominatorNonpositive { .. })
        ));
        let m = MarketParams {
            network_gamma: 0.2,
            ..market()
        };
        assert!(
            solve_marginal_ineligible(&m, &chain(0.1, 0.0, 0.0, 0.0), ChainId::Two, 0.0).is_err()
        );
    }

    #[test]
    fn eligible_fixed_examples() {
        let m = MarketParams {
            value: 0.5,
            ..market()
        };
        let x = solve_marginal_eligible_fixed(&m, &chain(0.0, 0.3, 0.3, 0.0), ChainId::One, 0.3)
            .unwrap();
        assert!(close(x, 0.5));

        let m = MarketParams {
            value: 0.4,
            complementarity_delta: 2.0,
            ..market()
        };
        let c = chain(0.0, 0.1, 0.3, 0.0);
        assert!(close(
            solve_marginal_eligible_fixed(&m, &c, ChainId::One, 0.3).unwrap(),
            0.5
        ));
        assert!(close(
            solve_marginal_eligible_fixed(&m, &c, ChainId::Two, 0.3).unwrap(),
            0.5
        ));

        let m = MarketParams {
            complementarity_delta: 0.0,
            ..market()
        };
        assert_eq!(
            solve_marginal_eligible_fixed(&m, &c, ChainId::One, 0.3),
            Err(EquilibriumError::DegenerateComplementarity)
        );
    }

    #[test]
    fn eligible_proportional_examples() {
        let m = MarketParams {
            farmer_cost_scale: 1.0,
            value: 0.42,
            ..market()
        };
        let d = solve_eligible_distance_proportional(&m, &chain(0.0, 0.2, 0.0, 1.0)).unwrap();
        assert!(close(d.distance, 0.42) && !d.clamped);

        let m = MarketParams {
            value: 0.55,
            complementarity_delta: 1.0,
            farmer_cost_scale: 0.5,
            ..market()
        };
        let d = solve_eligible_distance_proportional(&m, &chain(0.0, 0.1, 0.0, 1.0)).unwrap();
        assert!(close(d.distance, 0.5));

        let m = MarketParams {
            value: 0.3,
            complementarity_delta: 0.5,
            farmer_cost_scale: 0.0,
            ..market()
        };
        let d = solve_eligible_distance_proportional(&m, &chain(0.0, 0.4, 0.0, 1.0)).unwrap();
        assert_eq!(d.distance, 0.0);
        assert!(d.clamped);
    }

    #[test]
    fn farmer_mass_proportional_examples() {
        let m = MarketParams {
            farmer_cost_scale: 0.5,
            ..market()
        };
        let c = chain(0.0, 1.0, 0.0, 2.0);
        let e = solve_farmer_mass_proportional(&m, &c, 2.0).unwrap();
        assert!(close(e.mass, 2.0) && !e.clamped && !e.cap_binding);

        let e = solve_farmer_mass_proportional(&m, &c, 6.0).unwrap();
        assert_eq!(e.mass, 0.0);
        assert!(e.clamped);

        let c1 = ChainParams { resist: 1.0, ..c };
        let m1 = MarketParams {
            farmer_count: 1,
            ..m
        };
        let e = solve_farmer_mass_proportional(&m1, &c1, 2.0).unwrap();
        assert_eq!(e.mass, 1.0);
        assert!(e.cap_binding);

        let m0 = MarketParams {
            farmer_cost_scale: 0.0,
            ..m
        };
        assert!(matches!(
            solve_farmer_mass_proportional(&m0, &c, 2.0),
            Err(EquilibriumError::UnboundedFarmerProfit { .. })
        ));
    }

    #[test]
    fn farmer_mass_fixed_examples() {
        let m = MarketParams {
            farmer_cost_scale: 0.5,
            farmer_count: 1,
            sybil_cap: SybilCap::Finite(4),
            ..market()
        };
        assert_eq!(solve_farmer_mass_fixed(&m, &chain(0.0, 2.0, 0.0, 0.0)), 0.0);
        assert_eq!(solve_farmer_mass_fixed(&m, &chain(0.0, 2.0, 1.1, 0.0)), 4.0);
        // exact break-even does not attract farmers
        assert_eq!(solve_farmer_mass_fixed(&m, &chain(0.0, 2.0, 1.0, 0.0)), 0.0);
        let m = MarketParams {
            sybil_cap: SybilCap::Unbounded,
            ..m
        };
        let c = ChainParams {
            resist: 0.5,
            ..chain(0.0, 2.0, 1.1, 0.0)
        };
        assert!(solve_farmer_mass_fixed(&m, &c).is_infinite());
    }

    #[test]
    fn userbase_examples() {
        let m = MarketParams {
            honest_count: 0,
            ..market()
        };
        assert_eq!(compute_userbase(&m, ChainId::One, 0.4, 0.0), 0.0);
        let m = MarketParams {
            honest_count: 4,
            ..market()
        };
        assert_eq!(compute_userbase(&m, ChainId::Two, 1.0, 0.0), 0.0);
        let m = MarketParams {
            honest_count: 10,
            ..market()
        };
        assert!(close(compute_userbase(&m, ChainId::One, 0.75, 5.0), 12.5));
    }

    #[test]
    fn revenue_examples() {
        let m = MarketParams {
            honest_count: 0,
            ..market()
        };
        assert_eq!(
            compute_revenue(&m, &chain(0.05, 0.1, 0.0, 2.0), ChainId::One, 0.5, 0.5, 0.0).gross(),
            0.0
        );

        let m = MarketParams {
            honest_count: 4,
            farmer_cost_scale: 0.5,
            ..market()
        };
        let c = chain(0.05, 0.1, 0.0, 2.0);
        let rev = compute_revenue(&m, &c, ChainId::One, 0.5, 0.5, 2.0);
        assert!(close(rev.gross(), 0.4));
        // net subtracts the full budget
        assert!(close(compute_net_revenue(&m, &c, &rev, 2.0, 2.0), -1.6));

        let m0 = MarketParams {
            farmer_cost_scale: 0.0,
            ..m
        };
        assert!(close(
            compute_revenue(&m0, &c, ChainId::One, 0.5, 0.5, 100.0).gross(),
            0.3
        ));
    }

    #[test]
    fn net_revenue_without_airdrop_is_gross() {
        let m = market();
        let c = chain(0.2, 0.0, 0.0, 0.0);
        let rev = compute_revenue(&m, &c, ChainId::One, 0.3, 0.0, 0.0);
        assert_eq!(compute_net_revenue(&m, &c, &rev, 0.0, 0.0), rev.gross());
    }

    #[test]
    fn net_revenue_of_the_motivating_example() {
        // user fee 2 plus four sybils paying lambda*c = 1 each, k = 1.1 per account
        let m = MarketParams {
            farmer_cost_scale: 0.5,
            ..market()
        };
        let c = ChainParams {
            issuance_cost: 1.1,
            ..chain(2.0, 2.0, 1.1, 0.0)
        };
        let rev = RevenueBreakdown {
            fees: 2.0,
            honest_eligibility: 0.0,
            farmer_eligibility: 4.0,
        };
        assert!((compute_net_revenue(&m, &c, &rev, 0.0, 4.0) - 1.6).abs() < 1e-12);
    }

    #[test]
    fn unbounded_net_revenue_sign() {
        let m = MarketParams {
            farmer_cost_scale: 0.5,
            ..market()
        };
        let rev = RevenueBreakdown {
            fees: 1.0,
            honest_eligibility: 0.0,
            farmer_eligibility: f64::INFINITY,
        };
        let cheap = ChainParams {
            issuance_cost: 0.5,
            ..chain(0.1, 2.0, 1.1, 0.0)
        };
        let dear = ChainParams {
            issuance_cost: 1.5,
            ..cheap
        };
        let even = ChainParams {
            issuance_cost: 1.0,
            ..cheap
        };
        assert_eq!(
            compute_net_revenue(&m, &cheap, &rev, 0.0, f64::INFINITY),
            f64::INFINITY
        );
        assert_eq!(
            compute_net_revenue(&m, &dear, &rev, 0.0, f64::INFINITY),
            f64::NEG_INFINITY
        );
        assert_eq!(
            compute_net_revenue(&m, &even, &rev, 0.0, f64::INFINITY),
            1.0
        );
    }

    #[test]
    fn ordering_examples() {
        assert!(validate_ordering(&MarginalBiases::from_ordered(0.2, 0.4, 0.6, 0.8)).is_clean());
        assert!(validate_ordering(&MarginalBiases::from_ordered(0.5, 0.5, 0.5, 0.5)).is_clean());
        let v = validate_ordering(&MarginalBiases::from_ordered(0.6, 0.4, 0.5, 0.8));
        assert!(v.contains(Flag::OrderingViolated));
        let v = validate_ordering(&MarginalBiases::from_ordered(f64::NAN, 0.4, 0.5, 0.8));
        assert!(v.contains(Flag::OrderingViolated));
    }

    #[test]
    fn solve_market_without_drops() {
        let m = MarketParams {
            value: 0.4,
            honest_count: 100,
            ..market()
        };
        let out =
            solve_market(&m, &ChainParams::no_drop(0.1), &ChainParams::no_drop(0.05)).unwrap();
        assert!(out.validity.is_clean(), "{}", out.validity);
        let c1 = out.chain(ChainId::One);
        let c2 = out.chain(ChainId::Two);
        assert!(close(c1.x_ineligible, 0.3));
        assert!(close(1.0 - c2.x_ineligible, 0.35));
        assert_eq!(c1.farmer_mass, 0.0);
        assert!(close(c1.gross_revenue, 0.1 * 100.0 * 0.3));
        assert!(close(c2.gross_revenue, 0.05 * 100.0 * 0.35));
        assert_eq!(c1.x_eligible, 0.0);
        assert_eq!(c2.x_eligible, 1.0);
    }

    #[test]
    fn solve_market_proportional_reference() {
        let m = MarketParams {
            value: 0.55,
            network_gamma: 0.0,
            complementarity_delta: 1.0,
            honest_count: 4,
            farmer_count: 1,
            farmer_cost_scale: 0.5,
            sybil_cap: SybilCap::Unbounded,
        };
        let c1 = chain(0.05, 1.0, 0.0, 2.0);
        let c2 = ChainParams::no_drop(0.5);
        let out = solve_market(&m, &c1, &c2).unwrap();
        let o = out.chain(ChainId::One);
        // d_el = 0.55 + 1*(0.5 - 1) = 0.05, honest eligible 0.2, E = 4 - 0.2
        assert!(close(o.x_eligible, 0.05));
        assert!(close(o.farmer_mass, 3.8));
        assert!(close(o.x_ineligible, 0.5));
        let gross = 0.05 * 4.0 * 0.5 + 1.0 * 4.0 * 0.05 + 0.5 * 3.8;
        assert!(close(o.gross_revenue, gross));
        assert!(close(o.net_revenue, gross - 2.0));
        assert!(out.validity.is_clean(), "{}", out.validity);
    }

    #[test]
    fn solve_market_unbounded_fixed_drop() {
        let m = MarketParams {
            farmer_cost_scale: 0.5,
            network_gamma: 0.01,
            ..market()
        };
        let c1 = ChainParams {
            resist: 0.3,
            issuance_cost: 1.1,
            ..chain(0.1, 2.0, 1.1, 0.0)
        };
        let out = solve_market(&m, &c1, &ChainParams::no_drop(0.1)).unwrap();
        assert!(out.validity.contains(Flag::UnboundedSybils));
        assert_eq!(out.chain(ChainId::One).net_revenue, f64::NEG_INFINITY);
    }

    #[test]
    fn solve_market_rejects_hybrid() {
        let c1 = chain(0.1, 0.2, 0.1, 1.0);
        assert_eq!(
            solve_market(&market(), &c1, &ChainParams::no_drop(0.1)),
            Err(EquilibriumError::UnsupportedClosedForm {
                chain: ChainId::One
            })
        );
    }

    proptest! {
        #[test]
        fn ineligible_share_increases_with_farmers(
            v in 0.0f64..1.0, p in 0.0f64..0.5, gh in 0.01f64..0.9, h in 1u64..1000, e in 0.0f64..100.0, de in 0.01f64..50.0
        ) {
            let m = MarketParams { value: v, network_gamma: gh / h as f64, honest_count: h, ..market() };
            let c = chain(p, 0.0, 0.0, 0.0);
            let a = solve_marginal_ineligible(&m, &c, ChainId::One, e).unwrap();
            let b = solve_marginal_ineligible(&m, &c, ChainId::One, e + de).unwrap();
            prop_assert!(b > a);
            let a = solve_marginal_ineligible(&m, &c, ChainId::Two, e).unwrap();
            let b = solve_marginal_ineligible(&m, &c, ChainId::Two, e + de).unwrap();
            prop_assert!(1.0 - b > 1.0 - a);
        }

        #[test]
        fn resistance_inert_without_profitable_farming(
            rho in 0.0f64..=1.0, c in 0.1f64..0.3, f in 0.0f64..0.05
        ) {
            let m = MarketParams { farmer_cost_scale: 0.5, honest_count: 100, farmer_count: 10, network_gamma: 0.001, ..market() };
            let base = ChainParams { fixed_reward: f.max(1e-6), ..chain(0.1, c, 0.0, 0.0) };
            let a = solve_market(&m, &base, &ChainParams::no_drop(0.1)).unwrap();
            let b = solve_market(&m, &ChainParams { resist: rho, ..base }, &ChainParams::no_drop(0.1)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
