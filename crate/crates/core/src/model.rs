//! Market and chain parameters plus the three primitive payoff formulas
//! (reward per eligible account, honest-user utility, farmer per-account
//! utility) shared by every solver and simulator in the crate.
//!
//! Utilities and token amounts share one real-valued unit. Unbounded
//! quantities (sybil caps, farmer masses, revenues) are carried as IEEE
//! infinities.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("bias {0} is outside [0, 1]")]
    BiasOutOfRange(f64),
    #[error("proportional budget {budget} cannot be split over zero eligible accounts")]
    UndefinedReward { budget: f64 },
    #[error("parameter `{field}` = {value} violates {constraint}")]
    Domain {
        field: &'static str,
        value: f64,
        constraint: &'static str,
    },
}

/// One of the two competing chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChainId {
    One,
    Two,
}

impl ChainId {
    pub const BOTH: [ChainId; 2] = [ChainId::One, ChainId::Two];

    pub fn index(self) -> usize {
        match self {
            ChainId::One => 0,
            ChainId::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<ChainId> {
        match n {
            1 => Some(ChainId::One),
            2 => Some(ChainId::Two),
            _ => None,
        }
    }

    /// Maps a distance from this chain's endpoint back onto the bias axis.
    pub fn bias_at_distance(self, distance: f64) -> f64 {
        match self {
            ChainId::One => distance,
            ChainId::Two => 1.0 - distance,
        }
    }
}

impl fmt::Display for ChainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "chain{}", self.number())
    }
}

impl Serialize for ChainId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.number())
    }
}

impl<'de> Deserialize<'de> for ChainId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let n = u8::deserialize(d)?;
        ChainId::from_number(n)
            .ok_or_else(|| serde::de::Error::custom(format!("chain must be 1 or 2, got {n}")))
    }
}

/// Maximum number of sybil accounts a single farmer can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SybilCap {
    Finite(u64),
    Unbounded,
}

impl SybilCap {
    pub fn as_f64(self) -> f64 {
        match self {
            SybilCap::Finite(n) => n as f64,
            SybilCap::Unbounded => f64::INFINITY,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, SybilCap::Unbounded)
    }
}

impl Serialize for SybilCap {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            SybilCap::Finite(n) => s.serialize_u64(*n),
            SybilCap::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for SybilCap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) => Ok(SybilCap::Finite(n)),
            Raw::Word(w) if w.eq_ignore_ascii_case("unbounded") => Ok(SybilCap::Unbounded),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "expected a nonnegative integer or \"unbounded\", got \"{w}\""
            ))),
        }
    }
}

/// Population-level constants shared by both chains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    /// Usage value of interacting with any chain.
    #[serde(rename = "value_v")]
    pub value: f64,
    /// Per-capita network-effect strength.
    #[serde(rename = "network_gamma")]
    pub network_gamma: f64,
    /// Complementarity between holding the airdrop and usage value.
    #[serde(rename = "complementarity_delta")]
    pub complementarity_delta: f64,
    #[serde(rename = "honest_count_H")]
    pub honest_count: u64,
    #[serde(rename = "farmer_count_F")]
    pub farmer_count: u64,
    /// Farmers pay `lambda * c` to become eligible.
    #[serde(rename = "farmer_cost_scale_lambda")]
    pub farmer_cost_scale: f64,
    #[serde(rename = "sybil_cap_S")]
    pub sybil_cap: SybilCap,
}

impl MarketParams {
    pub fn honest(&self) -> f64 {
        self.honest_count as f64
    }

    pub fn farmers(&self) -> f64 {
        self.farmer_count as f64
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        finite("value_v", self.value)?;
        finite("network_gamma", self.network_gamma)?;
        finite("complementarity_delta", self.complementarity_delta)?;
        if self.value < 0.0 {
            return Err(domain("value_v", self.value, "v >= 0"));
        }
        if !(0.0..=1.0).contains(&self.farmer_cost_scale) {
            return Err(domain(
                "farmer_cost_scale_lambda",
                self.farmer_cost_scale,
                "0 <= lambda <= 1",
            ));
        }
        Ok(())
    }
}

/// Per-chain levers set by the issuer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainParams {
    #[serde(rename = "fee_p")]
    pub fee: f64,
    #[serde(rename = "eligibility_cost_c")]
    pub eligibility_cost: f64,
    #[serde(rename = "fixed_reward_f", default)]
    pub fixed_reward: f64,
    #[serde(rename = "proportional_budget_B", default)]
    pub budget: f64,
    #[serde(rename = "issuance_cost_k", default)]
    pub issuance_cost: f64,
    #[serde(rename = "resist_rho", default)]
    pub resist: f64,
}

/// Which airdrop mechanism a chain runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropKind {
    None,
    Fixed,
    Proportional,
    Hybrid,
}

impl ChainParams {
    /// A chain with the given fee and no airdrop.
    pub fn no_drop(fee: f64) -> Self {
        ChainParams {
            fee,
            eligibility_cost: 0.0,
            fixed_reward: 0.0,
            budget: 0.0,
            issuance_cost: 0.0,
            resist: 0.0,
        }
    }

    pub fn has_airdrop(&self) -> bool {
        self.fixed_reward > 0.0 || self.budget > 0.0
    }

    pub fn kind(&self) -> DropKind {
        match (self.fixed_reward > 0.0, self.budget > 0.0) {
            (false, false) => DropKind::None,
            (true, false) => DropKind::Fixed,
            (false, true) => DropKind::Proportional,
            (true, true) => DropKind::Hybrid,
        }
    }

    /// Issuer expense per eligible account. Only fixed rewards are issued
    /// per account; the proportional budget is a lump sum.
    pub fn per_account_expense(&self) -> f64 {
        if self.fixed_reward > 0.0 {
            self.issuance_cost
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        finite("fee_p", self.fee)?;
        finite("eligibility_cost_c", self.eligibility_cost)?;
        finite("fixed_reward_f", self.fixed_reward)?;
        finite("proportional_budget_B", self.budget)?;
        finite("issuance_cost_k", self.issuance_cost)?;
        if self.fee < 0.0 {
            return Err(domain("fee_p", self.fee, "p >= 0"));
        }
        if self.fixed_reward < 0.0 {
            return Err(domain("fixed_reward_f", self.fixed_reward, "f >= 0"));
        }
        if self.budget < 0.0 {
            return Err(domain("proportional_budget_B", self.budget, "B >= 0"));
        }
        if self.issuance_cost < 0.0 {
            return Err(domain("issuance_cost_k", self.issuance_cost, "k >= 0"));
        }
        if !(0.0..=1.0).contains(&self.resist) {
            return Err(domain("resist_rho", self.resist, "0 <= rho <= 1"));
        }
        Ok(())
    }
}

/// An actor's pick: a chain (or none) and whether to become eligible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ActorChoice {
    pub chain: Option<ChainId>,
    pub eligible: bool,
}

impl ActorChoice {
    pub const NONE: ActorChoice = ActorChoice {
        chain: None,
        eligible: false,
    };

    pub fn on(chain: ChainId, eligible: bool) -> Self {
        ActorChoice {
            chain: Some(chain),
            eligible,
        }
    }

    /// The five options in tie-break preference order.
    pub fn all() -> [ActorChoice; 5] {
        [
            ActorChoice::NONE,
            ActorChoice::on(ChainId::One, false),
            ActorChoice::on(ChainId::One, true),
            ActorChoice::on(ChainId::Two, false),
            ActorChoice::on(ChainId::Two, true),
        ]
    }
}

fn finite(field: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(domain(field, value, "a finite value"))
    }
}

fn domain(field: &'static str, value: f64, constraint: &'static str) -> ModelError {
    ModelError::Domain {
        field,
        value,
        constraint,
    }
}

/// Hotelling transport cost of a user with `bias` choosing `chain`.
pub fn transport_distance(chain: ChainId, bias: f64) -> Result<f64, ModelError> {
    if !(0.0..=1.0).contains(&bias) {
        return Err(ModelError::BiasOutOfRange(bias));
    }
    Ok(match chain {
        ChainId::One => bias,
        ChainId::Two => 1.0 - bias,
    })
}

/// `f + B / n`; just `f` when there is no proportional budget.
pub fn reward_per_eligible(chain: &ChainParams, eligible_count: f64) -> Result<f64, ModelError> {
    if chain.budget == 0.0 {
        return Ok(chain.fixed_reward);
    }
    if eligible_count <= 0.0 {
        return Err(ModelError::UndefinedReward {
            budget: chain.budget,
        });
    }
    Ok(chain.fixed_reward + chain.budget / eligible_count)
}

/// Honest utility at an explicit transport cost. Used directly by the
/// discrete game, where agents are not placed on the unit interval.
pub fn honest_utility_at_distance(
    market: &MarketParams,
    chain: &ChainParams,
    on_chain: bool,
    distance: f64,
    eligible: bool,
    userbase: f64,
    reward: f64,
) -> f64 {
    if !on_chain {
        return 0.0;
    }
    let network = market.network_gamma * userbase;
    let usage = market.value - distance;
    if eligible {
        (1.0 + market.complementarity_delta) * usage - chain.fee + network + reward
            - chain.eligibility_cost
    } else {
        usage - chain.fee + network
    }
}

/// Utility of an honest user with `bias` taking `choice`, given the
/// chosen chain's userbase and per-account reward.
pub fn honest_utility(
    market: &MarketParams,
    chain: &ChainParams,
    choice: ActorChoice,
    bias: f64,
    userbase: f64,
    reward: f64,
) -> Result<f64, ModelError> {
    let Some(id) = choice.chain else {
        return Ok(0.0);
    };
    let distance = transport_distance(id, bias)?;
    Ok(honest_utility_at_distance(
        market,
        chain,
        true,
        distance,
        choice.eligible,
        userbase,
        reward,
    ))
}

/// Payoff of one deployed sybil account: `r - lambda * c` when eligible.
pub fn farmer_account_utility(
    market: &MarketParams,
    chain: &ChainParams,
    eligible: bool,
    reward: f64,
) -> f64 {
    if eligible {
        reward - farmer_unit_cost(market, chain)
    } else {
        0.0
    }
}

pub fn farmer_unit_cost(market: &MarketParams, chain: &ChainParams) -> f64 {
    market.farmer_cost_scale * chain.eligibility_cost
}

/// Total accounts farmers may run: detected farmers (fraction `rho`) keep
/// one account each, the rest keep the full cap.
pub fn effective_sybil_capacity(market: &MarketParams, resist: f64) -> f64 {
    let farmers = market.farmers();
    let undetected = 1.0 - resist;
    let free = if undetected == 0.0 || farmers == 0.0 {
        0.0
    } else {
        farmers * undetected * market.sybil_cap.as_f64()
    };
    farmers * resist + free
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn transport_distance_endpoints() {
        assert_eq!(transport_distance(ChainId::One, 0.0).unwrap(), 0.0);
        assert_eq!(transport_distance(ChainId::Two, 0.25).unwrap(), 0.75);
        assert_eq!(transport_distance(ChainId::One, 1.0).unwrap(), 1.0);
        assert!(matches!(
            transport_distance(ChainId::One, 1.5),
            Err(ModelError::BiasOutOfRange(_))
        ));
        assert!(transport_distance(ChainId::Two, -0.1).is_err());
    }

    #[test]
    fn reward_composition() {
        assert_eq!(
            reward_per_eligible(&chain(0.0, 0.0, 0.0, 0.0), 5.0).unwrap(),
            0.0
        );
        assert_eq!(
            reward_per_eligible(&chain(0.0, 0.0, 2.0, 6.0), 3.0).unwrap(),
            4.0
        );
        assert_eq!(
            reward_per_eligible(&chain(0.0, 0.0, 1.1, 0.0), 4.0).unwrap(),
            1.1
        );
        // no budget: any count, including zero, is fine
        assert_eq!(
            reward_per_eligible(&chain(0.0, 0.0, 1.1, 0.0), 0.0).unwrap(),
            1.1
        );
        assert!(matches!(
            reward_per_eligible(&chain(0.0, 0.0, 0.0, 2.0), 0.0),
            Err(ModelError::UndefinedReward { .. })
        ));
    }

    #[test]
    fn motivating_utilities() {
        let market = MarketParams {
            value: 3.0,
            network_gamma: 1.0,
            complementarity_delta: 0.0,
            ..fixtures::market()
        };
        let incumbent = ChainParams::no_drop(3.0);
        let newcomer = ChainParams::no_drop(2.0);
        let at = |c: &ChainParams, n: f64| {
            honest_utility_at_distance(&market, c, true, 0.0, false, n, 0.0)
        };
        assert_eq!(at(&incumbent, 4.0), 4.0);
        assert_eq!(at(&newcomer, 0.0), 1.0);
        assert_eq!(at(&newcomer, 4.0), 5.0);
        assert_eq!(
            honest_utility(&market, &newcomer, ActorChoice::NONE, 0.3, 10.0, 1.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn farmer_payoffs() {
        let market = MarketParams {
            farmer_cost_scale: 0.5,
            ..fixtures::market()
        };
        let c = chain(0.0, 2.0, 1.1, 0.0);
        assert!((farmer_account_utility(&market, &c, true, 1.1) - 0.1).abs() < 1e-12);
        assert_eq!(farmer_account_utility(&market, &c, false, 1.1), 0.0);
        let c = chain(0.0, 1.0, 0.0, 0.0);
        assert_eq!(farmer_account_utility(&market, &c, true, 0.5), 0.0);
    }

    #[test]
    fn capacity_interpolates_between_endpoints() {
        let mut market = fixtures::market();
        market.farmer_count = 4;
        market.sybil_cap = SybilCap::Finite(5);
        assert_eq!(effective_sybil_capacity(&market, 0.0), 20.0);
        assert_eq!(effective_sybil_capacity(&market, 1.0), 4.0);
        assert_eq!(effective_sybil_capacity(&market, 0.5), 12.0);
        market.sybil_cap = SybilCap::Unbounded;
        assert_eq!(effective_sybil_capacity(&market, 1.0), 4.0);
        assert!(effective_sybil_capacity(&market, 0.5).is_infinite());
        market.farmer_count = 0;
        assert_eq!(effective_sybil_capacity(&market, 0.5), 0.0);
    }

    #[test]
    fn validation_names_the_field() {
        let mut market = fixtures::market();
        market.farmer_cost_scale = 1.5;
        let err = market.validate().unwrap_err().to_string();
        assert!(err.contains("farmer_cost_scale_lambda"), "{err}");
        let mut c = chain(0.1, 0.1, 0.0, 0.0);
        c.resist = -0.1;
        assert!(c.validate().unwrap_err().to_string().contains("resist_rho"));
    }

    proptest! {
        #[test]
        fn distances_are_complementary(x in 0.0f64..=1.0) {
            let d1 = transport_distance(ChainId::One, x).unwrap();
            let d2 = transport_distance(ChainId::Two, x).unwrap();
            prop_assert!((0.0..=1.0).contains(&d1) && (0.0..=1.0).contains(&d2));
            prop_assert!((d1 + d2 - 1.0).abs() < 1e-15);
        }

        #[test]
        fn reward_weakly_decreasing(f in 0.0f64..5.0, b in 0.0f64..10.0, n in 0.1f64..100.0, extra in 0.0f64..50.0) {
            let c = chain(0.0, 0.0, f, b);
            let r1 = reward_per_eligible(&c, n).unwrap();
            let r2 = reward_per_eligible(&c, n + extra).unwrap();
            prop_assert!(r2 <= r1);
            if b == 0.0 {
                prop_assert_eq!(r1, r2);
            }
        }

        #[test]
        fn eligibility_terms_cancel_without_complementarity(
            v in 0.0f64..2.0, x in 0.0f64..=1.0, p in 0.0f64..1.0, n in 0.0f64..100.0, c in -1.0f64..1.0
        ) {
            let market = MarketParams { value: v, complementarity_delta: 0.0, network_gamma: 0.01, ..fixtures::market() };
            let ch = chain(p, c, 0.0, 0.0);
            for id in ChainId::BOTH {
                let a = honest_utility(&market, &ch, ActorChoice::on(id, true), x, n, c).unwrap();
                let b = honest_utility(&market, &ch, ActorChoice::on(id, false), x, n, c).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn farmer_utility_is_linear(r in -5.0f64..5.0, c in -2.0f64..2.0, lambda in 0.0f64..=1.0, dr in 0.0f64..3.0, dc in 0.0f64..3.0) {
            let market = MarketParams { farmer_cost_scale: lambda, ..fixtures::market() };
            let base = farmer_account_utility(&market, &chain(0.0, c, 0.0, 0.0), true, r);
            let more_r = farmer_account_utility(&market, &chain(0.0, c, 0.0, 0.0), true, r + dr);
            let more_c = farmer_account_utility(&market, &chain(0.0, c + dc, 0.0, 0.0), true, r);
            prop_assert!((more_r - base - dr).abs() < 1e-9);
            prop_assert!((more_c - base + lambda * dc).abs() < 1e-9);
        }
    }
}
