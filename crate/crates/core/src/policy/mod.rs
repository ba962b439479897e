//! Parameter sweeps, scenario sampling, resistance-theorem checks and
//! single-issuer grid search.

mod agreement;
mod optimize;
mod sampling;
mod sweep;
mod verify;

use serde::Serialize;
use thiserror::Error;

use crate::engine::EngineError;
use crate::model::{ChainParams, MarketParams, ModelError};

pub use agreement::{oracle_gap, oracle_tolerance, OracleGap};
pub use optimize::{optimize_policy, GridPoint, Lever, LeverGrid, PolicyOptimum};
pub use sampling::{sample_valid_scenarios, ScenarioConstraints, MAX_DRAWS_BEFORE_GIVING_UP};
pub use sweep::{sweep, ParamPath, SweepRow, SweepSpec};
pub use verify::{
    check_fixed, check_proportional, verify_theorem_fixed, verify_theorem_proportional, CheckCase,
    ScenarioCheck, TheoremId, VerificationReport, Violation, RESIST_GRID,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("unknown parameter path `{0}`")]
    UnknownParameter(String),
    #[error("{path} = {value}: {reason}")]
    InvalidValue {
        path: String,
        value: f64,
        reason: String,
    },
    #[error("sweep has no values")]
    EmptySweep,
    #[error("lever grid is empty or has a lever with no values")]
    EmptyGrid,
    #[error("only {accepted} of {draws} sampled scenarios were valid; constraints are infeasible")]
    ConstraintInfeasible { accepted: usize, draws: usize },
    #[error("none of the {evaluated} grid points produced a valid outcome")]
    NoFeasiblePolicy { evaluated: usize },
    #[error("scenario count must be at least 1")]
    NoScenarios,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// A complete market: shared parameters plus both chains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scenario {
    pub market: MarketParams,
    pub chain1: ChainParams,
    pub chain2: ChainParams,
}
