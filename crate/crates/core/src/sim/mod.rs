//! Behavioral and protocol simulation: a logistic opt-in model for secret
//! holders, seeded end-to-end elections and incentive sweeps.

mod election;
mod model;
mod scenario;
mod sweep;

use thiserror::Error;

pub use election::{issue_identifiers, Election, SimVoter};
pub use model::{opt_in_probability, sigmoid, OptInModel, VoterProfile, Weights};
pub use scenario::{
    mean_opt_in, quick_outcome, run_scenario, run_scenario_run, ProfileDistribution,
    QuickOutcome, ScenarioConfig, ScenarioReport, ScoreRange,
};
pub use sweep::{sweep, write_csv, SweepCell, SweepGrid};

use crate::ledger::LedgerError;
use crate::tally::{RuleError, TallyError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Tally(#[from] TallyError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("io: {0}")]
    Io(String),
}
