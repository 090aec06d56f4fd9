//! Collectively secure voting: threshold timed-release ballot encryption held
//! by voter-elected secret holders, a hash-chained bulletin board, verifiable
//! tallying and an opt-in simulation harness.

pub mod canonical;
pub mod crypto;
pub mod format;
pub mod ledger;
pub mod tally;
pub mod sim;
