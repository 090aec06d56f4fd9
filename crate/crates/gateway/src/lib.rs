//! HTTP gateway and host tooling around the collvote ledger.

pub mod api;
pub mod board;
pub mod cli;
pub mod clock;

pub use api::{ApiError, BallotRequest, Gateway, LogQuery, RegisterRequest, ReleaseRequest};
pub use board::{read_log, Board, FileBoard};
pub use clock::{Clock, ManualClock, WallClock};
