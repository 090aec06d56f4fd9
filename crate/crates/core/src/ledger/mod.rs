//! Deterministic append-only bulletin board standing in for the voting
//! contract.
//!
//! [`Ledger`] is the single writer: each operation validates against the
//! current [`SessionState`], hands the resulting record to its
//! [`BulletinBoard`] backend, appends it to the hash-chained [`EventLog`] and
//! only then applies it. The state is a pure fold over the log, so
//! [`Ledger::replay`] reproduces it exactly.

mod config;
mod events;
mod state;

use thiserror::Error;

pub use config::{ClockMapping, EligibilitySet, SessionConfig, ThresholdPolicy, Window};
pub use events::{chain_hash, Event, EventLog, ExportedRecord, LogRecord, GENESIS_HASH};
pub use state::{
    BallotEntry, FrozenHolders, HolderRecord, KeyRelease, Phase, SessionState, Settlement,
};

use crate::crypto::{Digest32, EncryptedBallot, GroupElement, Scalar};
use state::Effect;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("invalid session config: {0}")]
    ConfigError(String),
    #[error("identifier digest is not in the eligibility set")]
    NotEligible,
    #[error("identifier already registered as a secret holder")]
    AlreadyRegistered,
    #[error("public key already registered")]
    DuplicateKey,
    #[error("{op} not allowed in phase {phase:?} at tick {now}")]
    PhaseError { op: &'static str, phase: Phase, now: u64 },
    #[error("session aborted: {0}")]
    SessionAborted(String),
    #[error("malformed ballot: {0}")]
    MalformedBallot(String),
    #[error("ballot nonce already on the board")]
    DuplicateBallot,
    #[error("no holder with index {0}")]
    NotFound(u32),
    #[error("holder {0} already released a valid key")]
    AlreadyReleased(u32),
    #[error("tick {now} precedes ledger clock {clock}")]
    ClockRegression { now: u64, clock: u64 },
    #[error("no session on this ledger")]
    NoSession,
    #[error("a session already exists on this ledger")]
    SessionExists,
    #[error("tamper detected at record {position}: {reason}")]
    TamperDetected { position: usize, reason: String },
    #[error("event {position} is not valid in sequence: {reason}")]
    InvalidEvent { position: usize, reason: String },
    #[error("storage failure: {0}")]
    Storage(String),
}

impl LedgerError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        LedgerError::ConfigError(msg.into())
    }

    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            LedgerError::ConfigError(_) => "ConfigError",
            LedgerError::NotEligible => "NotEligible",
            LedgerError::AlreadyRegistered => "AlreadyRegistered",
            LedgerError::DuplicateKey => "DuplicateKey",
            LedgerError::PhaseError { .. } => "PhaseError",
            LedgerError::SessionAborted(_) => "SessionAborted",
            LedgerError::MalformedBallot(_) => "MalformedBallot",
            LedgerError::DuplicateBallot => "DuplicateBallot",
            LedgerError::NotFound(_) => "NotFound",
            LedgerError::AlreadyReleased(_) => "AlreadyReleased",
            LedgerError::ClockRegression { .. } => "ClockRegression",
            LedgerError::NoSession => "NoSession",
            LedgerError::SessionExists => "SessionExists",
            LedgerError::TamperDetected { .. } => "TamperDetected",
            LedgerError::InvalidEvent { .. } => "InvalidEvent",
            LedgerError::Storage(_) => "Storage",
        }
    }
}

/// Backend that durably records accepted events before they take effect.
/// A public-chain adapter would implement this.
pub trait BulletinBoard {
    fn persist(&mut self, record: &LogRecord) -> Result<(), LedgerError>;
}

/// Keeps nothing beyond the in-memory log.
#[derive(Debug, Clone, Copy, Default)]
pub struct InMemoryBoard;

impl BulletinBoard for InMemoryBoard {
    fn persist(&mut self, _record: &LogRecord) -> Result<(), LedgerError> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Ledger<B = InMemoryBoard> {
    session: Option<SessionState>,
    log: EventLog,
    board: B,
}

impl Default for Ledger<InMemoryBoard> {
    fn default() -> Self {
        Ledger::empty(InMemoryBoard)
    }
}

impl Ledger<InMemoryBoard> {
    /// Creates a session on a fresh in-memory ledger.
    pub fn create_session(
        config: SessionConfig,
        eligibility: EligibilitySet,
    ) -> Result<Self, LedgerError> {
        let mut ledger = Ledger::default();
        ledger.open_session(config, eligibility)?;
        Ok(ledger)
    }

    /// Rebuilds a ledger by folding an event log.
    pub fn replay(log: &EventLog) -> Result<Self, LedgerError> {
        Ledger::replay_onto(log, InMemoryBoard)
    }

    /// Decodes and replays a binary log file.
    pub fn replay_bytes(bytes: &[u8]) -> Result<Self, LedgerError> {
        Ledger::replay(&EventLog::from_bytes(bytes)?)
    }
}

impl<B: BulletinBoard> Ledger<B> {
    pub fn empty(board: B) -> Self {
        Ledger { session: None, log: EventLog::new(), board }
    }

    /// Replays `log` and continues with `board` as the backend for new events.
    pub fn replay_onto(log: &EventLog, board: B) -> Result<Self, LedgerError> {
        let mut session: Option<SessionState> = None;
        for (position, event) in log.events().enumerate() {
            let invalid = |e: LedgerError| LedgerError::InvalidEvent { position, reason: e.to_string() };
            match (&mut session, event) {
                (None, Event::CreateSession { config, eligibility }) => {
                    session = Some(
                        SessionState::create(config.clone(), eligibility.clone()).map_err(invalid)?,
                    );
                }
                (None, _) => return Err(invalid(LedgerError::NoSession)),
                (Some(state), event) => {
                    let effect = state.validate(event).map_err(invalid)?;
                    state.commit(effect, event.now());
                }
            }
        }
        Ok(Ledger { session, log: log.clone(), board })
    }

    pub fn board(&self) -> &B {
        &self.board
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn head(&self) -> Digest32 {
        self.log.head()
    }

    pub fn session(&self) -> Option<&SessionState> {
        self.session.as_ref()
    }

    pub fn state(&self) -> Result<&SessionState, LedgerError> {
        self.session.as_ref().ok_or(LedgerError::NoSession)
    }

    /// Opens the session on an empty ledger.
    pub fn open_session(
        &mut self,
        config: SessionConfig,
        eligibility: EligibilitySet,
    ) -> Result<(), LedgerError> {
        if self.session.is_some() {
            return Err(LedgerError::SessionExists);
        }
        let state = SessionState::create(config.clone(), eligibility.clone())?;
        let record = self.log.next_record(Event::CreateSession { config, eligibility });
        self.board.persist(&record)?;
        self.log.push(record);
        self.session = Some(state);
        Ok(())
    }

    /// Validates, persists, appends and applies one event.
    pub fn submit(&mut self, event: Event) -> Result<&LogRecord, LedgerError> {
        if let Event::CreateSession { config, eligibility } = event {
            self.open_session(config, eligibility)?;
        } else {
            self.apply(event)?;
        }
        Ok(self.log.records().last().expect("record appended"))
    }

    fn apply(&mut self, event: Event) -> Result<Effect, LedgerError> {
        let state = self.session.as_mut().ok_or(LedgerError::NoSession)?;
        let effect = state.validate(&event)?;
        let now = event.now();
        let record = self.log.next_record(event);
        self.board.persist(&record)?;
        self.log.push(record);
        state.commit(effect.clone(), now);
        Ok(effect)
    }

    pub fn register_holder(
        &mut self,
        once_digest: Digest32,
        pk: GroupElement,
        now: u64,
    ) -> Result<u32, LedgerError> {
        match self.apply(Event::RegisterHolder { once_digest, pk, now })? {
            Effect::Registered(record) => Ok(record.index),
            _ => unreachable!("registration yields a holder record"),
        }
    }

    /// Fixes `(n, t)` for the session. If no valid threshold exists the abort
    /// is recorded on the board and reported as `SessionAborted`.
    pub fn freeze_holder_set(&mut self, now: u64) -> Result<(u32, u32), LedgerError> {
        match self.apply(Event::FreezeHolders { now })? {
            Effect::Frozen(f) => Ok((f.n, f.t)),
            Effect::Aborted { reason, .. } => Err(LedgerError::SessionAborted(reason)),
            _ => unreachable!("freeze yields frozen or aborted"),
        }
    }

    pub fn submit_ballot(&mut self, ballot: EncryptedBallot, now: u64) -> Result<u64, LedgerError> {
        match self.apply(Event::SubmitBallot { ballot, now })? {
            Effect::BallotAccepted(entry) => Ok(entry.seq),
            _ => unreachable!("submission yields a ballot entry"),
        }
    }

    /// Records a key release. An invalid key is recorded as a failed attempt
    /// and the holder may retry until the deadline.
    pub fn release_key(
        &mut self,
        holder_index: u32,
        sk: Scalar,
        now: u64,
    ) -> Result<KeyRelease, LedgerError> {
        match self.apply(Event::ReleaseKey { holder_index, sk, now })? {
            Effect::Released(release) => Ok(release),
            _ => unreachable!("release yields a key release"),
        }
    }

    pub fn settle_incentives(&mut self, now: u64) -> Result<Settlement, LedgerError> {
        match self.apply(Event::Settle { now })? {
            Effect::Settled(settlement) => Ok(settlement),
            _ => unreachable!("settle yields a settlement"),
        }
    }
}
