//! Session state machine. Every transition is split into a pure `validate`
//! that computes an [`Effect`] and a `commit` that applies it, so a record
//! can be persisted between the two.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{EligibilitySet, SessionConfig};
use super::events::Event;
use super::LedgerError;
use crate::canonical;
use crate::crypto::{h, verify_key_release, Digest32, EncryptedBallot, GroupElement, Scalar};
use crate::format::MAX_CIPHERTEXT_BYTES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PreRegistration,
    Registration,
    AwaitingVoting,
    Voting,
    Releasing,
    Closed,
    Settled,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyRelease {
    pub holder_index: u32,
    pub sk: Scalar,
    pub released_at: u64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HolderRecord {
    /// 1-based registration order.
    pub index: u32,
    pub once_digest: Digest32,
    pub pk: GroupElement,
    pub registered_at: u64,
    pub deposit_held: u64,
    /// The accepted (valid) release, if any.
    pub release: Option<KeyRelease>,
    pub failed_release_attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallotEntry {
    /// 1-based submission order.
    pub seq: u64,
    pub ballot: EncryptedBallot,
    pub received_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrozenHolders {
    pub n: u32,
    pub t: u32,
    pub at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Settlement {
    /// Holder index to tokens paid out.
    pub payouts: BTreeMap<u32, u64>,
    pub deposits_total: u64,
    pub rewards_paid: u64,
    pub forfeited: u64,
    pub settled_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub config: SessionConfig,
    pub eligibility: EligibilitySet,
    pub holders: Vec<HolderRecord>,
    pub ballots: Vec<BallotEntry>,
    /// Logical time of the latest accepted event.
    pub clock: u64,
    pub frozen: Option<FrozenHolders>,
    pub aborted: Option<String>,
    /// Deposits currently held in the host-funded escrow.
    pub escrow: u64,
    pub settlement: Option<Settlement>,
}

/// Outcome of validating one event against the current state.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Effect {
    Registered(HolderRecord),
    Frozen(FrozenHolders),
    Aborted { reason: String, now: u64 },
    BallotAccepted(BallotEntry),
    Released(KeyRelease),
    Settled(Settlement),
}

impl SessionState {
    pub(crate) fn create(
        config: SessionConfig,
        eligibility: EligibilitySet,
    ) -> Result<Self, LedgerError> {
        config.validate()?;
        if eligibility.is_empty() {
            return Err(LedgerError::config("eligibility set is empty"));
        }
        Ok(SessionState {
            config,
            eligibility,
            holders: Vec::new(),
            ballots: Vec::new(),
            clock: 0,
            frozen: None,
            aborted: None,
            escrow: 0,
            settlement: None,
        })
    }

    pub fn phase_at(&self, now: u64) -> Phase {
        let c = &self.config;
        if self.aborted.is_some() {
            Phase::Aborted
        } else if self.settlement.is_some() {
            Phase::Settled
        } else if now < c.registration_window.open {
            Phase::PreRegistration
        } else if now < c.registration_window.close {
            Phase::Registration
        } else if now < c.voting_window.open {
            Phase::AwaitingVoting
        } else if now < c.voting_window.close {
            Phase::Voting
        } else if now <= c.release_deadline {
            Phase::Releasing
        } else {
            Phase::Closed
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase_at(self.clock)
    }

    pub fn holder_pks(&self) -> Vec<GroupElement> {
        self.holders.iter().map(|h| h.pk).collect()
    }

    pub fn valid_releases(&self) -> Vec<(u32, Scalar)> {
        self.holders
            .iter()
            .filter_map(|h| h.release.as_ref().filter(|r| r.valid).map(|r| (h.index, r.sk)))
            .collect()
    }

    pub fn threshold_met(&self) -> bool {
        self.frozen.is_some_and(|f| self.valid_releases().len() >= f.t as usize)
    }

    pub fn to_canonical_json(&self) -> String {
        canonical::to_string(self)
    }

    fn phase_error(&self, op: &'static str, now: u64) -> LedgerError {
        LedgerError::PhaseError { op, phase: self.phase_at(now), now }
    }

    fn check_live(&self, now: u64) -> Result<(), LedgerError> {
        if let Some(reason) = &self.aborted {
            return Err(LedgerError::SessionAborted(reason.clone()));
        }
        if now < self.clock {
            return Err(LedgerError::ClockRegression { now, clock: self.clock });
        }
        Ok(())
    }

    pub(crate) fn validate(&self, event: &Event) -> Result<Effect, LedgerError> {
        match event {
            Event::CreateSession { .. } => Err(LedgerError::SessionExists),
            Event::RegisterHolder { once_digest, pk, now } => {
                self.validate_register(once_digest, pk, *now)
            }
            Event::FreezeHolders { now } => self.validate_freeze(*now),
            Event::SubmitBallot { ballot, now } => self.validate_ballot(ballot, *now),
            Event::ReleaseKey { holder_index, sk, now } => {
                self.validate_release(*holder_index, sk, *now)
            }
            Event::Settle { now } => self.validate_settle(*now),
        }
    }

    fn validate_register(
        &self,
        once_digest: &Digest32,
        pk: &GroupElement,
        now: u64,
    ) -> Result<Effect, LedgerError> {
        self.check_live(now)?;
        if !self.config.registration_window.contains(now) || self.frozen.is_some() {
            return Err(self.phase_error("register_holder", now));
        }
        if !self.eligibility.contains(&h(once_digest.as_bytes())) {
            return Err(LedgerError::NotEligible);
        }
        if self.holders.iter().any(|r| r.once_digest == *once_digest) {
            return Err(LedgerError::AlreadyRegistered);
        }
        if self.holders.iter().any(|r| r.pk == *pk) {
            return Err(LedgerError::DuplicateKey);
        }
        Ok(Effect::Registered(HolderRecord {
            index: self.holders.len() as u32 + 1,
            once_digest: *once_digest,
            pk: *pk,
            registered_at: now,
            deposit_held: self.config.deposit,
            release: None,
            failed_release_attempts: 0,
        }))
    }

    fn validate_freeze(&self, now: u64) -> Result<Effect, LedgerError> {
        self.check_live(now)?;
        if self.frozen.is_some()
            || now < self.config.registration_window.close
            || now >= self.config.voting_window.close
        {
            return Err(self.phase_error("freeze_holder_set", now));
        }
        let n = self.holders.len() as u32;
        match self.config.threshold_policy.resolve(n) {
            Some(t) => Ok(Effect::Frozen(FrozenHolders { n, t, at: now })),
            None if n == 0 => {
                Ok(Effect::Aborted { reason: "no secret holders registered".into(), now })
            }
            None => Ok(Effect::Aborted {
                reason: format!("threshold policy cannot be met by {n} holders"),
                now,
            }),
        }
    }

    fn validate_ballot(&self, ballot: &EncryptedBallot, now: u64) -> Result<Effect, LedgerError> {
        self.check_live(now)?;
        let frozen = match self.frozen {
            Some(f) if self.config.voting_window.contains(now) => f,
            _ => return Err(self.phase_error("submit_ballot", now)),
        };
        let p = &ballot.params;
        if p.n != frozen.n || p.t != frozen.t {
            return Err(LedgerError::MalformedBallot("holder count or threshold mismatch".into()));
        }
        if p.check_shape().is_err() {
            return Err(LedgerError::MalformedBallot("alpha count must equal n - t + 1".into()));
        }
        if p.ctx != self.config.ballot_context() {
            return Err(LedgerError::MalformedBallot("ballot bound to another session".into()));
        }
        let min_len = crate::crypto::SecretIdentifier::LEN + crate::crypto::TAG_LEN;
        if ballot.ciphertext.len() < min_len || ballot.ciphertext.len() > MAX_CIPHERTEXT_BYTES {
            return Err(LedgerError::MalformedBallot("ciphertext size out of bounds".into()));
        }
        if self.ballots.iter().any(|b| b.ballot.nonce == ballot.nonce) {
            return Err(LedgerError::DuplicateBallot);
        }
        Ok(Effect::BallotAccepted(BallotEntry {
            seq: self.ballots.len() as u64 + 1,
            ballot: ballot.clone(),
            received_at: now,
        }))
    }

    fn validate_release(
        &self,
        holder_index: u32,
        sk: &Scalar,
        now: u64,
    ) -> Result<Effect, LedgerError> {
        self.check_live(now)?;
        if self.frozen.is_none()
            || self.settlement.is_some()
            || now < self.config.voting_window.close
            || now > self.config.release_deadline
        {
            return Err(self.phase_error("release_key", now));
        }
        let holder = holder_index
            .checked_sub(1)
            .and_then(|i| self.holders.get(i as usize))
            .ok_or(LedgerError::NotFound(holder_index))?;
        if holder.release.is_some() {
            return Err(LedgerError::AlreadyReleased(holder_index));
        }
        Ok(Effect::Released(KeyRelease {
            holder_index,
            sk: *sk,
            released_at: now,
            valid: verify_key_release(&holder.pk, sk),
        }))
    }

    fn validate_settle(&self, now: u64) -> Result<Effect, LedgerError> {
        if now < self.clock {
            return Err(LedgerError::ClockRegression { now, clock: self.clock });
        }
        if self.settlement.is_some() {
            return Err(self.phase_error("settle_incentives", now));
        }
        if self.aborted.is_none() && now <= self.config.release_deadline {
            return Err(self.phase_error("settle_incentives", now));
        }
        let mut settlement = Settlement {
            payouts: BTreeMap::new(),
            deposits_total: 0,
            rewards_paid: 0,
            forfeited: 0,
            settled_at: now,
        };
        for holder in &self.holders {
            settlement.deposits_total += holder.deposit_held;
            let payout = if self.aborted.is_some() {
                // Nobody could release; deposits are refunded.
                holder.deposit_held
            } else if holder.release.as_ref().is_some_and(|r| r.valid) {
                settlement.rewards_paid += self.config.reward;
                holder.deposit_held + self.config.reward
            } else {
                settlement.forfeited += holder.deposit_held;
                0
            };
            settlement.payouts.insert(holder.index, payout);
        }
        Ok(Effect::Settled(settlement))
    }

    pub(crate) fn commit(&mut self, effect: Effect, now: u64) {
        self.clock = self.clock.max(now);
        match effect {
            Effect::Registered(record) => {
                self.escrow += record.deposit_held;
                self.holders.push(record);
            }
            Effect::Frozen(frozen) => self.frozen = Some(frozen),
            Effect::Aborted { reason, .. } => self.aborted = Some(reason),
            Effect::BallotAccepted(entry) => self.ballots.push(entry),
            Effect::Released(release) => {
                let holder = &mut self.holders[release.holder_index as usize - 1];
                if release.valid {
                    holder.release = Some(release);
                } else {
                    holder.failed_release_attempts += 1;
                }
            }
            Effect::Settled(settlement) => {
                self.escrow = 0;
                self.settlement = Some(settlement);
            }
        }
    }
}
