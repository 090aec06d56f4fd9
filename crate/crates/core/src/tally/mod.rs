//! Verifiable tallying: reconstruct each ballot's secret from the released
//! holder keys, decrypt, validate, keep the latest valid ballot per
//! identifier and apply the session rule.

mod rules;
mod verify;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rules::{apply_rule, NumericAggregate, OptionScore, Rule, RuleError, RuleOutcome};
pub use verify::{verify_transcript, FieldDiff, VerifyReport};

use crate::canonical;
use crate::crypto::{
    decrypt_ballot, eligibility_digests, reconstruct_secret, secret_commitment,
    Digest32, Scalar, SecretIdentifier,
};
use crate::format::BallotChoice;
use crate::ledger::{BallotEntry, BulletinBoard, Ledger, LedgerError, SessionState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TallyError {
    #[error("threshold not met: {valid} valid releases, {needed} needed")]
    ThresholdNotMet { valid: usize, needed: usize },
    #[error("holder set has not been frozen")]
    NotFrozen,
    #[error("session aborted: {0}")]
    SessionAborted(String),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

impl TallyError {
    pub fn code(&self) -> &'static str {
        match self {
            TallyError::ThresholdNotMet { .. } => "ThresholdNotMet",
            TallyError::NotFrozen => "NotFrozen",
            TallyError::SessionAborted(_) => "SessionAborted",
            TallyError::Rule(_) => "RuleError",
            TallyError::Ledger(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validity {
    Valid,
    BadFormat,
    NotEligible,
    AuthFailure,
    Superseded,
}

/// A ballot after decryption and validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecryptedBallot {
    pub seq: u64,
    pub choice: Option<BallotChoice>,
    pub identifier: Option<SecretIdentifier>,
    pub received_at: u64,
    pub validity: Validity,
}

/// Per-ballot line of the transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallotRecord {
    pub seq: u64,
    pub received_at: u64,
    pub shares_used: Vec<u32>,
    pub shares_checked: Vec<u32>,
    /// Commitment to the reconstructed ballot secret.
    pub secret_commitment: Option<Digest32>,
    pub validity: Validity,
    /// `h(h(I))` of the embedded identifier, linking the ballot to its entry in S.
    pub voter: Option<Digest32>,
    pub choice: Option<BallotChoice>,
    pub superseded_by: Option<u64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityCounts {
    pub valid: u64,
    pub bad_format: u64,
    pub not_eligible: u64,
    pub auth_failure: u64,
    pub superseded: u64,
}

impl ValidityCounts {
    pub fn total(&self) -> u64 {
        self.valid + self.bad_format + self.not_eligible + self.auth_failure + self.superseded
    }

    fn bump(&mut self, validity: Validity) {
        match validity {
            Validity::Valid => self.valid += 1,
            Validity::BadFormat => self.bad_format += 1,
            Validity::NotEligible => self.not_eligible += 1,
            Validity::AuthFailure => self.auth_failure += 1,
            Validity::Superseded => self.superseded += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turnout {
    pub voters: u64,
    pub eligible: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleResult {
    pub outcome: RuleOutcome,
    pub counts: ValidityCounts,
    pub turnout: Turnout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReleaseUsed {
    pub holder_index: u32,
    pub sk: Scalar,
}

/// Position in the event log a transcript was computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogAnchor {
    pub events: usize,
    pub head: Digest32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyTranscript {
    pub session_id: String,
    pub n: u32,
    pub t: u32,
    pub anchor: Option<LogAnchor>,
    pub releases: Vec<ReleaseUsed>,
    pub ballots: Vec<BallotRecord>,
    pub result: RuleResult,
}

impl TallyTranscript {
    pub fn to_canonical_json(&self) -> String {
        canonical::to_string(self)
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }

    /// Plain-text summary for terminals and the web client.
    pub fn render_summary(&self) -> String {
        let mut out = format!(
            "session {}: {}-of-{} holders, {} keys released\n",
            self.session_id,
            self.t,
            self.n,
            self.releases.len()
        );
        let outcome = &self.result.outcome;
        out.push_str(&format!("rule: {:?}\n", outcome.rule));
        for score in &outcome.scores {
            out.push_str(&format!("  {}: {}\n", score.option, score.score));
        }
        if let Some(numeric) = &outcome.numeric {
            out.push_str(&format!("  count: {}  sum: {}", numeric.count, numeric.sum));
            if let Some(mean) = &numeric.mean {
                out.push_str(&format!("  mean: {mean}"));
            }
            out.push('\n');
        }
        if !outcome.winners.is_empty() {
            out.push_str(&format!("winners: {}\n", outcome.winners.join(", ")));
        }
        let c = &self.result.counts;
        out.push_str(&format!(
            "ballots: {} valid, {} superseded, {} bad format, {} not eligible, {} auth failure\n",
            c.valid, c.superseded, c.bad_format, c.not_eligible, c.auth_failure
        ));
        out.push_str(&format!(
            "turnout: {}/{}\n",
            self.result.turnout.voters, self.result.turnout.eligible
        ));
        out
    }
}

struct Opened {
    record: BallotRecord,
    identifier: Option<SecretIdentifier>,
}

impl Opened {
    fn decrypted(&self) -> DecryptedBallot {
        DecryptedBallot {
            seq: self.record.seq,
            choice: self.record.choice.clone(),
            identifier: self.identifier,
            received_at: self.record.received_at,
            validity: self.record.validity,
        }
    }
}

fn open_ballot(
    state: &SessionState,
    entry: &BallotEntry,
    releases: &[(u32, Scalar)],
    holder_pks: &[crate::crypto::GroupElement],
) -> Opened {
    let mut record = BallotRecord {
        seq: entry.seq,
        received_at: entry.received_at,
        shares_used: Vec::new(),
        shares_checked: Vec::new(),
        secret_commitment: None,
        validity: Validity::AuthFailure,
        voter: None,
        choice: None,
        superseded_by: None,
        failure: None,
    };
    let ballot = &entry.ballot;
    let reconstruction = match reconstruct_secret(&ballot.params, &ballot.nonce, releases, holder_pks)
    {
        Ok(r) => r,
        Err(e) => {
            record.failure = Some(e.to_string());
            return Opened { record, identifier: None };
        }
    };
    record.shares_used = reconstruction.shares_used;
    record.shares_checked = reconstruction.shares_checked;
    record.secret_commitment = Some(secret_commitment(&reconstruction.secret));

    let (payload, identifier) = match decrypt_ballot(ballot, &reconstruction.secret) {
        Ok(opened) => opened,
        Err(e) => {
            record.failure = Some(e.to_string());
            return Opened { record, identifier: None };
        }
    };
    let digests = eligibility_digests(&identifier);
    record.voter = Some(digests.twice);

    record.validity = match state.config.ballot_format.parse(&payload) {
        Err(e) => {
            record.failure = Some(e.to_string());
            Validity::BadFormat
        }
        Ok(_) if !state.config.voting_window.contains(entry.received_at) => {
            record.failure = Some("cast outside the voting window".into());
            Validity::BadFormat
        }
        Ok(_) if !state.eligibility.contains(&digests.twice) => Validity::NotEligible,
        Ok(choice) => {
            record.choice = Some(choice);
            Validity::Valid
        }
    };
    Opened { record, identifier: Some(identifier) }
}

fn open_all(state: &SessionState) -> Result<(Vec<Opened>, usize), TallyError> {
    if let Some(reason) = &state.aborted {
        return Err(TallyError::SessionAborted(reason.clone()));
    }
    let frozen = state.frozen.ok_or(TallyError::NotFrozen)?;
    let releases = state.valid_releases();
    if releases.len() < frozen.t as usize {
        return Err(TallyError::ThresholdNotMet { valid: releases.len(), needed: frozen.t as usize });
    }
    let holder_pks = state.holder_pks();

    let mut opened: Vec<Opened> = state
        .ballots
        .par_iter()
        .map(|entry| open_ballot(state, entry, &releases, &holder_pks))
        .collect();

    // Latest valid ballot per identifier wins.
    let mut latest: HashMap<SecretIdentifier, u64> = HashMap::new();
    for o in &opened {
        if let (Validity::Valid, Some(id)) = (o.record.validity, o.identifier) {
            let seq = latest.entry(id).or_insert(o.record.seq);
            *seq = (*seq).max(o.record.seq);
        }
    }
    for o in &mut opened {
        if let (Validity::Valid, Some(id)) = (o.record.validity, o.identifier) {
            let winner = latest[&id];
            if winner != o.record.seq {
                o.record.validity = Validity::Superseded;
                o.record.superseded_by = Some(winner);
            }
        }
    }
    Ok((opened, latest.len()))
}

/// Decrypts and classifies every ballot on the board. Fails without
/// exposing anything while fewer than `t` valid keys are released.
pub fn decrypt_ballots(state: &SessionState) -> Result<Vec<DecryptedBallot>, TallyError> {
    Ok(open_all(state)?.0.iter().map(Opened::decrypted).collect())
}

/// Tallies a session snapshot.
pub fn tally(state: &SessionState) -> Result<TallyTranscript, TallyError> {
    let (opened, voters) = open_all(state)?;
    let frozen = state.frozen.expect("checked by open_all");
    let releases = state.valid_releases();

    let mut counts = ValidityCounts::default();
    for o in &opened {
        counts.bump(o.record.validity);
    }
    let valid_choices: Vec<BallotChoice> = opened
        .iter()
        .filter(|o| o.record.validity == Validity::Valid)
        .filter_map(|o| o.record.choice.clone())
        .collect();
    let outcome = apply_rule(state.config.rule(), &state.config.ballot_format, &valid_choices)?;

    Ok(TallyTranscript {
        session_id: state.config.session_id.clone(),
        n: frozen.n,
        t: frozen.t,
        anchor: None,
        releases: releases
            .into_iter()
            .map(|(holder_index, sk)| ReleaseUsed { holder_index, sk })
            .collect(),
        ballots: opened.into_iter().map(|o| o.record).collect(),
        result: RuleResult {
            outcome,
            counts,
            turnout: Turnout { voters: voters as u64, eligible: state.eligibility.len() as u64 },
        },
    })
}

/// Tallies the ledger's current state and anchors the transcript to its log head.
pub fn tally_ledger<B: BulletinBoard>(ledger: &Ledger<B>) -> Result<TallyTranscript, TallyError> {
    let mut transcript = tally(ledger.state()?)?;
    transcript.anchor = Some(LogAnchor { events: ledger.log().len(), head: ledger.head() });
    Ok(transcript)
}
