//! Ballot formats and the plaintext ballot encoding.
//!
//! A plaintext ballot is the compact JSON encoding of a [`BallotChoice`],
//! e.g. `{"single_choice":1}` or `{"numeric":42}`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{SecretIdentifier, TAG_LEN};

/// Largest accepted plaintext ballot.
pub const MAX_PAYLOAD_BYTES: usize = 4096;

/// Largest accepted ciphertext: payload, embedded identifier and AEAD tag.
pub const MAX_CIPHERTEXT_BYTES: usize = MAX_PAYLOAD_BYTES + SecretIdentifier::LEN + TAG_LEN;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("ballot format has no options")]
    NoOptions,
    #[error("numeric ballot format needs a well-ordered range")]
    BadRange,
    #[error("payload is not a ballot: {0}")]
    Unparseable(String),
    #[error("payload exceeds {MAX_PAYLOAD_BYTES} bytes")]
    TooLarge,
    #[error("ballot kind does not match the session format")]
    KindMismatch,
    #[error("option index {0} out of range")]
    OptionOutOfRange(u32),
    #[error("option index {0} repeated")]
    RepeatedOption(u32),
    #[error("ranked ballot is empty")]
    EmptyRanking,
    #[error("numeric value {0} outside the allowed range")]
    ValueOutOfRange(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallotKind {
    SingleChoice,
    Approval,
    Ranked,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallotFormat {
    pub kind: BallotKind,
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numeric_range: Option<(i64, i64)>,
}

/// A voter's decoded choice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallotChoice {
    SingleChoice(u32),
    /// Approved option indices, any subset.
    Approval(Vec<u32>),
    /// Option indices from most to least preferred; unranked options score zero.
    Ranked(Vec<u32>),
    Numeric(i64),
}

impl BallotChoice {
    pub fn kind(&self) -> BallotKind {
        match self {
            BallotChoice::SingleChoice(_) => BallotKind::SingleChoice,
            BallotChoice::Approval(_) => BallotKind::Approval,
            BallotChoice::Ranked(_) => BallotKind::Ranked,
            BallotChoice::Numeric(_) => BallotKind::Numeric,
        }
    }

    pub fn to_payload(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("ballot choice serializes")
    }
}

impl BallotFormat {
    pub fn single_choice<S: Into<String>>(options: impl IntoIterator<Item = S>) -> Self {
        Self::with_kind(BallotKind::SingleChoice, options)
    }

    pub fn numeric(label: impl Into<String>, min: i64, max: i64) -> Self {
        BallotFormat {
            kind: BallotKind::Numeric,
            options: vec![label.into()],
            numeric_range: Some((min, max)),
        }
    }

    pub fn with_kind<S: Into<String>>(kind: BallotKind, options: impl IntoIterator<Item = S>) -> Self {
        BallotFormat { kind, options: options.into_iter().map(Into::into).collect(), numeric_range: None }
    }

    pub fn validate(&self) -> Result<(), FormatError> {
        if self.options.is_empty() {
            return Err(FormatError::NoOptions);
        }
        match (self.kind, self.numeric_range) {
            (BallotKind::Numeric, Some((lo, hi))) if lo <= hi => Ok(()),
            (BallotKind::Numeric, _) => Err(FormatError::BadRange),
            _ => Ok(()),
        }
    }

    fn check_index(&self, idx: u32) -> Result<(), FormatError> {
        if (idx as usize) < self.options.len() {
            Ok(())
        } else {
            Err(FormatError::OptionOutOfRange(idx))
        }
    }

    fn check_distinct(&self, indices: &[u32]) -> Result<(), FormatError> {
        let mut seen = HashSet::new();
        for &idx in indices {
            self.check_index(idx)?;
            if !seen.insert(idx) {
                return Err(FormatError::RepeatedOption(idx));
            }
        }
        Ok(())
    }

    /// Checks a decoded choice against this format.
    pub fn check(&self, choice: &BallotChoice) -> Result<(), FormatError> {
        if choice.kind() != self.kind {
            return Err(FormatError::KindMismatch);
        }
        match choice {
            BallotChoice::SingleChoice(idx) => self.check_index(*idx),
            BallotChoice::Approval(indices) => self.check_distinct(indices),
            BallotChoice::Ranked(indices) => {
                if indices.is_empty() {
                    return Err(FormatError::EmptyRanking);
                }
                self.check_distinct(indices)
            }
            BallotChoice::Numeric(v) => match self.numeric_range {
                Some((lo, hi)) if (lo..=hi).contains(v) => Ok(()),
                _ => Err(FormatError::ValueOutOfRange(*v)),
            },
        }
    }

    /// Decodes and validates a plaintext ballot.
    pub fn parse(&self, payload: &[u8]) -> Result<BallotChoice, FormatError> {
        if payload.len() > MAX_PAYLOAD_BYTES {
            return Err(FormatError::TooLarge);
        }
        let choice: BallotChoice =
            serde_json::from_slice(payload).map_err(|e| FormatError::Unparseable(e.to_string()))?;
        self.check(&choice)?;
        Ok(choice)
    }

    /// Encodes a choice after checking it, so malformed ballots never get encrypted.
    pub fn encode(&self, choice: &BallotChoice) -> Result<Vec<u8>, FormatError> {
        self.check(choice)?;
        Ok(choice.to_payload())
    }
}
