//! Hash-chained event log.
//!
//! On disk every record is
//!
//! ```text
//! u32 LE length | u8 tag | payload (canonical JSON) | chain hash (32 bytes)
//! ```
//!
//! where `length` covers tag, payload and hash, and
//! `chain_hash = sha256(prev_chain_hash || payload)` with an all-zero genesis.

use serde::{Deserialize, Serialize};

use super::config::{EligibilitySet, SessionConfig};
use super::LedgerError;
use crate::canonical;
use crate::crypto::{h, Digest32, EncryptedBallot, GroupElement, Scalar};

pub const GENESIS_HASH: Digest32 = Digest32([0u8; 32]);

const HEADER_LEN: usize = 4;
const TAG_LEN: usize = 1;
const HASH_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    CreateSession { config: SessionConfig, eligibility: EligibilitySet },
    RegisterHolder { once_digest: Digest32, pk: GroupElement, now: u64 },
    FreezeHolders { now: u64 },
    SubmitBallot { ballot: EncryptedBallot, now: u64 },
    ReleaseKey { holder_index: u32, sk: Scalar, now: u64 },
    Settle { now: u64 },
}

impl Event {
    pub fn tag(&self) -> u8 {
        match self {
            Event::CreateSession { .. } => 1,
            Event::RegisterHolder { .. } => 2,
            Event::FreezeHolders { .. } => 3,
            Event::SubmitBallot { .. } => 4,
            Event::ReleaseKey { .. } => 5,
            Event::Settle { .. } => 6,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Event::CreateSession { .. } => "create_session",
            Event::RegisterHolder { .. } => "register_holder",
            Event::FreezeHolders { .. } => "freeze_holders",
            Event::SubmitBallot { .. } => "submit_ballot",
            Event::ReleaseKey { .. } => "release_key",
            Event::Settle { .. } => "settle",
        }
    }

    /// Logical time carried by the event; session creation happens at tick 0.
    pub fn now(&self) -> u64 {
        match self {
            Event::CreateSession { .. } => 0,
            Event::RegisterHolder { now, .. }
            | Event::FreezeHolders { now }
            | Event::SubmitBallot { now, .. }
            | Event::ReleaseKey { now, .. }
            | Event::Settle { now } => *now,
        }
    }

    pub fn canonical_payload(&self) -> Vec<u8> {
        canonical::to_vec(self)
    }
}

pub fn chain_hash(prev: &Digest32, payload: &[u8]) -> Digest32 {
    let mut preimage = Vec::with_capacity(HASH_LEN + payload.len());
    preimage.extend_from_slice(prev.as_bytes());
    preimage.extend_from_slice(payload);
    h(&preimage)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub event: Event,
    pub payload: Vec<u8>,
    pub chain_hash: Digest32,
}

impl LogRecord {
    fn new(event: Event, prev: &Digest32) -> Self {
        let payload = event.canonical_payload();
        let chain_hash = chain_hash(prev, &payload);
        LogRecord { event, payload, chain_hash }
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        let len = (TAG_LEN + self.payload.len() + HASH_LEN) as u32;
        out.extend_from_slice(&len.to_le_bytes());
        out.push(self.event.tag());
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(self.chain_hash.as_bytes());
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }
}

/// JSON view of one record for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedRecord {
    pub position: usize,
    pub tag: u8,
    pub event: Event,
    pub chain_hash: Digest32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    records: Vec<LogRecord>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn head(&self) -> Digest32 {
        self.records.last().map_or(GENESIS_HASH, |r| r.chain_hash)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.records.iter().map(|r| &r.event)
    }

    /// Builds the record that would follow the current head.
    pub fn next_record(&self, event: Event) -> LogRecord {
        LogRecord::new(event, &self.head())
    }

    /// Appends a record built by [`EventLog::next_record`] against the current head.
    pub(crate) fn push(&mut self, record: LogRecord) {
        debug_assert_eq!(chain_hash(&self.head(), &record.payload), record.chain_hash);
        self.records.push(record);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for record in &self.records {
            record.encode_into(&mut out);
        }
        out
    }

    /// Decodes a log file, checking framing, tags, payload encodings and
    /// the hash chain. Any defect is reported as tampering.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LedgerError> {
        let mut records = Vec::new();
        let mut prev = GENESIS_HASH;
        let mut rest = bytes;
        while !rest.is_empty() {
            let position = records.len();
            let tamper = |reason: &str| LedgerError::TamperDetected {
                position,
                reason: reason.to_owned(),
            };
            if rest.len() < HEADER_LEN {
                return Err(tamper("truncated length prefix"));
            }
            let len = u32::from_le_bytes(rest[..HEADER_LEN].try_into().unwrap()) as usize;
            if len < TAG_LEN + HASH_LEN || rest.len() - HEADER_LEN < len {
                return Err(tamper("bad record length"));
            }
            let body = &rest[HEADER_LEN..HEADER_LEN + len];
            rest = &rest[HEADER_LEN + len..];

            let tag = body[0];
            let payload = &body[TAG_LEN..len - HASH_LEN];
            let stored = Digest32::from_slice(&body[len - HASH_LEN..]).unwrap();
            if chain_hash(&prev, payload) != stored {
                return Err(tamper("chain hash mismatch"));
            }
            let event: Event =
                serde_json::from_slice(payload).map_err(|_| tamper("undecodable payload"))?;
            if event.tag() != tag {
                return Err(tamper("tag does not match payload"));
            }
            if event.canonical_payload() != payload {
                return Err(tamper("payload is not canonical"));
            }
            prev = stored;
            records.push(LogRecord { event, payload: payload.to_vec(), chain_hash: stored });
        }
        Ok(EventLog { records })
    }

    pub fn export(&self, offset: usize, limit: usize) -> Vec<ExportedRecord> {
        self.records
            .iter()
            .enumerate()
            .skip(offset)
            .take(limit)
            .map(|(position, r)| ExportedRecord {
                position,
                tag: r.event.tag(),
                event: r.event.clone(),
                chain_hash: r.chain_hash,
            })
            .collect()
    }
}
