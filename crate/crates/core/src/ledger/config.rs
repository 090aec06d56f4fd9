use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::LedgerError;
use crate::crypto::{Digest32, AEAD_SCHEME, HASH_ALGORITHM};
use crate::format::BallotFormat;
use crate::tally::Rule;

/// Half-open logical time window `[open, close)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub open: u64,
    pub close: u64,
}

impl Window {
    pub fn new(open: u64, close: u64) -> Self {
        Window { open, close }
    }

    pub fn contains(&self, now: u64) -> bool {
        self.open <= now && now < self.close
    }
}

/// How the decryption threshold is chosen once the holder set is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    Fixed(u32),
    /// `t = ceil(phi * n)`.
    Fraction(f64),
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::Fraction(0.5)
    }
}

impl ThresholdPolicy {
    fn validate(&self) -> Result<(), LedgerError> {
        match *self {
            ThresholdPolicy::Fixed(0) => Err(LedgerError::config("fixed threshold must be >= 1")),
            ThresholdPolicy::Fraction(phi) if !(phi > 0.0 && phi <= 1.0) => {
                Err(LedgerError::config("threshold fraction must lie in (0, 1]"))
            }
            _ => Ok(()),
        }
    }

    /// Resolves `t` for `n` holders; `None` if no valid `1 <= t <= n` exists.
    pub fn resolve(&self, n: u32) -> Option<u32> {
        if n == 0 {
            return None;
        }
        let t = match *self {
            ThresholdPolicy::Fixed(t) => t,
            // The epsilon absorbs binary rounding such as 0.3 * 10 = 3.0000000000000004.
            ThresholdPolicy::Fraction(phi) => (phi * f64::from(n) - 1e-9).ceil().max(1.0) as u32,
        };
        (1..=n).contains(&t).then_some(t)
    }
}

/// Advisory mapping from wall-clock seconds to logical ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockMapping {
    pub epoch_unix_secs: u64,
    pub tick_secs: u64,
}

impl ClockMapping {
    pub fn tick_at(&self, unix_secs: u64) -> u64 {
        unix_secs.saturating_sub(self.epoch_unix_secs) / self.tick_secs.max(1)
    }
}

fn default_hash() -> String {
    HASH_ALGORITHM.to_owned()
}

fn default_aead() -> String {
    AEAD_SCHEME.to_owned()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub session_id: String,
    pub registration_window: Window,
    pub voting_window: Window,
    /// Last tick (inclusive) at which holders may release keys.
    pub release_deadline: u64,
    #[serde(default)]
    pub threshold_policy: ThresholdPolicy,
    pub ballot_format: BallotFormat,
    #[serde(default)]
    pub deposit: u64,
    #[serde(default)]
    pub reward: u64,
    #[serde(default = "default_hash")]
    pub hash_algorithm: String,
    #[serde(default = "default_aead")]
    pub aead_scheme: String,
    /// Tally rule; defaults to the natural rule for the ballot kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<Rule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock: Option<ClockMapping>,
}

impl SessionConfig {
    /// A config with default threshold policy, no incentives and the standard primitives.
    pub fn new(
        session_id: impl Into<String>,
        registration_window: Window,
        voting_window: Window,
        release_deadline: u64,
        ballot_format: BallotFormat,
    ) -> Self {
        SessionConfig {
            session_id: session_id.into(),
            registration_window,
            voting_window,
            release_deadline,
            threshold_policy: ThresholdPolicy::default(),
            ballot_format,
            deposit: 0,
            reward: 0,
            hash_algorithm: default_hash(),
            aead_scheme: default_aead(),
            rule: None,
            clock: None,
        }
    }

    pub fn rule(&self) -> Rule {
        self.rule.unwrap_or_else(|| Rule::default_for(self.ballot_format.kind))
    }

    /// Domain-separation string bound into every ballot of the session.
    pub fn ballot_context(&self) -> &str {
        &self.session_id
    }

    pub fn validate(&self) -> Result<(), LedgerError> {
        if self.session_id.is_empty() {
            return Err(LedgerError::config("session_id must be non-empty"));
        }
        let reg = self.registration_window;
        let vote = self.voting_window;
        if reg.open >= reg.close {
            return Err(LedgerError::config("registration window is empty"));
        }
        if reg.close > vote.open {
            return Err(LedgerError::config("registration must close before voting opens"));
        }
        if vote.open >= vote.close {
            return Err(LedgerError::config("voting window is empty"));
        }
        if vote.close > self.release_deadline {
            return Err(LedgerError::config("release deadline precedes the end of voting"));
        }
        self.threshold_policy.validate()?;
        self.ballot_format
            .validate()
            .map_err(|e| LedgerError::config(format!("ballot format: {e}")))?;
        if !self.rule().accepts(self.ballot_format.kind) {
            return Err(LedgerError::config("tally rule does not fit the ballot format"));
        }
        if self.hash_algorithm != HASH_ALGORITHM {
            return Err(LedgerError::config(format!("unsupported hash {}", self.hash_algorithm)));
        }
        if self.aead_scheme != AEAD_SCHEME {
            return Err(LedgerError::config(format!("unsupported aead {}", self.aead_scheme)));
        }
        if self.clock.is_some_and(|c| c.tick_secs == 0) {
            return Err(LedgerError::config("clock tick must be positive"));
        }
        Ok(())
    }
}

/// The public set `S` of double-hashed identifiers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EligibilitySet(BTreeSet<Digest32>);

impl EligibilitySet {
    pub fn new(members: impl IntoIterator<Item = Digest32>) -> Self {
        EligibilitySet(members.into_iter().collect())
    }

    pub fn contains(&self, digest: &Digest32) -> bool {
        self.0.contains(digest)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Digest32> {
        self.0.iter()
    }
}

impl FromIterator<Digest32> for EligibilitySet {
    fn from_iter<I: IntoIterator<Item = Digest32>>(iter: I) -> Self {
        EligibilitySet::new(iter)
    }
}
