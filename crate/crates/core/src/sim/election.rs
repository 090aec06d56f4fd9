//! In-process election driver: a host, a population of voters holding their
//! identifiers and keys, and a ledger. Used by the scenario runner and tests.

use rand::{CryptoRng, RngCore};

use crate::crypto::{
    eligibility_digests, encrypt_ballot, keygen, EncryptedBallot, KeyPair, SecretIdentifier,
};
use crate::format::BallotChoice;
use crate::ledger::{EligibilitySet, KeyRelease, Ledger, LedgerError, SessionConfig, Settlement};
use crate::tally::{tally_ledger, TallyError, TallyTranscript};

/// Fresh random identifiers and the matching public set `S`.
pub fn issue_identifiers<R: RngCore + CryptoRng>(
    count: usize,
    rng: &mut R,
) -> (Vec<SecretIdentifier>, EligibilitySet) {
    let identifiers: Vec<SecretIdentifier> =
        (0..count).map(|_| SecretIdentifier::random(rng)).collect();
    let set = identifiers.iter().map(|id| eligibility_digests(id).twice).collect();
    (identifiers, set)
}

#[derive(Debug, Clone)]
pub struct SimVoter {
    pub identifier: SecretIdentifier,
    pub keys: Option<KeyPair>,
    pub holder_index: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct Election {
    pub ledger: Ledger,
    pub voters: Vec<SimVoter>,
}

impl Election {
    pub fn new(config: SessionConfig, identifiers: Vec<SecretIdentifier>) -> Result<Self, LedgerError> {
        let set = identifiers.iter().map(|id| eligibility_digests(id).twice).collect();
        let ledger = Ledger::create_session(config, set)?;
        let voters = identifiers
            .into_iter()
            .map(|identifier| SimVoter { identifier, keys: None, holder_index: None })
            .collect();
        Ok(Election { ledger, voters })
    }

    /// Issues `count` identifiers and opens the session for them.
    pub fn with_population<R: RngCore + CryptoRng>(
        config: SessionConfig,
        count: usize,
        rng: &mut R,
    ) -> Result<Self, LedgerError> {
        let (identifiers, _) = issue_identifiers(count, rng);
        Election::new(config, identifiers)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.ledger.state().expect("session exists").config
    }

    pub fn registration_tick(&self) -> u64 {
        self.config().registration_window.open
    }

    pub fn voting_tick(&self) -> u64 {
        self.config().voting_window.open
    }

    pub fn release_tick(&self) -> u64 {
        self.config().voting_window.close
    }

    pub fn settle_tick(&self) -> u64 {
        self.config().release_deadline + 1
    }

    /// Voter `voter` registers as a secret holder with a fresh one-time key.
    pub fn register<R: RngCore + CryptoRng>(
        &mut self,
        voter: usize,
        now: u64,
        rng: &mut R,
    ) -> Result<u32, LedgerError> {
        let keys = keygen(rng);
        let once = eligibility_digests(&self.voters[voter].identifier).once;
        let index = self.ledger.register_holder(once, keys.pk, now)?;
        let v = &mut self.voters[voter];
        v.keys = Some(keys);
        v.holder_index = Some(index);
        Ok(index)
    }

    pub fn freeze(&mut self) -> Result<(u32, u32), LedgerError> {
        let now = self.voting_tick();
        self.ledger.freeze_holder_set(now)
    }

    /// Encrypts `choice` under the frozen holder set as `identifier`.
    pub fn encrypt_as<R: RngCore + CryptoRng>(
        &self,
        identifier: &SecretIdentifier,
        choice: &BallotChoice,
        rng: &mut R,
    ) -> Result<EncryptedBallot, LedgerError> {
        let state = self.ledger.state()?;
        let frozen = state.frozen.ok_or(LedgerError::PhaseError {
            op: "submit_ballot",
            phase: state.phase(),
            now: state.clock,
        })?;
        encrypt_ballot(
            &choice.to_payload(),
            identifier,
            &state.holder_pks(),
            frozen.t,
            state.config.ballot_context(),
            rng,
        )
        .map_err(|e| LedgerError::MalformedBallot(e.to_string()))
    }

    pub fn cast<R: RngCore + CryptoRng>(
        &mut self,
        voter: usize,
        choice: &BallotChoice,
        now: u64,
        rng: &mut R,
    ) -> Result<u64, LedgerError> {
        let identifier = self.voters[voter].identifier;
        let ballot = self.encrypt_as(&identifier, choice, rng)?;
        self.ledger.submit_ballot(ballot, now)
    }

    /// Holder index `holder` reveals its secret key.
    pub fn release(&mut self, holder: u32, now: u64) -> Result<KeyRelease, LedgerError> {
        let sk = self
            .voters
            .iter()
            .find(|v| v.holder_index == Some(holder))
            .and_then(|v| v.keys.as_ref())
            .ok_or(LedgerError::NotFound(holder))?
            .sk;
        self.ledger.release_key(holder, sk, now)
    }

    pub fn holder_indices(&self) -> Vec<u32> {
        self.voters.iter().filter_map(|v| v.holder_index).collect()
    }

    pub fn tally(&self) -> Result<TallyTranscript, TallyError> {
        tally_ledger(&self.ledger)
    }

    pub fn settle(&mut self) -> Result<Settlement, LedgerError> {
        let now = self.settle_tick();
        self.ledger.settle_incentives(now)
    }
}
