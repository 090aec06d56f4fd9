//! Python bindings. Structured values cross the boundary as canonical JSON
//! strings; keys, digests and identifiers as lowercase hex.

use std::borrow::Cow;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::de::DeserializeOwned;

use collvote_core::canonical;
use collvote_core::crypto::{
    self, CryptoError, Digest32, EncryptedBallot, GroupElement, Scalar, SecretIdentifier,
};
use collvote_core::ledger::{self, EligibilitySet, LedgerError, SessionConfig};
use collvote_core::sim::{self, OptInModel, ScenarioConfig, SimError, SweepGrid, VoterProfile, Weights};
use collvote_core::tally::{self, TallyError, TallyTranscript};

create_exception!(collvote, CollvoteError, PyException);

/// Error carried to Python as `CollvoteError(code, message)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: String,
    pub message: String,
}

impl Failure {
    fn new(code: &str, message: impl ToString) -> Self {
        Failure { code: code.to_owned(), message: message.to_string() }
    }
}

impl From<LedgerError> for Failure {
    fn from(e: LedgerError) -> Self {
        Failure::new(e.code(), e)
    }
}

impl From<TallyError> for Failure {
    fn from(e: TallyError) -> Self {
        Failure::new(e.code(), e)
    }
}

impl From<CryptoError> for Failure {
    fn from(e: CryptoError) -> Self {
        Failure::new("CryptoError", e)
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::new("SimError", e)
    }
}

impl From<Failure> for PyErr {
    fn from(f: Failure) -> Self {
        CollvoteError::new_err((f.code, f.message))
    }
}

type Res<T> = Result<T, Failure>;

fn rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_rng(rand::rngs::OsRng).expect("os entropy"),
    }
}

fn parse<T: DeserializeOwned>(what: &str, json: &str) -> Res<T> {
    serde_json::from_str(json).map_err(|e| Failure::new("ParseError", format!("{what}: {e}")))
}

fn scenario(config_json: Option<&str>, calibrate: Option<f64>) -> Res<ScenarioConfig> {
    let mut config = match config_json {
        Some(json) => parse("scenario config", json)?,
        None => ScenarioConfig::default(),
    };
    if let Some(rate) = calibrate {
        config.calibrate_intercept(rate)?;
    }
    Ok(config)
}

fn pks(holder_pks: &[String]) -> Res<Vec<GroupElement>> {
    Ok(holder_pks.iter().map(|pk| GroupElement::from_hex(pk)).collect::<Result<_, _>>()?)
}

/// Fresh identifiers as hex plus the eligibility set as JSON.
#[pyfunction]
#[pyo3(signature = (count, seed=None))]
pub fn issue_identifiers(count: usize, seed: Option<u64>) -> (Vec<String>, String) {
    let (ids, set) = sim::issue_identifiers(count, &mut rng(seed));
    (ids.iter().map(|id| id.to_hex()).collect(), canonical::to_string(&set))
}

/// `(h(I), h(h(I)))` as hex.
#[pyfunction]
pub fn eligibility_digests(identifier: &str) -> Res<(String, String)> {
    let d = crypto::eligibility_digests(&SecretIdentifier::from_hex(identifier)?);
    Ok((d.once.to_hex(), d.twice.to_hex()))
}

/// One-time holder key pair `(sk, pk)` as hex.
#[pyfunction]
#[pyo3(signature = (seed=None))]
pub fn keygen(seed: Option<u64>) -> (String, String) {
    let kp = crypto::keygen(&mut rng(seed));
    (kp.sk.to_hex(), kp.pk.to_hex())
}

/// Encrypts `payload` for the ordered holder keys; returns the ballot JSON.
#[pyfunction]
#[pyo3(signature = (payload, identifier, holder_pks, t, ctx, seed=None))]
pub fn encrypt_ballot(
    payload: &[u8],
    identifier: &str,
    holder_pks: Vec<String>,
    t: u32,
    ctx: &str,
    seed: Option<u64>,
) -> Res<String> {
    let id = SecretIdentifier::from_hex(identifier)?;
    let ballot = crypto::encrypt_ballot(payload, &id, &pks(&holder_pks)?, t, ctx, &mut rng(seed))?;
    Ok(canonical::to_string(&ballot))
}

/// Reconstructs the ballot secret from `(holder_index, sk)` releases and
/// opens the ballot, returning `(payload, identifier)`.
#[pyfunction]
pub fn decrypt_ballot(
    ballot_json: &str,
    releases: Vec<(u32, String)>,
    holder_pks: Vec<String>,
) -> Res<(Cow<'static, [u8]>, String)> {
    let ballot: EncryptedBallot = parse("ballot", ballot_json)?;
    let releases = releases
        .iter()
        .map(|(i, sk)| Scalar::from_hex(sk).map(|sk| (*i, sk)))
        .collect::<Result<Vec<_>, _>>()?;
    let r = crypto::reconstruct_secret(&ballot.params, &ballot.nonce, &releases, &pks(&holder_pks)?)?;
    let (payload, id) = crypto::decrypt_ballot(&ballot, &r.secret)?;
    Ok((Cow::Owned(payload), id.to_hex()))
}

/// Re-derives a transcript from a binary event log; returns the report JSON.
#[pyfunction]
pub fn verify_transcript(transcript_json: &str, log: &[u8]) -> Res<String> {
    let transcript: TallyTranscript = parse("transcript", transcript_json)?;
    let log = ledger::EventLog::from_bytes(log)?;
    Ok(canonical::to_string(&tally::verify_transcript(&transcript, &log)))
}

/// Opt-in probability under the survey weights.
#[pyfunction]
#[pyo3(signature = (reward, goodwill, obligation, deposit, intercept=0.0))]
pub fn opt_in_probability(reward: f64, goodwill: f64, obligation: f64, deposit: f64, intercept: f64) -> Res<f64> {
    let model = OptInModel::new(Weights::SURVEY, intercept);
    Ok(sim::opt_in_probability(&model, &VoterProfile::new(reward, goodwill, obligation, deposit))?)
}

/// `{reward, goodwill, obligation, deposit}` survey weights.
#[pyfunction]
pub fn survey_weights() -> (f64, f64, f64, f64) {
    let w = Weights::SURVEY;
    (w.reward, w.goodwill, w.obligation, w.deposit)
}

/// One seeded election run; returns the report JSON.
#[pyfunction]
#[pyo3(signature = (config_json=None, seed=0, calibrate=None))]
pub fn run_scenario(config_json: Option<&str>, seed: u64, calibrate: Option<f64>) -> Res<String> {
    let config = scenario(config_json, calibrate)?;
    Ok(canonical::to_string(&sim::run_scenario(&config, seed)?))
}

#[pyfunction]
#[pyo3(signature = (runs, config_json=None, seed=0, calibrate=None))]
pub fn mean_opt_in(runs: u64, config_json: Option<&str>, seed: u64, calibrate: Option<f64>) -> Res<f64> {
    Ok(sim::mean_opt_in(&scenario(config_json, calibrate)?, seed, runs)?)
}

/// Threshold-success table as CSV text.
#[pyfunction]
#[pyo3(signature = (grid_json, config_json=None, seed=0))]
pub fn sweep(grid_json: &str, config_json: Option<&str>, seed: u64) -> Res<String> {
    let grid: SweepGrid = parse("grid", grid_json)?;
    let cells = sim::sweep(&scenario(config_json, None)?, &grid, seed)?;
    let mut out = Vec::new();
    sim::write_csv(&cells, &mut out)?;
    Ok(String::from_utf8(out).expect("csv is utf-8"))
}

/// In-memory session ledger.
#[pyclass(name = "Ledger")]
pub struct PyLedger {
    inner: ledger::Ledger,
}

#[pymethods]
impl PyLedger {
    #[new]
    pub fn new(config_json: &str, eligibility_json: &str) -> Res<Self> {
        let config: SessionConfig = parse("session config", config_json)?;
        let set: EligibilitySet = parse("eligibility", eligibility_json)?;
        Ok(PyLedger { inner: ledger::Ledger::create_session(config, set)? })
    }

    /// Rebuilds a ledger from its binary log.
    #[staticmethod]
    pub fn replay(log: &[u8]) -> Res<Self> {
        Ok(PyLedger { inner: ledger::Ledger::replay_bytes(log)? })
    }

    pub fn register_holder(&mut self, once_digest: &str, pk: &str, now: u64) -> Res<u32> {
        let once = Digest32::from_hex(once_digest)?;
        Ok(self.inner.register_holder(once, GroupElement::from_hex(pk)?, now)?)
    }

    /// `(n, t)`.
    pub fn freeze(&mut self, now: u64) -> Res<(u32, u32)> {
        Ok(self.inner.freeze_holder_set(now)?)
    }

    /// Holder keys in index order, as hex.
    pub fn holder_pks(&self) -> Res<Vec<String>> {
        Ok(self.inner.state()?.holder_pks().iter().map(|pk| pk.to_hex()).collect())
    }

    pub fn submit_ballot(&mut self, ballot_json: &str, now: u64) -> Res<u64> {
        Ok(self.inner.submit_ballot(parse("ballot", ballot_json)?, now)?)
    }

    /// Whether the released key matched the registered one.
    pub fn release_key(&mut self, holder_index: u32, sk: &str, now: u64) -> Res<bool> {
        Ok(self.inner.release_key(holder_index, Scalar::from_hex(sk)?, now)?.valid)
    }

    pub fn settle(&mut self, now: u64) -> Res<String> {
        Ok(canonical::to_string(&self.inner.settle_incentives(now)?))
    }

    pub fn tally(&self) -> Res<String> {
        Ok(tally::tally_ledger(&self.inner)?.to_canonical_json())
    }

    pub fn state_json(&self) -> Res<String> {
        Ok(self.inner.state()?.to_canonical_json())
    }

    pub fn phase(&self) -> Res<String> {
        let phase = serde_json::to_value(self.inner.state()?.phase()).expect("phase serializes");
        Ok(phase.as_str().unwrap_or_default().to_owned())
    }

    pub fn head(&self) -> String {
        self.inner.head().to_hex()
    }

    pub fn log_bytes(&self) -> Cow<'static, [u8]> {
        Cow::Owned(self.inner.log().to_bytes())
    }

    pub fn __len__(&self) -> usize {
        self.inner.log().len()
    }
}

#[pymodule]
fn collvote(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CollvoteError", m.py().get_type::<CollvoteError>())?;
    m.add_class::<PyLedger>()?;
    m.add_function(wrap_pyfunction!(issue_identifiers, m)?)?;
    m.add_function(wrap_pyfunction!(eligibility_digests, m)?)?;
    m.add_function(wrap_pyfunction!(keygen, m)?)?;
    m.add_function(wrap_pyfunction!(encrypt_ballot, m)?)?;
    m.add_function(wrap_pyfunction!(decrypt_ballot, m)?)?;
    m.add_function(wrap_pyfunction!(verify_transcript, m)?)?;
    m.add_function(wrap_pyfunction!(opt_in_probability, m)?)?;
    m.add_function(wrap_pyfunction!(survey_weights, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(mean_opt_in, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
