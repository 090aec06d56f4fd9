//! `/v1` HTTP API. The gateway relays self-validating messages to the
//! single-writer ledger; it adds no checks of its own, so it can refuse to
//! forward a message but cannot forge one.

use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use collvote_core::crypto::{
    BallotNonce, Digest32, EncryptedBallot, GroupElement, PublicParams, Scalar,
};
use collvote_core::ledger::{
    EligibilitySet, FrozenHolders, Ledger, LedgerError, Phase, SessionConfig, Settlement,
};
use collvote_core::tally::{tally_ledger, TallyError};

use crate::board::Board;
use crate::clock::Clock;

pub const MAX_LOG_PAGE: usize = 1000;
const DEFAULT_LOG_PAGE: usize = 100;

pub struct Gateway {
    ledger: RwLock<Ledger<Board>>,
    clock: Arc<dyn Clock>,
}

/// Machine-readable failure with its HTTP status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl From<LedgerError> for ApiError {
    fn from(e: LedgerError) -> Self {
        let status = match &e {
            LedgerError::NotEligible => StatusCode::FORBIDDEN,
            LedgerError::MalformedBallot(_) | LedgerError::ConfigError(_) => StatusCode::BAD_REQUEST,
            LedgerError::NotFound(_) | LedgerError::NoSession => StatusCode::NOT_FOUND,
            LedgerError::Storage(_)
            | LedgerError::TamperDetected { .. }
            | LedgerError::InvalidEvent { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            LedgerError::PhaseError { .. }
            | LedgerError::SessionAborted(_)
            | LedgerError::AlreadyRegistered
            | LedgerError::DuplicateKey
            | LedgerError::DuplicateBallot
            | LedgerError::AlreadyReleased(_)
            | LedgerError::ClockRegression { .. }
            | LedgerError::SessionExists => StatusCode::CONFLICT,
        };
        ApiError { status, code: e.code(), message: e.to_string() }
    }
}

impl From<TallyError> for ApiError {
    fn from(e: TallyError) -> Self {
        match e {
            TallyError::Ledger(inner) => inner.into(),
            TallyError::Rule(_) => ApiError {
                status: StatusCode::INTERNAL_SERVER_ERROR,
                code: e.code(),
                message: e.to_string(),
            },
            _ => ApiError { status: StatusCode::CONFLICT, code: e.code(), message: e.to_string() },
        }
    }
}

fn malformed(rejection: JsonRejection) -> ApiError {
    ApiError {
        status: StatusCode::BAD_REQUEST,
        code: "MalformedRequest",
        message: rejection.body_text(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegisterRequest {
    pub once_digest: Digest32,
    pub pk: GroupElement,
}

/// Ballot as posted by a client; `n`, `t` and the context come from the session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallotRequest {
    pub ephemeral: GroupElement,
    pub alphas: Vec<Scalar>,
    pub nonce: BallotNonce,
    /// Hex-encoded AEAD output.
    pub ciphertext: String,
}

impl BallotRequest {
    pub fn from_ballot(ballot: &EncryptedBallot) -> Self {
        BallotRequest {
            ephemeral: ballot.params.ephemeral,
            alphas: ballot.params.alphas.clone(),
            nonce: ballot.nonce,
            ciphertext: hex::encode(&ballot.ciphertext),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReleaseRequest {
    pub holder_index: u32,
    pub sk: Scalar,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct LogQuery {
    pub offset: Option<usize>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
struct SessionView<'a> {
    session_id: &'a str,
    config: &'a SessionConfig,
    eligibility: &'a EligibilitySet,
    phase: Phase,
    now: u64,
    ledger_clock: u64,
    holders: usize,
    ballots: usize,
    frozen: Option<FrozenHolders>,
    aborted: Option<&'a str>,
    valid_releases: usize,
    threshold_met: bool,
    /// Where the tally transcript is served once the threshold is met.
    result: Option<&'static str>,
    settlement: Option<&'a Settlement>,
}

#[derive(Debug, Clone, Serialize)]
struct HolderView {
    index: u32,
    once_digest: Digest32,
    pk: GroupElement,
    registered_at: u64,
    released_at: Option<u64>,
    /// Present only after a valid release.
    sk: Option<Scalar>,
    failed_release_attempts: u32,
}

impl Gateway {
    pub fn new(ledger: Ledger<Board>, clock: Arc<dyn Clock>) -> Self {
        Gateway { ledger: RwLock::new(ledger), clock }
    }

    pub fn router(self: Arc<Self>) -> Router {
        Router::new()
            .route("/v1/session", get(get_session))
            .route("/v1/holders", get(get_holders))
            .route("/v1/register", post(post_register))
            .route("/v1/ballot", post(post_ballot))
            .route("/v1/release", post(post_release))
            .route("/v1/result", get(get_result))
            .route("/v1/log", get(get_log))
            .with_state(self)
    }

    /// Read access to the current ledger snapshot.
    pub fn with_ledger<R>(&self, f: impl FnOnce(&Ledger<Board>) -> R) -> R {
        f(&self.ledger.read().expect("ledger lock"))
    }

    pub fn now(&self) -> u64 {
        self.clock.now()
    }

    fn head(&self) -> String {
        self.with_ledger(|l| l.head().to_hex())
    }

    /// Runs one read against a single snapshot, paired with that snapshot's head.
    fn read(
        &self,
        f: impl FnOnce(&Ledger<Board>) -> Result<Value, ApiError>,
    ) -> (Result<Value, ApiError>, String) {
        self.with_ledger(|l| (f(l), l.head().to_hex()))
    }

    /// Runs one write at the current tick. The holder set is frozen first if
    /// registration has closed and it is still open.
    fn write<T>(
        &self,
        op: impl FnOnce(&mut Ledger<Board>, u64) -> Result<T, LedgerError>,
    ) -> (Result<T, ApiError>, String) {
        let mut ledger = self.ledger.write().expect("ledger lock");
        let now = self.clock.now();
        let result = auto_freeze(&mut ledger, now).and_then(|_| op(&mut ledger, now));
        (result.map_err(ApiError::from), ledger.head().to_hex())
    }

    /// Applies time-driven transitions due at the current tick.
    pub fn tick(&self) -> Result<(), ApiError> {
        self.write(|_, _| Ok(())).0
    }

    pub fn session_json(&self) -> (Result<Value, ApiError>, String) {
        let now = self.now();
        self.read(|l| {
            let s = l.state()?;
            let view = SessionView {
                session_id: &s.config.session_id,
                config: &s.config,
                eligibility: &s.eligibility,
                phase: s.phase_at(now.max(s.clock)),
                now,
                ledger_clock: s.clock,
                holders: s.holders.len(),
                ballots: s.ballots.len(),
                frozen: s.frozen,
                aborted: s.aborted.as_deref(),
                valid_releases: s.valid_releases().len(),
                threshold_met: s.threshold_met(),
                result: s.threshold_met().then_some("/v1/result"),
                settlement: s.settlement.as_ref(),
            };
            Ok(serde_json::to_value(view).expect("serializable"))
        })
    }

    pub fn holders_json(&self) -> (Result<Value, ApiError>, String) {
        self.read(|l| {
            let s = l.state()?;
            let holders: Vec<HolderView> = s
                .holders
                .iter()
                .map(|h| HolderView {
                    index: h.index,
                    once_digest: h.once_digest,
                    pk: h.pk,
                    registered_at: h.registered_at,
                    released_at: h.release.as_ref().map(|r| r.released_at),
                    sk: h.release.as_ref().map(|r| r.sk),
                    failed_release_attempts: h.failed_release_attempts,
                })
                .collect();
            Ok(json!({ "holders": holders, "frozen": s.frozen }))
        })
    }

    pub fn register(&self, req: RegisterRequest) -> (Result<Value, ApiError>, String) {
        let (r, head) = self.write(|l, now| l.register_holder(req.once_digest, req.pk, now));
        (r.map(|index| json!({ "holder_index": index })), head)
    }

    pub fn ballot(&self, req: BallotRequest) -> (Result<Value, ApiError>, String) {
        let (r, head) = self.write(|l, now| {
            let ballot = complete_ballot(l, req)?;
            l.submit_ballot(ballot, now)
        });
        (r.map(|seq| json!({ "seq": seq })), head)
    }

    pub fn release(&self, req: ReleaseRequest) -> (Result<Value, ApiError>, String) {
        let (r, head) = self.write(|l, now| l.release_key(req.holder_index, req.sk, now));
        (r.map(|rel| json!({ "holder_index": rel.holder_index, "valid": rel.valid })), head)
    }

    pub fn result_json(&self) -> (Result<Value, ApiError>, String) {
        self.read(|l| {
            let transcript = tally_ledger(l)?;
            Ok(json!({
                "summary": transcript.render_summary(),
                "transcript": collvote_core::canonical::to_value(&transcript),
            }))
        })
    }

    pub fn log_json(&self, q: &LogQuery) -> (Result<Value, ApiError>, String) {
        let offset = q.offset.unwrap_or(0);
        let limit = q.limit.unwrap_or(DEFAULT_LOG_PAGE).min(MAX_LOG_PAGE);
        self.read(|l| {
            let log = l.log();
            Ok(json!({ "offset": offset, "total": log.len(), "records": log.export(offset, limit) }))
        })
    }
}

fn auto_freeze(ledger: &mut Ledger<Board>, now: u64) -> Result<(), LedgerError> {
    let Some(s) = ledger.session() else { return Ok(()) };
    let c = &s.config;
    let due = s.frozen.is_none()
        && s.aborted.is_none()
        && now >= c.registration_window.close
        && now < c.voting_window.close
        && now >= s.clock;
    if due {
        match ledger.freeze_holder_set(now) {
            Ok(_) | Err(LedgerError::SessionAborted(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

/// Fills `n`, `t` and the context of a posted ballot from the frozen session.
pub fn complete_ballot<B: collvote_core::ledger::BulletinBoard>(
    ledger: &Ledger<B>,
    req: BallotRequest,
) -> Result<EncryptedBallot, LedgerError> {
    let s = ledger.state()?;
    if let Some(reason) = &s.aborted {
        return Err(LedgerError::SessionAborted(reason.clone()));
    }
    let frozen = s.frozen.ok_or(LedgerError::PhaseError {
        op: "submit_ballot",
        phase: s.phase(),
        now: s.clock,
    })?;
    let ciphertext = collvote_core::crypto::decode_hex(&req.ciphertext)
        .map_err(|_| LedgerError::MalformedBallot("ciphertext is not hex".into()))?;
    Ok(EncryptedBallot {
        params: PublicParams {
            ephemeral: req.ephemeral,
            alphas: req.alphas,
            n: frozen.n,
            t: frozen.t,
            ctx: s.config.ballot_context().to_owned(),
        },
        nonce: req.nonce,
        ciphertext,
    })
}

fn respond(status: StatusCode, mut body: Value, head: String) -> Response {
    if let Value::Object(map) = &mut body {
        map.insert("chain_head".into(), Value::String(head));
    }
    (status, Json(body)).into_response()
}

fn reply(result: Result<Value, ApiError>, head: String) -> Response {
    match result {
        Ok(body) => respond(StatusCode::OK, body, head),
        Err(e) => respond(
            e.status,
            json!({ "error": { "code": e.code, "message": e.message } }),
            head,
        ),
    }
}

type Shared = State<Arc<Gateway>>;

async fn get_session(State(g): Shared) -> Response {
    let (r, head) = g.session_json();
    reply(r, head)
}

async fn get_holders(State(g): Shared) -> Response {
    let (r, head) = g.holders_json();
    reply(r, head)
}

async fn post_register(State(g): Shared, body: Result<Json<RegisterRequest>, JsonRejection>) -> Response {
    match body {
        Ok(Json(req)) => {
            let (r, head) = g.register(req);
            reply(r, head)
        }
        Err(e) => reply(Err(malformed(e)), g.head()),
    }
}

async fn post_ballot(State(g): Shared, body: Result<Json<BallotRequest>, JsonRejection>) -> Response {
    match body {
        Ok(Json(req)) => {
            let (r, head) = g.ballot(req);
            reply(r, head)
        }
        Err(e) => reply(Err(malformed(e)), g.head()),
    }
}

async fn post_release(State(g): Shared, body: Result<Json<ReleaseRequest>, JsonRejection>) -> Response {
    match body {
        Ok(Json(req)) => {
            let (r, head) = g.release(req);
            reply(r, head)
        }
        Err(e) => reply(Err(malformed(e)), g.head()),
    }
}

async fn get_result(State(g): Shared) -> Response {
    let (r, head) = g.result_json();
    reply(r, head)
}

async fn get_log(State(g): Shared, query: Query<LogQuery>) -> Response {
    let (r, head) = g.log_json(&query);
    reply(r, head)
}
