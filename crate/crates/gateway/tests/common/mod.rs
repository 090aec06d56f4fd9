#![allow(dead_code)]

use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::Value;
use tower::ServiceExt;

use collvote_core::crypto::{eligibility_digests, encrypt_ballot, keygen, KeyPair, SecretIdentifier};
use collvote_core::format::{BallotChoice, BallotFormat};
use collvote_core::ledger::{SessionConfig, Window};
use collvote_core::sim::issue_identifiers;
use collvote_gateway::{BallotRequest, Board, Gateway, ManualClock};

pub const REG: Window = Window { open: 0, close: 10 };
pub const VOTE: Window = Window { open: 10, close: 20 };
pub const DEADLINE: u64 = 30;

pub fn config() -> SessionConfig {
    let mut c = SessionConfig::new("gateway-test", REG, VOTE, DEADLINE, BallotFormat::single_choice(["yes", "no"]));
    c.deposit = 10;
    c.reward = 5;
    c
}

pub struct Reply {
    pub status: StatusCode,
    pub body: Value,
    pub raw: Vec<u8>,
}

impl Reply {
    pub fn code(&self) -> &str {
        self.body["error"]["code"].as_str().unwrap_or("")
    }
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> Reply {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(match body {
            Some(v) => Body::from(serde_json::to_vec(&v).unwrap()),
            None => Body::empty(),
        })
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let raw = to_bytes(response.into_body(), usize::MAX).await.unwrap().to_vec();
    let body = serde_json::from_slice(&raw).unwrap_or(Value::Null);
    Reply { status, body, raw }
}

/// Client-side view of one voter.
pub struct Client {
    pub identifier: SecretIdentifier,
    pub keys: Option<KeyPair>,
    pub holder_index: Option<u32>,
}

pub struct Harness {
    pub gateway: Arc<Gateway>,
    pub app: Router,
    pub clock: Arc<ManualClock>,
    pub clients: Vec<Client>,
    pub rng: ChaCha20Rng,
}

impl Harness {
    pub fn in_memory(voters: usize, seed: u64) -> Self {
        Harness::with_ledger(Board::memory_ledger(), voters, seed)
    }

    pub fn with_ledger(mut ledger: collvote_core::ledger::Ledger<Board>, voters: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (ids, set) = issue_identifiers(voters, &mut rng);
        ledger.open_session(config(), set).unwrap();
        let clock = Arc::new(ManualClock::new(0));
        let gateway = Arc::new(Gateway::new(ledger, clock.clone()));
        let app = gateway.clone().router();
        let clients = ids.into_iter().map(|identifier| Client { identifier, keys: None, holder_index: None }).collect();
        Harness { gateway, app, clock, clients, rng }
    }

    pub fn set_tick(&self, tick: u64) {
        self.clock.set(tick);
        let _ = self.gateway.tick();
    }

    pub async fn register(&mut self, i: usize) -> Reply {
        let keys = keygen(&mut self.rng);
        let once = eligibility_digests(&self.clients[i].identifier).once;
        let body = serde_json::json!({ "once_digest": once, "pk": keys.pk });
        let reply = call(&self.app, "POST", "/v1/register", Some(body)).await;
        if reply.status == StatusCode::OK {
            self.clients[i].keys = Some(keys);
            self.clients[i].holder_index = reply.body["holder_index"].as_u64().map(|v| v as u32);
        }
        reply
    }

    /// Encrypts like a client would, from the public holder list.
    pub async fn ballot_request(&mut self, identifier: &SecretIdentifier, choice: &BallotChoice) -> BallotRequest {
        let session = call(&self.app, "GET", "/v1/session", None).await.body;
        let holders = call(&self.app, "GET", "/v1/holders", None).await.body;
        let pks: Vec<_> = holders["holders"]
            .as_array()
            .unwrap()
            .iter()
            .map(|h| serde_json::from_value(h["pk"].clone()).unwrap())
            .collect();
        let t = session["frozen"]["t"].as_u64().unwrap() as u32;
        let ctx = session["session_id"].as_str().unwrap().to_owned();
        let ballot = encrypt_ballot(&choice.to_payload(), identifier, &pks, t, &ctx, &mut self.rng).unwrap();
        BallotRequest::from_ballot(&ballot)
    }

    pub async fn cast(&mut self, i: usize, choice: &BallotChoice) -> Reply {
        let id = self.clients[i].identifier;
        let req = self.ballot_request(&id, choice).await;
        call(&self.app, "POST", "/v1/ballot", Some(serde_json::to_value(req).unwrap())).await
    }

    pub async fn release(&mut self, i: usize) -> Reply {
        let c = &self.clients[i];
        let body = serde_json::json!({
            "holder_index": c.holder_index.unwrap(),
            "sk": c.keys.as_ref().unwrap().sk,
        });
        call(&self.app, "POST", "/v1/release", Some(body)).await
    }
}

/// Byte patterns that must not appear in any response before the tally.
#[derive(Default)]
pub struct SecretScanner {
    needles: Vec<(String, Vec<u8>)>,
}

impl SecretScanner {
    fn push_forms(&mut self, label: &str, bytes: &[u8]) {
        self.needles.push((label.to_owned(), bytes.to_vec()));
        self.needles.push((format!("{label} (hex)"), hex::encode(bytes).into_bytes()));
        if let Ok(text) = std::str::from_utf8(bytes) {
            let escaped = serde_json::to_string(text).unwrap();
            self.needles.push((format!("{label} (json)"), escaped[1..escaped.len() - 1].as_bytes().to_vec()));
        }
    }

    /// Plaintext of one ballot: its payload and the voter identifier.
    pub fn add_ballot(&mut self, payload: &[u8], identifier: &SecretIdentifier) {
        self.push_forms("payload", payload);
        self.push_forms("identifier", identifier.as_bytes());
    }

    pub fn add_secret_key(&mut self, sk: &collvote_core::crypto::Scalar) {
        self.push_forms("secret key", &sk.to_bytes());
    }

    /// First secret found in `haystack`, if any.
    pub fn find(&self, haystack: &[u8]) -> Option<&str> {
        self.needles
            .iter()
            .find(|(_, n)| !n.is_empty() && haystack.windows(n.len()).any(|w| w == n.as_slice()))
            .map(|(label, _)| label.as_str())
    }
}

/// Runs a session in which fewer than `t` holders release, returning every
/// API response produced along the way, the raw log, and the secrets that
/// must stay hidden.
pub async fn partial_release_session(
    voters: usize,
    holders: usize,
    choices: &[u32],
    releases: usize,
    seed: u64,
) -> (Vec<Reply>, Vec<u8>, SecretScanner) {
    let mut h = Harness::in_memory(voters, seed);
    let mut replies = Vec::new();
    let mut scanner = SecretScanner::default();
    for i in 0..holders {
        replies.push(h.register(i).await);
    }
    h.set_tick(12);
    let t = h.gateway.with_ledger(|l| l.state().unwrap().frozen.unwrap().t) as usize;
    assert!(releases < t, "scenario must stay below threshold");
    for (i, c) in choices.iter().enumerate() {
        let voter = i % voters;
        let choice = BallotChoice::SingleChoice(*c);
        scanner.add_ballot(&choice.to_payload(), &h.clients[voter].identifier);
        replies.push(h.cast(voter, &choice).await);
    }
    h.set_tick(20);
    for i in 0..holders {
        if i < releases {
            replies.push(h.release(i).await);
        } else {
            scanner.add_secret_key(&h.clients[i].keys.as_ref().unwrap().sk);
        }
    }
    for uri in ["/v1/session", "/v1/holders", "/v1/result"] {
        replies.push(call(&h.app, "GET", uri, None).await);
    }
    let total = h.gateway.with_ledger(|l| l.log().len());
    for offset in (0..total).step_by(3) {
        replies.push(call(&h.app, "GET", &format!("/v1/log?offset={offset}&limit=3"), None).await);
    }
    let log = h.gateway.with_ledger(|l| l.log().to_bytes());
    (replies, log, scanner)
}
