mod common;

use axum::http::StatusCode;
use serde_json::json;

use collvote_core::crypto::{eligibility_digests, keygen, SecretIdentifier};
use collvote_core::format::BallotChoice;
use collvote_core::ledger::{Ledger, LedgerError};
use collvote_gateway::api::complete_ballot;
use common::{call, Harness};

async fn registered(voters: usize, holders: usize, seed: u64) -> Harness {
    let mut h = Harness::in_memory(voters, seed);
    for i in 0..holders {
        assert_eq!(h.register(i).await.status, StatusCode::OK);
    }
    h
}

#[tokio::test]
async fn full_session_over_http() {
    let mut h = registered(4, 3, 1).await;
    let r = call(&h.app, "GET", "/v1/holders", None).await;
    assert_eq!(r.body["holders"].as_array().unwrap().len(), 3);

    h.set_tick(12);
    for (i, c) in [0, 1, 1, 0].into_iter().enumerate() {
        let r = h.cast(i, &BallotChoice::SingleChoice(c)).await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.body);
        assert_eq!(r.body["seq"], json!(i as u64 + 1));
    }
    let session = call(&h.app, "GET", "/v1/session", None).await.body;
    assert_eq!(session["frozen"]["n"], json!(3));
    assert_eq!(session["frozen"]["t"], json!(2));
    assert_eq!(session["phase"], json!("voting"));

    let r = call(&h.app, "GET", "/v1/result", None).await;
    assert_eq!((r.status, r.code()), (StatusCode::CONFLICT, "ThresholdNotMet"));

    h.set_tick(20);
    assert_eq!(h.release(0).await.body["valid"], json!(true));
    assert_eq!(h.release(2).await.body["valid"], json!(true));

    let r = call(&h.app, "GET", "/v1/result", None).await;
    assert_eq!(r.status, StatusCode::OK);
    let scores = &r.body["transcript"]["result"]["outcome"]["scores"];
    assert_eq!(scores[0]["score"], json!(2));
    assert_eq!(scores[1]["score"], json!(2));
    assert!(r.body["summary"].as_str().unwrap().contains("winners: yes, no"));

    let session = call(&h.app, "GET", "/v1/session", None).await.body;
    assert_eq!(session["result"], json!("/v1/result"));
    assert_eq!(session["threshold_met"], json!(true));
}

#[tokio::test]
async fn ledger_rejections_map_to_status_codes() {
    let mut h = registered(3, 1, 2).await;

    assert_eq!(h.register(0).await.code(), "AlreadyRegistered");

    let outsider = SecretIdentifier::random(&mut h.rng);
    let body = json!({ "once_digest": eligibility_digests(&outsider).once, "pk": keygen(&mut h.rng).pk });
    let r = call(&h.app, "POST", "/v1/register", Some(body)).await;
    assert_eq!((r.status, r.code()), (StatusCode::FORBIDDEN, "NotEligible"));

    let pk = h.clients[0].keys.as_ref().unwrap().pk;
    let body = json!({ "once_digest": eligibility_digests(&h.clients[1].identifier).once, "pk": pk });
    let r = call(&h.app, "POST", "/v1/register", Some(body)).await;
    assert_eq!((r.status, r.code()), (StatusCode::CONFLICT, "DuplicateKey"));

    let r = call(&h.app, "POST", "/v1/register", Some(json!({ "once_digest": "zz" }))).await;
    assert_eq!((r.status, r.code()), (StatusCode::BAD_REQUEST, "MalformedRequest"));

    // Ballot before voting: nothing frozen yet.
    let bogus = json!({
        "ephemeral": keygen(&mut h.rng).pk,
        "alphas": [],
        "nonce": "00".repeat(24),
        "ciphertext": "00".repeat(64),
    });
    let r = call(&h.app, "POST", "/v1/ballot", Some(bogus.clone())).await;
    assert_eq!((r.status, r.code()), (StatusCode::CONFLICT, "PhaseError"));

    h.set_tick(11);
    let r = call(&h.app, "POST", "/v1/ballot", Some(bogus)).await;
    assert_eq!((r.status, r.code()), (StatusCode::BAD_REQUEST, "MalformedBallot"));

    let r = h.cast(0, &BallotChoice::SingleChoice(0)).await;
    assert_eq!(r.status, StatusCode::OK);

    let r = h.release(0).await;
    assert_eq!((r.status, r.code()), (StatusCode::CONFLICT, "PhaseError"));

    h.set_tick(21);
    let r = call(&h.app, "POST", "/v1/release", Some(json!({ "holder_index": 7, "sk": h.clients[0].keys.as_ref().unwrap().sk }))).await;
    assert_eq!((r.status, r.code()), (StatusCode::NOT_FOUND, "NotFound"));
    assert_eq!(h.release(0).await.status, StatusCode::OK);
    let r = h.release(0).await;
    assert_eq!((r.status, r.code()), (StatusCode::CONFLICT, "AlreadyReleased"));

    h.set_tick(22);
    let r = h.cast(1, &BallotChoice::SingleChoice(0)).await;
    assert_eq!((r.status, r.code()), (StatusCode::CONFLICT, "PhaseError"));
}

#[tokio::test]
async fn every_response_carries_the_chain_head() {
    let mut h = registered(2, 1, 3).await;
    let head = h.gateway.with_ledger(|l| l.head().to_hex());
    for uri in ["/v1/session", "/v1/holders", "/v1/result", "/v1/log"] {
        let r = call(&h.app, "GET", uri, None).await;
        assert_eq!(r.body["chain_head"], json!(head), "{uri}");
    }
    let r = h.register(1).await;
    let head = h.gateway.with_ledger(|l| l.head().to_hex());
    assert_eq!(r.body["chain_head"], json!(head));
    let r = h.register(1).await;
    assert_eq!(r.body["chain_head"], json!(head), "errors too");
}

#[tokio::test]
async fn log_is_paginated() {
    let h = registered(6, 5, 4).await;
    let page = call(&h.app, "GET", "/v1/log?offset=2&limit=3", None).await.body;
    assert_eq!(page["total"], json!(6));
    let records = page["records"].as_array().unwrap();
    assert_eq!(records.len(), 3);
    assert_eq!(records[0]["position"], json!(2));
    assert_eq!(records[0]["event"]["type"], json!("register_holder"));
    let tail = call(&h.app, "GET", "/v1/log?offset=5", None).await.body;
    assert_eq!(tail["records"][0]["chain_hash"], tail["chain_head"]);
}

/// Each gateway write equals the same message applied directly to an
/// independent replica of the ledger, byte for byte.
#[tokio::test]
async fn gateway_cannot_forge_events() {
    let mut h = Harness::in_memory(4, 5);
    let mut replica = h.gateway.with_ledger(|l| Ledger::replay(l.log())).unwrap();
    let assert_same = |h: &Harness, replica: &Ledger| {
        let ours = h.gateway.with_ledger(|l| l.log().to_bytes());
        assert_eq!(ours, replica.log().to_bytes());
    };

    for i in 0..3 {
        h.register(i).await;
        let c = &h.clients[i];
        let once = eligibility_digests(&c.identifier).once;
        replica.register_holder(once, c.keys.as_ref().unwrap().pk, 0).unwrap();
        assert_same(&h, &replica);
    }

    h.set_tick(13);
    let id = h.clients[3].identifier;
    // The holder list is read before the freeze, so mirror it on the replica first.
    replica.freeze_holder_set(13).unwrap();
    let req = h.ballot_request(&id, &BallotChoice::SingleChoice(1)).await;
    call(&h.app, "POST", "/v1/ballot", Some(serde_json::to_value(&req).unwrap())).await;
    let ballot = complete_ballot(&replica, req.clone()).unwrap();
    replica.submit_ballot(ballot, 13).unwrap();
    assert_same(&h, &replica);

    // A replayed submission is refused on both paths.
    let r = call(&h.app, "POST", "/v1/ballot", Some(serde_json::to_value(&req).unwrap())).await;
    assert_eq!(r.code(), "DuplicateBallot");
    let ballot = complete_ballot(&replica, req).unwrap();
    assert_eq!(replica.submit_ballot(ballot, 13), Err(LedgerError::DuplicateBallot));

    h.set_tick(20);
    h.release(1).await;
    let c = &h.clients[1];
    replica.release_key(c.holder_index.unwrap(), c.keys.as_ref().unwrap().sk, 20).unwrap();
    assert_same(&h, &replica);
}

#[tokio::test]
async fn aborted_session_reports_over_http() {
    let h = Harness::in_memory(2, 6);
    h.set_tick(12);
    let session = call(&h.app, "GET", "/v1/session", None).await.body;
    assert_eq!(session["phase"], json!("aborted"));
    let r = call(&h.app, "GET", "/v1/result", None).await;
    assert_eq!((r.status, r.code()), (StatusCode::CONFLICT, "SessionAborted"));
    let r = call(&h.app, "POST", "/v1/release", Some(json!({ "holder_index": 1, "sk": "01".to_owned() + &"00".repeat(31) }))).await;
    assert_eq!(r.code(), "SessionAborted");
}
