mod common;

use axum::http::StatusCode;
use proptest::prelude::*;

use common::partial_release_session;

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_current_thread().build().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Below threshold, no response or log byte carries a ballot plaintext,
    /// an identifier or an unreleased secret key.
    #[test]
    fn responses_hide_secrets_below_threshold(
        voters in 2usize..7,
        holders_pick in 0usize..100,
        choices in proptest::collection::vec(0u32..2, 1..10),
        seed in any::<u64>(),
    ) {
        let holders = 2 + holders_pick % (voters - 1);
        let t = holders.div_ceil(2);
        let releases = holders_pick % t;
        let (replies, log, scanner) =
            runtime().block_on(partial_release_session(voters, holders, &choices, releases, seed));
        for r in &replies {
            prop_assert!(r.status != StatusCode::INTERNAL_SERVER_ERROR);
            prop_assert_eq!(scanner.find(&r.raw), None, "{}", String::from_utf8_lossy(&r.raw));
        }
        prop_assert_eq!(scanner.find(&log), None);
        let result = replies.iter().rev().find(|r| r.body["error"]["code"] == "ThresholdNotMet");
        prop_assert!(result.is_some());
    }
}

/// The scanner does see plaintext once it is legitimately published.
#[tokio::test]
async fn scanner_detects_published_plaintext() {
    use collvote_core::format::BallotChoice;

    let mut h = common::Harness::in_memory(3, 9);
    let mut scanner = common::SecretScanner::default();
    for i in 0..2 {
        h.register(i).await;
    }
    h.set_tick(12);
    let choice = BallotChoice::SingleChoice(1);
    scanner.add_ballot(&choice.to_payload(), &h.clients[2].identifier);
    h.cast(2, &choice).await;
    h.set_tick(20);
    h.release(0).await;
    let r = common::call(&h.app, "GET", "/v1/result", None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert!(scanner.find(&r.raw).is_some());
}
