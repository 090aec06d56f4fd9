mod common;

use std::fs::OpenOptions;
use std::io::Write;

use axum::http::StatusCode;

use collvote_core::format::BallotChoice;
use collvote_core::ledger::LedgerError;
use collvote_gateway::{read_log, Board};
use common::Harness;

#[tokio::test]
async fn acknowledged_writes_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.log");
    let mut h = Harness::with_ledger(Board::file_ledger(&path).unwrap(), 5, 1);
    for i in 0..3 {
        assert_eq!(h.register(i).await.status, StatusCode::OK);
    }
    h.set_tick(12);
    for i in 0..5 {
        assert_eq!(h.cast(i, &BallotChoice::SingleChoice(1)).await.status, StatusCode::OK);
    }
    let (state, head, len) = h.gateway.with_ledger(|l| {
        (l.state().unwrap().to_canonical_json(), l.head(), l.log().len())
    });
    drop(h);

    let reopened = Board::file_ledger(&path).unwrap();
    assert_eq!(reopened.state().unwrap().to_canonical_json(), state);
    assert_eq!(reopened.head(), head);
    assert_eq!(reopened.log().len(), len);
    assert_eq!(read_log(&path).unwrap().head(), head);
}

#[test]
fn writes_continue_after_restart() {
    use collvote_core::sim::issue_identifiers;
    use rand::SeedableRng;

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.log");
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(2);
    let (ids, set) = issue_identifiers(2, &mut rng);
    let mut ledger = Board::file_ledger(&path).unwrap();
    ledger.open_session(common::config(), set.clone()).unwrap();
    drop(ledger);

    let mut ledger = Board::file_ledger(&path).unwrap();
    let once = collvote_core::crypto::eligibility_digests(&ids[0]).once;
    let pk = collvote_core::crypto::keygen(&mut rng).pk;
    assert_eq!(ledger.register_holder(once, pk, 1), Ok(1));
    drop(ledger);

    let mut ledger = Board::file_ledger(&path).unwrap();
    assert_eq!(ledger.state().unwrap().holders.len(), 1);
    assert_eq!(ledger.open_session(common::config(), set), Err(LedgerError::SessionExists));
}

#[test]
fn corrupted_log_file_refuses_to_open() {
    use collvote_core::sim::issue_identifiers;
    use rand::SeedableRng;

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.log");
    let (_, set) = issue_identifiers(2, &mut rand_chacha::ChaCha20Rng::seed_from_u64(3));
    let mut ledger = Board::file_ledger(&path).unwrap();
    ledger.open_session(common::config(), set).unwrap();
    drop(ledger);

    let mut f = OpenOptions::new().append(true).open(&path).unwrap();
    f.write_all(&[7, 0, 0]).unwrap();
    drop(f);
    assert!(matches!(Board::file_ledger(&path), Err(LedgerError::TamperDetected { .. })));
}
