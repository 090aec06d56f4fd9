"""Smoke test for the collvote extension module.

Build and install first:  pip install crates/py   (or maturin develop in crates/py)
"""

import json

import collvote

CONFIG = {
    "session_id": "py-smoke",
    "registration_window": {"open": 0, "close": 10},
    "voting_window": {"open": 10, "close": 20},
    "release_deadline": 30,
    "ballot_format": {"kind": "single_choice", "options": ["yes", "no"]},
}


def run_session():
    ids, eligibility = collvote.issue_identifiers(5, seed=1)
    ledger = collvote.Ledger(json.dumps(CONFIG), eligibility)
    keys = [collvote.keygen(seed=100 + i) for i in range(4)]
    for ident, (_, pk) in zip(ids, keys):
        once, _ = collvote.eligibility_digests(ident)
        ledger.register_holder(once, pk, 1)
    n, t = ledger.freeze(10)
    assert (n, t) == (4, 2), (n, t)
    assert ledger.phase() == "voting"

    pks = ledger.holder_pks()
    choices = [0, 1, 0, 0, 1]
    for i, (ident, c) in enumerate(zip(ids, choices)):
        payload = json.dumps({"single_choice": c}, separators=(",", ":")).encode()
        ballot = collvote.encrypt_ballot(payload, ident, pks, t, CONFIG["session_id"], seed=i)
        ledger.submit_ballot(ballot, 12)

    try:
        ledger.tally()
        raise AssertionError("tally succeeded below threshold")
    except collvote.CollvoteError as e:
        assert e.args[0] == "ThresholdNotMet", e.args

    for index in (2, 4):
        assert ledger.release_key(index, keys[index - 1][0], 20)
    transcript = json.loads(ledger.tally())
    scores = [s["score"] for s in transcript["result"]["outcome"]["scores"]]
    assert scores == [3, 2], scores

    report = json.loads(collvote.verify_transcript(json.dumps(transcript), ledger.log_bytes()))
    assert report["ok"], report
    transcript["result"]["counts"]["valid"] += 1
    report = json.loads(collvote.verify_transcript(json.dumps(transcript), ledger.log_bytes()))
    assert not report["ok"] and report["diffs"][0]["path"] == "result.counts.valid", report

    replayed = collvote.Ledger.replay(ledger.log_bytes())
    assert replayed.head() == ledger.head()
    assert len(replayed) == len(ledger)
    settlement = json.loads(ledger.settle(31))
    assert settlement["forfeited"] == 0, settlement
    print("session ok:", scores, "head", ledger.head()[:16])


def run_simulation():
    assert collvote.survey_weights() == (0.35, 0.88, -0.1174, -0.3463)
    assert collvote.opt_in_probability(0, 0, 0, 0) == 0.5
    a = collvote.run_scenario(seed=3, calibrate=0.75)
    assert a == collvote.run_scenario(seed=3, calibrate=0.75)
    mean = collvote.mean_opt_in(2000, seed=1, calibrate=0.75)
    assert 28 <= mean <= 32, mean
    grid = {"deposits": [0, 10], "rewards": [10], "phis": [0.5], "runs": 50}
    csv = collvote.sweep(json.dumps(grid), seed=1)
    assert csv.splitlines()[0] == "deposit,reward,phi,success_rate,runs"
    print("simulation ok: mean opt-in", round(mean, 2))


if __name__ == "__main__":
    run_session()
    run_simulation()
    print("smoke test passed")
