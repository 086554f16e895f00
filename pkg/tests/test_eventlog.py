import json

import pytest

from sitequota.errors import DigestMismatchError, LockHeldError, ReplayError
from sitequota.estimation import PopulationEstimates
from sitequota.eventlog import meta_path_for, open_ledger, read_events, replay_file
from sitequota.ledger import CandidateSite
from sitequota.plan import build_plan


@pytest.fixture
def plan():
    est = PopulationEstimates.from_shares({"m": {"X": 0.5, "Y": 0.5}})
    return build_plan(est, total=4, slack=0.05)


def site(site_id, label):
    return CandidateSite(site_id=site_id, responses={"m": label})


def test_fresh_log_created_with_meta(plan, tmp_path):
    log = tmp_path / "events.ndjson"
    with open_ledger(plan, log) as lf:
        assert lf.ledger.accepted_count == 0
    meta = json.loads(meta_path_for(log).read_text())
    assert meta["plan_digest"] == plan.digest()


def test_mutations_are_durable_across_reopen(plan, tmp_path):
    log = tmp_path / "events.ndjson"
    with open_ledger(plan, log) as lf:
        lf.admit(site("a", "X"))
        lf.admit(site("b", "Y"))
        lf.withdraw("a")
        snapshot = lf.ledger.snapshot()
    with open_ledger(plan, log) as lf:
        assert lf.ledger.snapshot() == snapshot
        assert lf.ledger.last_seq == 3


def test_event_lines_follow_contract(plan, tmp_path):
    log = tmp_path / "events.ndjson"
    with open_ledger(plan, log) as lf:
        lf.admit(site("a", "X"))
        lf.withdraw("a")
    lines = [json.loads(l) for l in log.read_text().splitlines()]
    assert [l["seq"] for l in lines] == [1, 2]
    assert lines[0]["type"] == "admitted"
    assert lines[0]["profile"] == {"m": "X"}
    assert "time" in lines[0] and "site_id" in lines[0]
    assert lines[1]["type"] == "withdrawn"


def test_rejected_events_carry_binding_categories(plan, tmp_path):
    log = tmp_path / "events.ndjson"
    with open_ledger(plan, log) as lf:
        lf.admit(site("a", "X"))
        lf.admit(site("b", "X"))  # limit floor(4*0.55) = 2
        rejected = lf.admit(site("c", "X"))
    assert rejected.verdict == "rejected"
    lines = [json.loads(l) for l in log.read_text().splitlines()]
    assert lines[2]["type"] == "rejected"
    assert lines[2]["binding_categories"] == [{"moderator": "m", "label": "X"}]


def test_digest_mismatch_refused(plan, tmp_path):
    log = tmp_path / "events.ndjson"
    with open_ledger(plan, log) as lf:
        lf.admit(site("a", "X"))
    other_est = PopulationEstimates.from_shares({"m": {"X": 0.25, "Y": 0.75}})
    other_plan = build_plan(other_est, total=4, slack=0.05)
    with pytest.raises(DigestMismatchError, match="digest"):
        open_ledger(other_plan, log)
    with pytest.raises(DigestMismatchError):
        replay_file(other_plan, log)


def test_missing_meta_on_nonempty_log_refused(plan, tmp_path):
    log = tmp_path / "events.ndjson"
    with open_ledger(plan, log) as lf:
        lf.admit(site("a", "X"))
    meta_path_for(log).unlink()
    with pytest.raises(DigestMismatchError, match="no recorded plan digest"):
        open_ledger(plan, log)


def test_lock_excludes_second_writer(plan, tmp_path):
    log = tmp_path / "events.ndjson"
    with open_ledger(plan, log):
        with pytest.raises(LockHeldError):
            open_ledger(plan, log)
    # lock is released on close
    with open_ledger(plan, log):
        pass


def test_corrupt_line_reported_with_index(plan, tmp_path):
    log = tmp_path / "events.ndjson"
    with open_ledger(plan, log) as lf:
        lf.admit(site("a", "X"))
    with log.open("a") as fh:
        fh.write("{not json\n")
    with pytest.raises(ReplayError) as err:
        read_events(log)
    assert err.value.event_index == 2


def test_tampered_log_rejected_on_open(plan, tmp_path):
    log = tmp_path / "events.ndjson"
    with open_ledger(plan, log) as lf:
        lf.admit(site("a", "X"))
        lf.admit(site("b", "X"))
    # forge a third admission past the limit of 2
    line = json.loads(log.read_text().splitlines()[0])
    line["seq"] = 3
    line["site_id"] = "forged"
    with log.open("a") as fh:
        fh.write(json.dumps(line) + "\n")
    with pytest.raises(ReplayError) as err:
        open_ledger(plan, log)
    assert err.value.event_index == 3


def test_replay_file_is_read_only(plan, tmp_path):
    log = tmp_path / "events.ndjson"
    with open_ledger(plan, log) as lf:
        lf.admit(site("a", "X"))
    before = log.read_bytes()
    ledger = replay_file(plan, log)
    assert ledger.accepted_count == 1
    assert log.read_bytes() == before
    # read-only replay does not take the lock
    with open_ledger(plan, log):
        replay_file(plan, log)
