import json
from dataclasses import replace

import pytest

from coact.agent.runtime import AgentRuntime
from coact.analysis.segment import segment_turns, segments
from coact.canvas.model import CanvasDocument
from coact.canvas.tools import ToolCall
from coact.events import Timeline
from coact.session.config import BatchSpec, ConfigInvalid, ScriptItem, SessionConfig, load_batch
from coact.session.log import CorruptLog, SessionLog, expand_logs, read_log, write_log
from coact.session.orchestrator import initial_canvas, run_batch, run_session
from coact.session.replay import replay
from coact.usersim.policy import SimPolicy, load_policy

SCRIPT = (
    ScriptItem("create a 3-column features in frame landing", intent={"item_spacing": 32}),
    ScriptItem("add a button 'Sign up' in frame landing"),
    ScriptItem("apply a dark theme to $recent"),
)


def config(policy=None, seed=3, **kw):
    kw.setdefault("batch_capacity", 1)
    kw.setdefault("quality_schedule", (2,))
    return SessionConfig(SCRIPT, policy or load_policy("interventionist"), turn_budget=kw.pop("turn_budget", 10), seed=seed, **kw)


@pytest.fixture(scope="module")
def log():
    return run_session(config(SimPolicy.from_dict({**load_policy("interventionist").to_dict(), "p_idle_edit": 0.6})))


def test_config_validation():
    pol = SimPolicy()
    with pytest.raises(ConfigInvalid):
        SessionConfig(SCRIPT, pol, turn_budget=0, seed=1)
    with pytest.raises(ConfigInvalid):
        SessionConfig(SCRIPT, pol, turn_budget=5, seed=1, quality_schedule=(11,))
    with pytest.raises(ConfigInvalid):
        SessionConfig(SCRIPT, pol, turn_budget=5, seed=2**64)
    with pytest.raises(ConfigInvalid):
        load_batch({"session": {"sessions": 0}})
    with pytest.raises(ConfigInvalid):
        load_batch({"session": {"colour": "red"}})
    with pytest.raises(ConfigInvalid):
        load_batch({"policy": {"p_steady": 7}})


def test_config_hash_tracks_content():
    a, b = config(seed=1), config(seed=1)
    assert a.config_hash() == b.config_hash()
    assert config(seed=2).config_hash() != a.config_hash()
    assert SessionConfig.from_json(json.loads(json.dumps(a.to_json()))) == a


def test_load_batch_from_file_and_preset(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('[session]\nsessions = 2\nseed = 9\n[policy]\np_much_more = 0.5\n')
    spec, pol, ref = load_batch(path)
    assert (spec.sessions, spec.seed, pol.p_much_more, ref) == (2, 9, 0.5, "c.toml")
    assert load_batch(path, seed=4)[0].seed == 4
    spec, _, ref = load_batch("calibrated")
    assert ref == "calibrated" and spec.sessions >= 1
    bad = tmp_path / "bad.toml"
    bad.write_text("[session\n")
    with pytest.raises(ConfigInvalid):
        load_batch(bad)


def test_session_seeds_are_distinct_and_stable():
    spec = BatchSpec(sessions=50, seed=5)
    seeds = [spec.session_seed(i) for i in range(50)]
    assert len(set(seeds)) == 50 and all(0 <= s < 2**64 for s in seeds)
    assert seeds == [BatchSpec(sessions=50, seed=5).session_seed(i) for i in range(50)]


# -- logs ----------------------------------------------------------------------------------------

def test_log_round_trip(tmp_path, log):
    assert SessionLog.loads(log.dumps()).dumps() == log.dumps()
    for name in ("s.jsonl", "s.jsonl.gz"):
        p = write_log(log, tmp_path / name)
        assert read_log(p).dumps() == log.dumps()
    assert (tmp_path / "s.jsonl.gz").read_bytes() == write_log(log, tmp_path / "t.jsonl.gz").read_bytes()
    assert [p.name for p in expand_logs([str(tmp_path)])] == ["s.jsonl", "s.jsonl.gz", "t.jsonl.gz"]


@pytest.mark.parametrize("mutate", [
    lambda lines: lines[1:],  # no header
    lambda lines: lines[:1] + ["{not json"] + lines[1:],
    lambda lines: lines + ['{"type": "mystery"}'],
    lambda lines: [lines[0].replace('"version":1', '"version":99')] + lines[1:],
    lambda lines: lines[:1] + [lines[2], lines[1]] + lines[3:],  # out of order
])
def test_corrupt_logs_are_rejected(log, mutate):
    with pytest.raises(CorruptLog):
        SessionLog.from_lines(mutate(log.dumps().splitlines()))


def test_unreadable_gzip(tmp_path):
    p = tmp_path / "x.jsonl.gz"
    p.write_bytes(b"definitely not gzip")
    with pytest.raises(CorruptLog):
        read_log(p)


# -- replay --------------------------------------------------------------------------------------

def _manual_log(calls):
    start = initial_canvas()
    doc = CanvasDocument.from_snapshot(start)
    tl = Timeline()
    rt = AgentRuntime(doc, tl)
    for c in calls:
        rt.apply_op(c, "user")
    return SessionLog(0, "x", {}, start.to_json(), list(tl.events), ledger=list(tl.ledger), final_canvas=doc.snapshot().to_json())


def test_replay_of_empty_log_is_initial_canvas():
    assert replay(_manual_log([])).canonical() == initial_canvas().canonical()


def test_replay_of_one_user_op():
    log = _manual_log([ToolCall("create_rectangle", {"parent_id": "user_area", "new_id": "r"})])
    snap = replay(log)
    assert snap.nodes["r"].parent == "user_area"
    assert snap.revision == initial_canvas().revision + 1


def test_replay_detects_tampering(log):
    replay(log)
    flipped = SessionLog.loads(log.dumps())
    k = max(i for i, e in enumerate(flipped.events) if e.kind == "op" and e.call.tool == "create_frame")
    ev = flipped.events[k]
    flipped.events[k] = replace(ev, call=replace(ev.call, params={**ev.call.params, "width": 123}))
    with pytest.raises(CorruptLog):
        replay(flipped)
    tampered = SessionLog.loads(log.dumps())
    tampered.ledger[0] = type(tampered.ledger[0])(tampered.ledger[0].revision, "user" if tampered.ledger[0].actor == "agent" else "agent", tampered.ledger[0].seq)
    with pytest.raises(CorruptLog):
        replay(tampered)


# -- sessions ------------------------------------------------------------------------------------

def test_sessions_are_deterministic():
    assert run_session(config(seed=17)).dumps() == run_session(config(seed=17)).dumps()
    assert run_session(config(seed=17)).dumps() != run_session(config(seed=18)).dumps()


def test_segments_tile_the_log(log):
    segs = segments(log)
    assert [e.seq for s in segs for e in s.events] == [e.seq for e in log.events]
    assert {s.kind for s in segs} == {"active", "idle"}
    assert all(a.kind != b.kind or a.kind == "active" for a, b in zip(segs, segs[1:]))
    assert len(segment_turns(log)) == len(log.turns)


def test_ledger_covers_every_revision(log):
    revs = [e.revision for e in log.ledger]
    start = log.initial_snapshot.revision
    assert revs == list(range(start + 1, start + 1 + len(revs)))
    ops = {e.seq: e for e in log.events if e.kind == "op"}
    assert [(e.seq, e.actor) for e in log.ledger] == [(s, ops[s].actor) for s in sorted(ops)]


def test_turn_budget_caps_turns():
    log = run_session(config(turn_budget=1))
    assert len(log.turns) == 1


def test_batch_results_independent_of_workers():
    cfgs = BatchSpec(sessions=3, requests_min=3, requests_max=4, seed=2).configs(load_policy("delegator"))
    one = [l.dumps() for l in run_batch(cfgs, workers=1)]
    assert one == [l.dumps() for l in run_batch(cfgs, workers=3)]


def test_calibrated_batch_turn_counts():
    spec, pol, _ = load_batch("calibrated")
    logs = run_batch(BatchSpec(**{**spec.__dict__, "sessions": 10}).configs(pol))
    mean = sum(len(l.turns) for l in logs) / len(logs)
    assert 12 <= mean <= 33
    assert all(len(l.turns) <= spec.turn_budget for l in logs)
