import json
import random

import pytest

from coact.agent.attribution import attribute_changes, detect_idle_changes, ground_truth
from coact.agent.feedback import evaluate_feedback
from coact.agent.goals import CHILD_COUNT, DARK_BG, Plan, Request, generate_plan, req, unmet
from coact.agent.planning import update_plan
from coact.agent.reasoner import LLMReasoner, ReferenceReasoner, parse_tool_calls
from coact.agent.runtime import MAX_ITERATIONS, AgentRuntime, ScriptedStream, TurnAlreadyActive, UserEvent
from coact.canvas.changes import diff
from coact.canvas.model import ROOT_ID, CanvasDocument
from coact.canvas.tools import ToolCall, apply_tool
from fuzz import interleaving, is_partition, matches_ground_truth
from opgen import random_call


def call(doc, tool, actor="agent", **params):
    return apply_tool(doc, ToolCall(tool, params, actor))


@pytest.fixture
def page():
    doc = CanvasDocument()
    call(doc, "create_frame", parent_id=ROOT_ID, new_id="F", name="F", top_level=True, layout_mode="vertical", width=800, height=800)
    return doc


# -- plan generation ----------------------------------------------------------------------

def test_selection_is_embedded_in_plan(page):
    call(page, "create_rectangle", parent_id="F", new_id="123", name="btn_primary")
    needed, plan = generate_plan(Request("make this larger", ("123",)), page.snapshot())
    assert needed
    assert "(id: 123, name: 'btn_primary')" in plan.text
    assert ("123", "btn_primary") in plan.referenced


@pytest.mark.parametrize("text", ["thanks, looks good", "hmm", ""])
def test_chatter_needs_no_action(page, text):
    needed, plan = generate_plan(Request(text), page.snapshot())
    assert not needed and plan.goal == ()


def test_two_column_goal_spec(page):
    needed, plan = generate_plan(Request("create a two-column hero in frame F"), page.snapshot())
    assert needed
    expected = (
        req("r1", "frame", {"layout_mode": "horizontal", "item_spacing": 16, CHILD_COUNT: 2}, name="Hero", parent_node="F"),
        req("r2", "frame", {"layout_mode": "vertical", "item_spacing": 8}, name="Column 1", parent_req="r1"),
        req("r3", "frame", {"layout_mode": "vertical", "item_spacing": 8}, name="Column 2", parent_req="r1"),
    )
    assert plan.goal == expected


VOCAB_FIXTURES = [
    ("create a 3-column pricing in frame F", [("frame", "F"), ("frame", "r1"), ("frame", "r1"), ("frame", "r1")]),
    ("add a features section in frame F", [("frame", "F"), ("text", "r1")]),
    ("add a button 'Go' in frame F", [("frame", "F"), ("text", "r1")]),
    ("add a heading 'Hi' in frame F", [("text", "F")]),
    ("add 2 icons in frame F", [("frame", "F"), ("ellipse", "r1"), ("ellipse", "r1")]),
    ("add a card in frame F", [("frame", "F"), ("rectangle", "r1"), ("text", "r1")]),
]


@pytest.mark.parametrize("text,shape", VOCAB_FIXTURES)
def test_create_vocabulary_shapes(page, text, shape):
    needed, plan = generate_plan(Request(text), page.snapshot())
    assert needed
    assert [(r.kind, r.parent_node or r.parent_req) for r in plan.goal] == shape


@pytest.mark.parametrize("text", ["make F larger", "apply a dark theme to F", "recolor F to blue",
                                  "arrange F horizontally", "set spacing of F to 20"])
def test_modify_vocabulary_targets_existing_node(page, text):
    needed, plan = generate_plan(Request(text), page.snapshot())
    assert needed and plan.goal and all(not r.creates for r in plan.goal if r.node_id == "F")


# -- idle changes ----------------------------------------------------------------------------

def test_idle_changes_none_marker(page):
    snap = page.snapshot()
    assert detect_idle_changes(snap, page.snapshot()).user_summary == "None"


def test_idle_footer_edit_is_listed(page):
    call(page, "create_text", parent_id="F", new_id="footer", text="(c) 2023")
    prev = page.snapshot()
    call(page, "set_text_content", actor="user", node_id="footer", text="(c) 2024")
    att = detect_idle_changes(prev, page.snapshot())
    assert [(m.node_id, m.key) for m in att.user.modified if m.key == "text"] == [("footer", "text")]
    assert att.agent.is_empty


def test_idle_changes_match_ledger_over_random_ops(page):
    rng = random.Random(3)
    prev = page.snapshot()
    ledger = []
    for _ in range(50):
        try:
            ledger.append(("user", apply_tool(page, random_call(page, rng, "user")).changes))
        except Exception:  # noqa: BLE001
            pass
    curr = page.snapshot()
    att = detect_idle_changes(prev, curr)
    truth = ground_truth(ledger, prev, curr)
    assert set(truth.values()) <= {"user"}
    assert att.user_keys == frozenset(truth)
    assert att.user == diff(prev, curr)


def test_idle_changes_reject_reversed_order(page):
    prev = page.snapshot()
    call(page, "set_opacity", node_id="F", opacity=0.5)
    with pytest.raises(ValueError):
        detect_idle_changes(page.snapshot(), prev)


# -- reference reasoner ------------------------------------------------------------------------

def test_reasoner_returns_nothing_when_goal_met(page):
    _, plan = generate_plan(Request("set spacing of F to 20"), page.snapshot())
    call(page, "set_item_spacing", node_id="F", spacing=20)
    assert ReferenceReasoner()(plan, None, page.snapshot()) == []


def test_reasoner_orders_parents_first(page):
    _, plan = generate_plan(Request("add a features section in frame F"), page.snapshot())
    calls = ReferenceReasoner()(plan, None, page.snapshot())
    assert [c.tool for c in calls] == ["create_frame", "create_text"]
    assert calls[1].params["parent_id"] == calls[0].params["new_id"]


def test_reasoner_skips_column_the_user_already_made(page):
    snap = page.snapshot()
    _, plan = generate_plan(Request("create a two-column hero in frame F"), snap)
    call(page, "create_frame", parent_id="F", new_id="hero", name="Hero", layout_mode="horizontal", item_spacing=16)
    call(page, "create_frame", actor="user", parent_id="hero", new_id="c1", name="Column 1", layout_mode="vertical", item_spacing=8)
    calls = ReferenceReasoner()(plan, None, page.snapshot())
    created = [c.params.get("name") for c in calls if c.tool == "create_frame"]
    assert created == ["Column 2"]


def test_reasoner_respects_protected_atoms(page):
    _, plan = generate_plan(Request("set spacing of F to 20"), page.snapshot())
    r = ReferenceReasoner(protected={("F", "item_spacing")})
    assert r(plan, None, page.snapshot()) == []


def test_llm_adapter_parses_service_reply(monkeypatch, page):
    monkeypatch.setenv("COACT_LLM_TIMEOUT_MS", "1500")
    seen = {}

    class Reply:
        def __enter__(self):
            return self

        def __exit__(self, *a):
            return False

        def read(self):
            content = json.dumps([{"tool": "set_opacity", "params": {"node_id": "F", "opacity": 0.5}}, {"bogus": 1}])
            return json.dumps({"choices": [{"message": {"content": content}}]}).encode()

    def opener(request, timeout):
        seen["timeout"] = timeout
        return Reply()

    r = LLMReasoner("http://localhost:9/v1", "any-model", opener=opener)
    calls = r(Plan("x"), None, page.snapshot())
    assert calls == [ToolCall("set_opacity", {"node_id": "F", "opacity": 0.5})]
    assert seen["timeout"] == 1.5
    assert parse_tool_calls([1, {"tool": 3}]) == []


# -- attribution -------------------------------------------------------------------------------

def test_disjoint_window_split(page):
    for nid in ("n1", "n2"):
        call(page, "create_rectangle", parent_id="F", new_id=nid)
    before = page.snapshot()
    agent = call(page, "set_fill_color", node_id="n1", color=[1, 0, 0, 1])
    call(page, "resize_node", actor="user", node_id="n2", width=99, height=77)
    att = attribute_changes([agent.changes], before, page.snapshot())
    assert {(m.node_id, m.key) for m in att.agent.modified} == {("n1", "fill")}
    assert {(m.node_id, m.key) for m in att.user.modified} == {("n2", "width"), ("n2", "height")}


def test_overwritten_agent_write_is_user_override(page):
    before = page.snapshot()
    agent = call(page, "set_layout_mode", node_id="F", mode="horizontal")
    call(page, "set_layout_mode", actor="user", node_id="F", mode="vertical")
    att = attribute_changes([agent.changes], before, page.snapshot())
    assert [(o.node_id, o.key, o.expected, o.actual) for o in att.overrides] == [("F", "layout_mode", "horizontal", "vertical")]
    assert "override F.layout_mode" in att.user_summary
    assert att.agent.is_empty


def test_attribution_fuzz_small():
    rng = random.Random(11)
    for _ in range(300):
        assert matches_ground_truth(*interleaving(rng))
        assert is_partition(*interleaving(rng, overlap=True))


# -- plan updating -----------------------------------------------------------------------------

def test_unrelated_user_edit_keeps_plan_identical(page):
    call(page, "create_rectangle", parent_id="F", new_id="other")
    _, plan = generate_plan(Request("add a features section in frame F"), page.snapshot())
    before = page.snapshot()
    call(page, "set_fill_color", actor="user", node_id="other", color=[0, 1, 0, 1])
    after = page.snapshot()
    att = attribute_changes([], before, after)
    assert update_plan(plan, att, None, before, after).canonical() == plan.canonical()


def test_three_columns_override_rewrites_count(page):
    _, plan = generate_plan(Request("create a two-column hero in frame F"), page.snapshot())
    call(page, "create_frame", parent_id="F", new_id="hero", name="Hero", layout_mode="horizontal", item_spacing=16)
    before = page.snapshot()
    for i in (1, 2, 3):
        call(page, "create_frame", actor="user", parent_id="hero", new_id=f"c{i}", name=f"Column {i}",
             layout_mode="vertical", item_spacing=8)
    after = page.snapshot()
    new = update_plan(plan, attribute_changes([], before, after), None, before, after)
    assert new.goal[0].pred(CHILD_COUNT) == 3
    assert [r.to_json() for r in new.goal[1:]] == [r.to_json() for r in plan.goal[1:]]
    assert new.referenced == plan.referenced


def test_mid_turn_input_adds_dark_theme(page):
    _, plan = generate_plan(Request("add a features section in frame F"), page.snapshot())
    snap = page.snapshot()
    new = update_plan(plan, None, "make it dark theme", snap, snap)
    assert new.goal[: len(plan.goal)] == plan.goal
    assert [r.pred("fill") for r in new.goal[len(plan.goal):]] == [DARK_BG]
    assert "dark theme" in new.text


def test_inactive_plan_is_left_alone(page):
    plan = Plan("done", status="fulfilled")
    snap = page.snapshot()
    assert update_plan(plan, None, "make it dark theme", snap, snap) is plan


# -- feedback ----------------------------------------------------------------------------------

def test_feedback_done_when_all_predicates_hold(page):
    _, plan = generate_plan(Request("set spacing of F to 20"), page.snapshot())
    before = page.snapshot()
    c = call(page, "set_item_spacing", node_id="F", spacing=20)
    fb = evaluate_feedback(plan, before, page.snapshot(), [c.call])
    assert (fb.is_action_needed, fb.feedback) == (False, None)


def test_feedback_names_tool_that_changed_nothing(page):
    _, plan = generate_plan(Request("add a features section in frame F"), page.snapshot())
    snap = page.snapshot()
    fb = evaluate_feedback(plan, snap, snap, [ToolCall("create_rectangle", {"parent_id": "F"})])
    assert fb.is_action_needed and "create_rectangle" in fb.feedback


def test_feedback_covers_only_the_open_half(page):
    _, plan = generate_plan(Request("create a two-column hero in frame F"), page.snapshot())
    before = page.snapshot()
    call(page, "create_frame", actor="user", parent_id="F", new_id="hero", name="Hero", layout_mode="horizontal", item_spacing=16)
    call(page, "create_frame", actor="user", parent_id="hero", name="Column 1", layout_mode="vertical", item_spacing=8)
    fb = evaluate_feedback(plan, before, page.snapshot(), [])
    assert fb.is_action_needed
    assert "Column 2" in fb.feedback and "Column 1" not in fb.feedback
    assert len(unmet(plan.goal, page.snapshot())) == 1 + 1  # the count on Hero and the missing column


# -- runtime -----------------------------------------------------------------------------------

def test_single_batch_turn_has_one_iteration(page):
    rec = AgentRuntime(page).run_turn("add a features section in frame F")
    assert rec.stop_reason == "fulfilled" and len(rec.iterations) == 1
    assert rec.plan_final.status == "fulfilled"


class Toggler:
    """Always changes something, never satisfies the goal."""

    def __init__(self):
        self.n = 0

    def __call__(self, plan, feedback, snap):
        self.n += 1
        return [ToolCall("set_opacity", {"node_id": "F", "opacity": 0.5 if self.n % 2 else 0.25})]


def test_unsatisfiable_goal_stops_at_ten_iterations(page):
    rt = AgentRuntime(page, reasoner=Toggler())
    rec = rt.run_turn("set spacing of F to 20")
    assert len(rec.iterations) == MAX_ITERATIONS and rec.stop_reason == "max-iterations"


def test_no_progress_guard(page):
    rec = AgentRuntime(page, reasoner=lambda plan, fb, snap: []).run_turn("set spacing of F to 20")
    assert rec.stop_reason == "no-progress" and len(rec.iterations) == 2


def test_termination_at_iteration_three(page):
    stream = ScriptedStream({("boundary", 3): [UserEvent("abort")]})
    rec = AgentRuntime(page, reasoner=Toggler()).run_turn("set spacing of F to 20", stream)
    assert rec.terminated and len(rec.iterations) == 3
    assert rec.plan_final.status == "terminated"


def test_nested_turn_is_rejected(page):
    rt = AgentRuntime(page)

    def reenter(ctx):
        with pytest.raises(TurnAlreadyActive):
            rt.run_turn("add a card in frame F")
        with pytest.raises(TurnAlreadyActive):
            rt.apply_op(ToolCall("set_opacity", {"node_id": "F", "opacity": 0.1}))
        return []

    rt.run_turn("add a card in frame F", ScriptedStream(fn=reenter))


def test_user_events_inside_act_window_are_attributed(page):
    stream = ScriptedStream({("act", 1): [UserEvent("op", ToolCall("set_opacity", {"node_id": "F", "opacity": 0.3}))]})
    rec = AgentRuntime(page).run_turn("add a features section in frame F", stream)
    att = rec.iterations[0].attribution
    assert ("F", "opacity") in att.user_keys
    assert all(k[0] != "F" or k[1] != "opacity" for k in att.agent_keys)


def test_input_on_last_iteration_is_queued(page):
    stream = ScriptedStream({("act", 1): [UserEvent("input", text="add a card in frame F")]})
    rt = AgentRuntime(page, max_iterations=1)
    rec = rt.run_turn("add a features section in frame F", stream)
    assert rec.queued_input == ("add a card in frame F",)


def test_turn_bound_over_random_turns(page):
    rng = random.Random(5)
    forms = ["add a card in frame F", "create a 3-column team in frame F", "make F larger", "hello",
             "add 4 icons in frame F", "apply a dark theme to F"]
    rt = AgentRuntime(page, batch_capacity=1)
    for _ in range(40):
        def noisy(ctx, rng=rng):
            if ctx.phase == "act" and rng.random() < 0.3:
                return [UserEvent("op", random_call(page, rng, "user"))]
            return []
        rec = rt.run_turn(rng.choice(forms), ScriptedStream(fn=noisy), quality_iterations=[2])
        assert 1 <= len(rec.iterations) <= MAX_ITERATIONS
        for it in rec.iterations:
            assert not (it.attribution.agent_keys & it.attribution.user_keys)
