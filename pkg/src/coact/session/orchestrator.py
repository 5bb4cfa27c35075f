"""Drive whole sessions: scripted requests, simulated user, agent turns, one shared tick clock."""
from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

from ..agent.goals import Request
from ..agent.runtime import AgentRuntime
from ..canvas.model import CanvasDocument, CanvasSnapshot
from ..canvas.tools import ToolCall, apply_tool
from ..events import ActionEvent, Timeline
from ..usersim.simulator import UserSimulator
from .config import LANDING, USER_AREA, ScriptItem, SessionConfig, resolve_request, resolve_selection
from .log import SessionLog


def initial_canvas() -> CanvasSnapshot:
    """A page with the shared landing frame the agent builds into and the user's own work area."""
    doc = CanvasDocument()
    apply_tool(doc, ToolCall("create_frame", {
        "parent_id": "page", "new_id": LANDING, "name": "Landing", "top_level": True,
        "layout_mode": "vertical", "item_spacing": 24, "width": 1200, "height": 2400,
    }))
    apply_tool(doc, ToolCall("create_frame", {
        "parent_id": "page", "new_id": USER_AREA, "name": "My Work", "top_level": True,
        "x": 1300, "width": 800, "height": 2400,
    }))
    return doc.snapshot()


def _latest_section(events: Sequence[ActionEvent], snap: CanvasSnapshot, current: str | None) -> str | None:
    """Most recent agent-created frame directly under the landing frame that still exists."""
    for ev in reversed(events):
        if ev.kind != "op" or ev.actor != "agent" or ev.changes is None:
            continue
        for node in reversed(ev.changes.created):
            if node.parent == LANDING and node.kind == "frame" and node.id in snap.nodes:
                return node.id
    return current if current in snap.nodes else None


def run_session(config: SessionConfig) -> SessionLog:
    """Run every scripted request (plus inputs queued past a turn's end) up to the turn budget."""
    start = initial_canvas()
    doc = CanvasDocument.from_snapshot(start)
    timeline = Timeline()
    runtime = AgentRuntime(doc, timeline, batch_capacity=config.batch_capacity)
    sim = UserSimulator(config.policy, seed=config.seed, switch_pool=config.switch_pool)
    queue: deque[ScriptItem] = deque(config.script)
    turns: list[dict] = []
    recent: str | None = None
    while queue and runtime.turns < config.turn_budget:
        for ev in sim.idle_events(doc.snapshot()):
            runtime.apply_op(ev.call, "user", ev.tags)
        item = queue.popleft()
        request = Request(resolve_request(item.text, recent), resolve_selection(item.selection, recent))
        first = len(timeline.events)
        sim.begin_turn(item.intent)
        record = runtime.run_turn(request, sim, config.quality_schedule)
        sim.end_turn(record)
        turns.append(record.to_json())
        recent = _latest_section(timeline.events[first:], doc.snapshot(), recent)
        # input that arrived too late for the turn becomes the next request
        for text in reversed(record.queued_input):
            queue.appendleft(ScriptItem(text))
    return SessionLog(
        seed=config.seed,
        config_hash=config.config_hash(),
        config=config.to_json(),
        initial_canvas=start.to_json(),
        events=list(timeline.events),
        turns=turns,
        traces=list(sim.traces),
        ledger=list(timeline.ledger),
        final_canvas=doc.snapshot().to_json(),
    )


def run_batch(configs: Sequence[SessionConfig], workers: int = 1) -> list[SessionLog]:
    """Sessions are independent; results come back in input order regardless of ``workers``."""
    if workers <= 1:
        return [run_session(c) for c in configs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_session, configs))
