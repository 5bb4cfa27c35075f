"""Reasoners turn (plan, feedback, snapshot) into a batch of tool calls.

:class:`ReferenceReasoner` is deterministic: one batch covers every unmet goal
item (optionally capped), parents before children, and skips any call that
would write a user-protected ``(node, key)`` pair.
"""
from __future__ import annotations

import json
import os
import urllib.request
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Protocol

from ..canvas.changes import Atom
from ..canvas.model import ROOT_ID, CanvasSnapshot
from ..canvas.tools import CATALOGUE, ToolCall, call_targets
from .goals import CHILD_COUNT, Plan, Requirement, resolve

FeedbackText = str | None


class Reasoner(Protocol):
    def __call__(self, plan: Plan, feedback: FeedbackText, snap: CanvasSnapshot) -> list[ToolCall]: ...


CREATE_TOOL = {
    "frame": "create_frame",
    "rectangle": "create_rectangle",
    "ellipse": "create_ellipse",
    "polygon": "create_polygon",
    "star": "create_star",
    "text": "create_text",
}
# Goal properties that a create call can set directly.
CREATE_PROPS = {
    "frame": {"layout_mode", "item_spacing", "fill", "corner_radius", "width", "height", "opacity"},
    "rectangle": {"fill", "corner_radius", "width", "height", "opacity"},
    "ellipse": {"fill", "width", "height", "opacity"},
    "polygon": {"fill", "width", "height", "opacity"},
    "star": {"fill", "width", "height", "opacity"},
    "text": {"text", "font_size", "fill", "opacity"},
}


def setter_calls(node_id: str, key: str, value: Any, snap: CanvasSnapshot | None, pending: dict[str, Any]) -> list[ToolCall]:
    """Tool calls that set one property; ``pending`` holds values already queued for the node."""
    if key == "fill":
        return [ToolCall("set_fill_color", {"node_id": node_id, "color": value})]
    if key == "corner_radius":
        return [ToolCall("set_corner_radius", {"node_id": node_id, "radius": value})]
    if key == "layout_mode":
        return [ToolCall("set_layout_mode", {"node_id": node_id, "mode": value})]
    if key == "item_spacing":
        return [ToolCall("set_item_spacing", {"node_id": node_id, "spacing": value})]
    if key == "opacity":
        return [ToolCall("set_opacity", {"node_id": node_id, "opacity": value})]
    if key == "text":
        return [ToolCall("set_text_content", {"node_id": node_id, "text": value})]
    if key == "font_size":
        return [ToolCall("set_text_properties", {"node_id": node_id, "font_size": value})]
    if key in ("width", "height"):
        props = snap.nodes[node_id].props if snap is not None and node_id in snap.nodes else {}
        w = pending.get("width", props.get("width", 100))
        h = pending.get("height", props.get("height", 100))
        return [ToolCall("resize_node", {"node_id": node_id, "width": w, "height": h})]
    return []


def fresh_id(snap: CanvasSnapshot, taken: set[str], index: int) -> str:
    nid = f"a{snap.revision}-{index}"
    k = 0
    while nid in snap.nodes or nid in taken:
        k += 1
        nid = f"a{snap.revision}-{index}.{k}"
    taken.add(nid)
    return nid


def requirement_calls(
    r: Requirement,
    snap: CanvasSnapshot,
    node_id: str | None,
    parent_id: str | None,
    new_id: str | None = None,
) -> list[ToolCall]:
    """Calls that bring one requirement to completion (empty if already met or not actionable)."""
    calls: list[ToolCall] = []
    preds = {k: v for k, v in r.props if k != CHILD_COUNT}
    if node_id is None:
        if parent_id is None or r.kind not in CREATE_TOOL:
            return []
        params: dict[str, Any] = {"parent_id": parent_id, "name": r.name}
        if new_id is not None:
            params["new_id"] = new_id
        if parent_id == ROOT_ID:
            params["top_level"] = True
        direct = CREATE_PROPS[r.kind]
        for k, v in preds.items():
            if k in direct:
                params[k] = v
        if r.kind == "text" and "text" not in params:
            params["text"] = r.name or "Text"
        calls.append(ToolCall(CREATE_TOOL[r.kind], params))
        if new_id is not None:
            pending: dict[str, Any] = {}
            for k, v in preds.items():
                if k not in direct:
                    pending[k] = v
                    calls.extend(setter_calls(new_id, k, v, None, pending))
        return _dedupe(calls)
    props = snap.nodes[node_id].props
    pending = {}
    for k, v in preds.items():
        if props.get(k) != v:
            pending[k] = v
    for k, v in pending.items():
        calls.extend(setter_calls(node_id, k, v, snap, pending))
    return _dedupe(calls)


def _dedupe(calls: list[ToolCall]) -> list[ToolCall]:
    seen: list[ToolCall] = []
    for c in calls:
        if c not in seen:
            seen.append(c)
    return seen


@dataclass
class ReferenceReasoner:
    """Deterministic reasoner over the goal specification.

    ``batch_capacity`` bounds how many goal items one batch may address
    (``None`` = all of them); ``protected`` holds user-modified atoms that must
    not be written.
    """

    batch_capacity: int | None = None
    protected: set[Atom] = field(default_factory=set)

    def __call__(self, plan: Plan, feedback: FeedbackText, snap: CanvasSnapshot) -> list[ToolCall]:
        if plan.status != "active":
            return []
        ids = resolve(plan.goal, snap)
        planned: dict[str, str] = {}  # requirement key -> id assigned in this batch
        taken: set[str] = set()
        batch: list[ToolCall] = []
        addressed = 0
        for r in plan.goal:
            if self.batch_capacity is not None and addressed >= self.batch_capacity:
                break
            nid = ids.get(r.key)
            if nid is None and r.creates:
                parent = r.parent_node if r.parent_req is None else (ids.get(r.parent_req) or planned.get(r.parent_req))
                if parent is None or (parent not in snap.nodes and parent not in planned.values()):
                    continue
                new_id = fresh_id(snap, taken, len(batch))
                calls = requirement_calls(r, snap, None, parent, new_id)
                if calls:
                    planned[r.key] = new_id
            elif nid is None:
                continue
            else:
                calls = requirement_calls(r, snap, nid, None)
            calls = [c for c in calls if not (call_targets(c) & self.protected)]
            if calls:
                batch.extend(calls)
                addressed += 1
        return batch


@dataclass
class LLMReasoner:
    """Adapter that asks an external chat-completion service for tool calls.

    Not used by the test-suite. The service must answer with a JSON array of
    ``{"tool": ..., "params": {...}}`` objects.
    """

    endpoint: str
    model: str
    timeout_ms: int = field(default_factory=lambda: int(os.environ.get("COACT_LLM_TIMEOUT_MS", "30000")))
    opener: Callable[..., Any] = urllib.request.urlopen

    def __call__(self, plan: Plan, feedback: FeedbackText, snap: CanvasSnapshot) -> list[ToolCall]:
        prompt = {
            "plan": plan.text,
            "feedback": feedback,
            "canvas": snap.to_json(),
            "tools": sorted(CATALOGUE),
        }
        body = json.dumps({"model": self.model, "messages": [{"role": "user", "content": json.dumps(prompt)}]}).encode()
        req = urllib.request.Request(self.endpoint, data=body, headers={"Content-Type": "application/json"})
        with self.opener(req, timeout=self.timeout_ms / 1000) as resp:
            payload = json.loads(resp.read())
        content = payload["choices"][0]["message"]["content"] if "choices" in payload else payload
        raw = json.loads(content) if isinstance(content, str) else content
        return parse_tool_calls(raw)


def parse_tool_calls(raw: Iterable[Any]) -> list[ToolCall]:
    out = []
    for item in raw:
        if isinstance(item, dict) and isinstance(item.get("tool"), str):
            out.append(ToolCall(item["tool"], dict(item.get("params", {}))))
    return out
