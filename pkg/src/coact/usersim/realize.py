"""Concrete user events for each action code."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from ..agent.goals import COLORS, Plan, resolve, unmet
from ..agent.planning import constrained_atoms
from ..agent.reasoner import requirement_calls, setter_calls
from ..agent.runtime import StreamContext, UserEvent
from ..canvas.model import CanvasSnapshot
from ..canvas.tools import PAINTABLE, ToolCall
from .taxonomy import CODES

USER_AREA = "user_area"
FOCUS_CODE = "observational-monitoring"
SWITCH_PREFIX = "new task:"
STEERING = ("make it dark theme", "arrange it vertically", "set spacing to 24")

# Property overrides used to demonstrate a preferred value.
DEMO_KEYS = ("item_spacing", "fill", "corner_radius", "font_size", "layout_mode", "width")


class NoEligibleTarget(LookupError):
    pass


@dataclass
class RealizeContext:
    """What the simulated user can see when acting."""

    ctx: StreamContext
    new_id: Callable[[], str]
    intent: Mapping[str, Any] = field(default_factory=dict)
    switch_pool: tuple[str, ...] = ()

    @property
    def snap(self) -> CanvasSnapshot:
        return self.ctx.snapshot

    @property
    def plan(self) -> Plan:
        return self.ctx.plan


def in_user_area(snap: CanvasSnapshot, nid: str) -> bool:
    return nid == USER_AREA or USER_AREA in snap.ancestors(nid)


def agent_scope(rc: RealizeContext) -> list[str]:
    """Existing nodes the agent works on this turn: goal-realizing nodes plus its creations."""
    snap = rc.snap
    ids = {v for v in resolve(rc.plan.goal, snap).values() if v is not None}
    ids.update(n for n in rc.ctx.agent_created if n in snap.nodes)
    return sorted(i for i in ids if snap.nodes[i].parent is not None and not in_user_area(snap, i))


def _tag(code: str, trigger: str | None) -> dict[str, Any]:
    out: dict[str, Any] = {"category": CODES[code], "code": code}
    if trigger:
        out["trigger"] = trigger
    return out


def own_work(rc: RealizeContext, rng: random.Random, trigger: str | None = None) -> list[UserEvent]:
    nid = rc.new_id()
    call = ToolCall("create_rectangle", {
        "parent_id": USER_AREA,
        "new_id": nid,
        "name": f"Sketch {nid}",
        "x": rng.randrange(0, 400, 10),
        "y": rng.randrange(0, 400, 10),
        "width": rng.randrange(20, 120, 10),
        "height": rng.randrange(20, 120, 10),
    })
    return [UserEvent("op", call, tags=_tag("full-delegation", None))]


def _appropriation(rc: RealizeContext, rng: random.Random, trigger: str | None) -> list[UserEvent]:
    snap = rc.snap
    leaves = sorted(
        n for n in rc.ctx.agent_created
        if n in snap.nodes and not in_user_area(snap, n) and not any(c.parent == n for c in snap.nodes.values())
    )
    if not leaves:
        raise NoEligibleTarget("no agent-created node to appropriate yet")
    src = rng.choice(leaves)
    call = ToolCall("clone_node", {"node_id": src, "parent_id": USER_AREA, "new_id": rc.new_id()})
    return [UserEvent("op", call, tags=_tag("intermediate-result-appropriation", trigger))]


def _takeover(rc: RealizeContext, rng: random.Random, trigger: str | None) -> list[UserEvent]:
    snap = rc.snap
    created = set(rc.ctx.agent_created)
    roots = sorted(
        n for n in created
        if n in snap.nodes and snap.nodes[n].kind == "frame" and snap.nodes[n].parent not in created and not in_user_area(snap, n)
    )
    if not roots:
        raise NoEligibleTarget("no agent work-in-progress frame to take over")
    src = rng.choice(roots)
    clone = rc.new_id()
    current = snap.nodes[src].props.get("fill")
    color = rng.choice([c for name, c in sorted(COLORS.items()) if c != current])
    tags = _tag("artifact-takeover", trigger)
    return [
        UserEvent("op", ToolCall("clone_node", {"node_id": src, "parent_id": USER_AREA, "new_id": clone}), tags=tags),
        UserEvent("op", ToolCall("set_fill_color", {"node_id": clone, "color": color}), tags=tags),
    ]


def _in_situ(rc: RealizeContext, rng: random.Random, trigger: str | None) -> list[UserEvent]:
    snap = rc.snap
    blocked = constrained_atoms(rc.plan, snap) | set(rc.ctx.agent_written)
    options = []
    for nid in agent_scope(rc):
        node = snap.nodes[nid]
        if node.kind not in PAINTABLE:
            continue
        if (nid, "opacity") not in blocked and node.props.get("opacity") != 0.9:
            options.append(ToolCall("set_opacity", {"node_id": nid, "opacity": 0.9}))
        if (nid, "drop_shadow") not in blocked and "drop_shadow" not in node.props:
            options.append(ToolCall("set_drop_shadow", {"node_id": nid, "blur": 8, "offset_y": 2}))
        if (nid, "stroke") not in blocked and "stroke" not in node.props:
            options.append(ToolCall("set_stroke", {"node_id": nid, "color": (0.8, 0.8, 0.8, 1), "weight": 1}))
    if not options:
        raise NoEligibleTarget("no unconstrained property in the agent's scope")
    return [UserEvent("op", rng.choice(options), tags=_tag("in-situ-co-editing", trigger))]


def _pending_names(ctx: StreamContext) -> set[tuple[str, str]]:
    out = set()
    for c in getattr(ctx, "pending_calls", ()):
        if c.tool.startswith("create_"):
            out.add((c.params.get("parent_id"), c.params.get("name")))
    return out


def _opportunistic(rc: RealizeContext, rng: random.Random, trigger: str | None) -> list[UserEvent]:
    snap = rc.snap
    ids = resolve(rc.plan.goal, snap)
    pending = _pending_names(rc.ctx)
    missing = {u.key for u in unmet(rc.plan.goal, snap) if u.what == "missing"}
    options = []
    for r in rc.plan.goal:
        if r.key not in missing or not r.creates:
            continue
        parent = r.parent_node if r.parent_req is None else ids.get(r.parent_req)
        if parent is None or parent not in snap.nodes or (parent, r.name) in pending:
            continue
        options.append((r, parent))
    if not options:
        raise NoEligibleTarget("no pending goal item the user could complete")
    r, parent = rng.choice(options)
    calls = requirement_calls(r, snap, None, parent, rc.new_id())
    tags = _tag("opportunistic-takeover", trigger)
    return [UserEvent("op", c, tags=tags) for c in calls]


def _demo_value(key: str, current: Any, rng: random.Random) -> Any:
    if key == "item_spacing":
        return (current or 0) + 16
    if key == "corner_radius":
        return (current if isinstance(current, (int, float)) else 0) + 8
    if key == "font_size":
        return (current or 16) + 8
    if key == "layout_mode":
        return "vertical" if current == "horizontal" else "horizontal"
    if key == "fill":
        return rng.choice([c for _, c in sorted(COLORS.items()) if c != current])
    if key == "width":
        return round((current or 100) * 1.25, 2)
    raise KeyError(key)


def _demonstration(rc: RealizeContext, rng: random.Random, trigger: str | None) -> list[UserEvent]:
    snap = rc.snap
    written = rc.ctx.agent_written
    tags = _tag("demonstration-based-steering", trigger)
    if trigger == "misaligned-interpretation" and rc.intent and rc.plan.goal:
        nid = resolve(rc.plan.goal[:1], snap).get(rc.plan.goal[0].key)
        for key, value in sorted(rc.intent.items()):
            if nid is not None and (nid, key) in written and snap.nodes[nid].props.get(key) != value:
                calls = setter_calls(nid, key, value, snap, {key: value})
                return [UserEvent("op", c, tags=tags) for c in calls]
    recent = rc.ctx.iteration_written or written
    options = sorted(
        (nid, key) for (nid, key) in recent
        if key in DEMO_KEYS and nid in snap.nodes and not in_user_area(snap, nid) and (nid, key) in written
    )
    if not options:
        raise NoEligibleTarget("the agent has not set a demonstrable property yet")
    nid, key = rng.choice(options)
    value = _demo_value(key, snap.nodes[nid].props.get(key), rng)
    pending = {key: value}
    if key == "width":
        pending["height"] = snap.nodes[nid].props.get("height", 100)
    calls = setter_calls(nid, key, value, snap, pending)
    return [UserEvent("op", c, tags=tags) for c in calls]


def intent_instruction(rc: RealizeContext) -> str | None:
    if not rc.intent or not rc.plan.goal:
        return None
    ref = resolve(rc.plan.goal[:1], rc.snap).get(rc.plan.goal[0].key)
    if ref is None:
        return None
    for key, value in sorted(rc.intent.items()):
        if key == "item_spacing":
            return f"set spacing of {ref} to {value}"
        if key == "layout_mode":
            return f"arrange {ref} {'vertically' if value == 'vertical' else 'horizontally'}"
        if key == "fill":
            name = next((n for n, c in COLORS.items() if c == tuple(value)), None)
            if name:
                return f"recolor {ref} to {name}"
    return None


def _instruction(rc: RealizeContext, rng: random.Random, trigger: str | None) -> list[UserEvent]:
    if rc.plan.status != "active":
        raise NoEligibleTarget("no active plan to steer")
    text = intent_instruction(rc) if trigger == "misaligned-interpretation" else None
    if text is None:
        text = rng.choice(STEERING)
    return [UserEvent("input", text=text, tags=_tag("instruction-based-steering", trigger))]


def _switching(rc: RealizeContext, rng: random.Random, trigger: str | None) -> list[UserEvent]:
    if not rc.switch_pool:
        raise NoEligibleTarget("no alternative task available")
    text = f"{SWITCH_PREFIX} {rng.choice(rc.switch_pool)}"
    return [UserEvent("input", text=text, tags=_tag("switching-tasks", trigger))]


def _termination(rc: RealizeContext, rng: random.Random, trigger: str | None) -> list[UserEvent]:
    return [UserEvent("abort", tags=_tag("execution-termination", trigger))]


def _focus(rc: RealizeContext, rng: random.Random, trigger: str | None) -> list[UserEvent]:
    return [UserEvent("focus", tags=_tag(FOCUS_CODE, None))]


REALIZERS: dict[str, Callable[[RealizeContext, random.Random, str | None], list[UserEvent]]] = {
    "full-delegation": own_work,
    "observational-monitoring": _focus,
    "execution-termination": _termination,
    "instruction-based-steering": _instruction,
    "switching-tasks": _switching,
    "intermediate-result-appropriation": _appropriation,
    "artifact-takeover": _takeover,
    "in-situ-co-editing": _in_situ,
    "opportunistic-takeover": _opportunistic,
    "demonstration-based-steering": _demonstration,
}


def realize_actions(code: str, rc: RealizeContext, rng: random.Random, trigger: str | None = None) -> list[UserEvent]:
    """Events realizing ``code``; raises :class:`NoEligibleTarget` when the canvas offers no target."""
    if code not in REALIZERS:
        raise KeyError(f"unknown action code {code!r}")
    return REALIZERS[code](rc, rng, trigger)
