"""Plans with machine-checkable goal specifications, and the request vocabulary.

A goal is an ordered tuple of :class:`Requirement` items. A requirement either
targets an existing node by id, or describes a node to create (kind, name and
parent) which is located on the canvas by name + kind under its resolved
parent. Each requirement carries property predicates ``key == value``; the
pseudo-key ``@child_count`` constrains the number of children.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from typing import Any, Iterable, Mapping

from ..canvas.model import CanvasSnapshot, canonical_json, freeze

CHILD_COUNT = "@child_count"

COLORS: dict[str, tuple[float, float, float, float]] = {
    "red": (0.9, 0.2, 0.2, 1),
    "blue": (0.2, 0.4, 0.9, 1),
    "green": (0.2, 0.7, 0.3, 1),
    "orange": (1, 0.6, 0.1, 1),
    "purple": (0.5, 0.3, 0.8, 1),
    "yellow": (1, 0.85, 0.2, 1),
    "gray": (0.5, 0.5, 0.5, 1),
    "black": (0, 0, 0, 1),
    "white": (1, 1, 1, 1),
}
DARK_BG = (0.1, 0.1, 0.12, 1)
DARK_TEXT = (0.95, 0.95, 0.95, 1)
NUMBER_WORDS = {w: i for i, w in enumerate("zero one two three four five six seven eight nine ten".split())}


@dataclass(frozen=True)
class Requirement:
    key: str
    kind: str
    props: tuple[tuple[str, Any], ...] = ()
    node_id: str | None = None  # existing target
    name: str | None = None  # created target: located by name ...
    parent_node: str | None = None  # ... under this existing node
    parent_req: str | None = None  # ... or under the node realizing this requirement

    @property
    def creates(self) -> bool:
        return self.node_id is None

    def pred(self, key: str, default: Any = None) -> Any:
        for k, v in self.props:
            if k == key:
                return v
        return default

    def with_pred(self, key: str, value: Any) -> "Requirement":
        props = dict(self.props)
        props[key] = freeze(value)
        return replace(self, props=tuple(sorted(props.items())))

    def to_json(self) -> dict:
        out: dict[str, Any] = {"key": self.key, "kind": self.kind, "props": [[k, v] for k, v in self.props]}
        for f in ("node_id", "name", "parent_node", "parent_req"):
            if getattr(self, f) is not None:
                out[f] = getattr(self, f)
        return out

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "Requirement":
        return cls(
            key=data["key"],
            kind=data["kind"],
            props=tuple((k, freeze(v)) for k, v in data.get("props", ())),
            node_id=data.get("node_id"),
            name=data.get("name"),
            parent_node=data.get("parent_node"),
            parent_req=data.get("parent_req"),
        )


def req(key: str, kind: str, props: Mapping[str, Any] | None = None, **target: Any) -> Requirement:
    return Requirement(key=key, kind=kind, props=tuple(sorted((k, freeze(v)) for k, v in (props or {}).items())), **target)


PLAN_STATUSES = ("active", "fulfilled", "terminated")


@dataclass(frozen=True)
class Plan:
    text: str
    referenced: tuple[tuple[str, str], ...] = ()
    goal: tuple[Requirement, ...] = ()
    status: str = "active"
    anchor: str | None = None  # default target for follow-up input ("make it dark theme")

    def to_json(self) -> dict:
        return {
            "text": self.text,
            "referenced": [list(r) for r in self.referenced],
            "goal": [r.to_json() for r in self.goal],
            "status": self.status,
            "anchor": self.anchor,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "Plan":
        return cls(
            text=data["text"],
            referenced=tuple(tuple(r) for r in data.get("referenced", ())),
            goal=tuple(Requirement.from_json(r) for r in data.get("goal", ())),
            status=data.get("status", "active"),
            anchor=data.get("anchor"),
        )

    def canonical(self) -> str:
        return canonical_json(self.to_json())

    def requirement(self, key: str) -> Requirement | None:
        for r in self.goal:
            if r.key == key:
                return r
        return None


NO_PLAN = Plan(text="No design action needed.", status="fulfilled")


@dataclass(frozen=True)
class Request:
    text: str
    selection: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {"text": self.text, "selection": list(self.selection)}

    @classmethod
    def from_json(cls, data: Any) -> "Request":
        if isinstance(data, str):
            return cls(data)
        return cls(data["text"], tuple(data.get("selection", ())))


# -- resolution ---------------------------------------------------------------

def resolve(goal: Iterable[Requirement], snap: CanvasSnapshot) -> dict[str, str | None]:
    """Map each requirement key to the node that realizes it (``None`` if absent)."""
    out: dict[str, str | None] = {}
    for r in goal:
        if not r.creates:
            out[r.key] = r.node_id if r.node_id in snap.nodes else None
            continue
        pid = r.parent_node if r.parent_req is None else out.get(r.parent_req)
        if pid is None or pid not in snap.nodes:
            out[r.key] = None
            continue
        hits = [n for n in snap.children(pid) if n.name == r.name and n.kind == r.kind]
        out[r.key] = hits[0].id if hits else None
    return out


def read_value(snap: CanvasSnapshot, node_id: str, key: str) -> Any:
    node = snap.nodes[node_id]
    if key == CHILD_COUNT:
        return sum(1 for n in snap.nodes.values() if n.parent == node_id)
    return node.props.get(key)


@dataclass(frozen=True)
class Unmet:
    key: str  # requirement key
    what: str  # "missing" or the property key
    expected: Any = None
    actual: Any = None


def unmet(goal: Iterable[Requirement], snap: CanvasSnapshot) -> list[Unmet]:
    goal = tuple(goal)
    ids = resolve(goal, snap)
    out = []
    for r in goal:
        nid = ids[r.key]
        if nid is None:
            out.append(Unmet(r.key, "missing"))
            continue
        for k, v in r.props:
            actual = read_value(snap, nid, k)
            if actual != v:
                out.append(Unmet(r.key, k, v, actual))
    return out


def describe(r: Requirement, snap: CanvasSnapshot | None = None) -> str:
    if r.creates:
        return f"{r.kind} '{r.name}'"
    name = snap.nodes[r.node_id].name if snap is not None and r.node_id in snap.nodes else r.node_id
    return f"(id: {r.node_id}, name: '{name}')"


def describe_unmet(plan: Plan, items: Iterable[Unmet], snap: CanvasSnapshot | None = None) -> str:
    parts = []
    for u in items:
        r = plan.requirement(u.key)
        target = describe(r, snap) if r else u.key
        if u.what == "missing":
            parts.append(f"create {target}")
        else:
            parts.append(f"set {u.what}={json.dumps(u.expected)} on {target}")
    return "; ".join(parts)


# -- request vocabulary ---------------------------------------------------------

_REF = r"(?P<ref>'[^']+'|\"[^\"]+\"|\S+)"
_QUOTE = r"(?P<q>\"[^\"]*\"|'[^']*')"
_NUM = r"(?P<n>\d+|" + "|".join(NUMBER_WORDS) + r")"

VOCABULARY: tuple[tuple[str, re.Pattern[str]], ...] = tuple(
    (name, re.compile(pattern, re.IGNORECASE))
    for name, pattern in (
        ("columns", rf"^create an? {_NUM}-column (?P<label>[a-z][a-z ]*?) in frame {_REF}$"),
        ("section", rf"^add an? (?P<label>[a-z][a-z ]*?) section in frame {_REF}$"),
        ("button", rf"^add a button {_QUOTE} in frame {_REF}$"),
        ("heading", rf"^add a heading {_QUOTE} in frame {_REF}$"),
        ("icons", rf"^add {_NUM} icons in frame {_REF}$"),
        ("card", rf"^add a card in frame {_REF}$"),
        ("larger", rf"^make (?:this|it|{_REF}) larger$"),
        ("dark", rf"^(?:make it|apply a) dark theme(?: to {_REF})?$"),
        ("recolor", rf"^recolor (?:this|it|{_REF}) to (?P<color>{'|'.join(COLORS)})$"),
        ("arrange", rf"^arrange (?:this|it|{_REF}) (?P<dir>vertically|horizontally)$"),
        ("spacing", rf"^set (?:the )?spacing(?: of {_REF})? to (?P<n>\d+)$"),
    )
)
CHATTER = "chatter"
REQUEST_FORMS = tuple(n for n, _ in VOCABULARY) + (CHATTER,)
SWITCH_PREFIX = "new task:"


def parse_request(text: str) -> tuple[str, dict[str, str]]:
    """Return ``(form, groups)``; unrecognised text is chatter."""
    cleaned = " ".join(text.strip().rstrip(".!").split())
    for name, pattern in VOCABULARY:
        m = pattern.match(cleaned)
        if m:
            return name, {k: v for k, v in m.groupdict().items() if v is not None}
    return CHATTER, {}


def _unquote(s: str) -> str:
    if len(s) >= 2 and s[0] == s[-1] and s[0] in "'\"":
        return s[1:-1]
    return s


def _number(s: str) -> int:
    return int(s) if s.isdigit() else NUMBER_WORDS[s.lower()]


def find_node(snap: CanvasSnapshot, ref: str, kinds: Iterable[str] | None = None) -> str | None:
    """Locate a node by id, else by unique name."""
    ref = _unquote(ref)
    kinds = set(kinds) if kinds else None
    node = snap.nodes.get(ref)
    if node is not None and (kinds is None or node.kind in kinds):
        return ref
    hits = sorted(n.id for n in snap.nodes.values() if n.name == ref and (kinds is None or n.kind in kinds))
    return hits[0] if len(hits) == 1 else None


def unique_name(snap: CanvasSnapshot, parent: str, base: str, taken: Iterable[str] = ()) -> str:
    used = {n.name for n in snap.nodes.values() if n.parent == parent} | set(taken)
    if base not in used:
        return base
    k = 2
    while f"{base} {k}" in used:
        k += 1
    return f"{base} {k}"


def ref_text(snap: CanvasSnapshot, nid: str) -> str:
    return f"(id: {nid}, name: '{snap.nodes[nid].name}')"


def _text_descendants(snap: CanvasSnapshot, root: str) -> list[str]:
    return [d for d in snap.descendants(root) if snap.nodes[d].kind == "text"]


def build_goal(
    form: str,
    g: Mapping[str, str],
    snap: CanvasSnapshot,
    selection: tuple[str, ...] = (),
    default_target: str | None = None,
    key_prefix: str = "r",
) -> tuple[str, tuple[Requirement, ...], str | None, list[str]] | None:
    """Goal for one parsed request: ``(text, goal, anchor, referenced ids)`` or ``None``."""
    k = iter(f"{key_prefix}{i}" for i in range(1, 1000))

    def target(kinds: Iterable[str] | None = None) -> str | None:
        if "ref" in g:
            return find_node(snap, g["ref"], kinds)
        for nid in list(selection) + ([default_target] if default_target else []):
            if nid in snap.nodes and (kinds is None or snap.nodes[nid].kind in set(kinds)):
                return nid
        return None

    frames = ("frame",)
    if form == "columns":
        f = target(frames)
        n = _number(g["n"])
        if f is None or not 1 <= n <= 6:
            return None
        label = g["label"].strip().title()
        name = unique_name(snap, f, label)
        s = next(k)
        goal = [req(s, "frame", {"layout_mode": "horizontal", "item_spacing": 16, CHILD_COUNT: n}, name=name, parent_node=f)]
        goal += [req(next(k), "frame", {"layout_mode": "vertical", "item_spacing": 8}, name=f"Column {i}", parent_req=s) for i in range(1, n + 1)]
        return f"Create a {n}-column '{name}' in {ref_text(snap, f)} using horizontal auto layout.", tuple(goal), f, [f]
    if form == "section":
        f = target(frames)
        if f is None:
            return None
        label = g["label"].strip().title()
        name = unique_name(snap, f, f"{label} Section")
        s = next(k)
        goal = (
            req(s, "frame", {"layout_mode": "vertical", "item_spacing": 12}, name=name, parent_node=f),
            req(next(k), "text", {"text": label, "font_size": 24}, name="Title", parent_req=s),
        )
        return f"Add a '{name}' with a title in {ref_text(snap, f)}.", goal, f, [f]
    if form == "button":
        f = target(frames)
        if f is None:
            return None
        label = _unquote(g["q"])
        name = unique_name(snap, f, "Button")
        s = next(k)
        goal = (
            req(s, "frame", {"layout_mode": "horizontal", "corner_radius": 8, "fill": COLORS["blue"]}, name=name, parent_node=f),
            req(next(k), "text", {"text": label, "fill": COLORS["white"]}, name="Label", parent_req=s),
        )
        return f"Add a '{label}' button in {ref_text(snap, f)}.", goal, f, [f]
    if form == "heading":
        f = target(frames)
        if f is None:
            return None
        text = _unquote(g["q"])
        goal = (req(next(k), "text", {"text": text, "font_size": 32}, name=unique_name(snap, f, "Heading"), parent_node=f),)
        return f"Add heading '{text}' in {ref_text(snap, f)}.", goal, f, [f]
    if form == "icons":
        f = target(frames)
        n = _number(g["n"])
        if f is None or not 1 <= n <= 8:
            return None
        s = next(k)
        name = unique_name(snap, f, "Icons")
        goal = [req(s, "frame", {"layout_mode": "horizontal", "item_spacing": 8}, name=name, parent_node=f)]
        goal += [req(next(k), "ellipse", {"width": 24, "height": 24}, name=f"Icon {i}", parent_req=s) for i in range(1, n + 1)]
        return f"Add a row of {n} icons in {ref_text(snap, f)}.", tuple(goal), f, [f]
    if form == "card":
        f = target(frames)
        if f is None:
            return None
        s = next(k)
        name = unique_name(snap, f, "Card")
        goal = (
            req(s, "frame", {"layout_mode": "vertical", "corner_radius": 12, "item_spacing": 8}, name=name, parent_node=f),
            req(next(k), "rectangle", {"width": 200, "height": 120}, name="Card Image", parent_req=s),
            req(next(k), "text", {"text": "Card title", "font_size": 18}, name="Card Title", parent_req=s),
        )
        return f"Add a card with image and title in {ref_text(snap, f)}.", goal, f, [f]
    if form == "larger":
        t = target()
        if t is None or snap.nodes[t].parent is None:
            return None
        p = snap.nodes[t].props
        w, h = p.get("width", 100), p.get("height", 100)
        goal = (req(next(k), snap.nodes[t].kind, {"width": round(w * 1.5, 2), "height": round(h * 1.5, 2)}, node_id=t),)
        return f"Modify selected node {ref_text(snap, t)}: make it 1.5x larger.", goal, t, [t]
    if form == "dark":
        t = target(frames)
        if t is None:
            return None
        goal = [req(next(k), "frame", {"fill": DARK_BG}, node_id=t)]
        goal += [req(next(k), "text", {"fill": DARK_TEXT}, node_id=d) for d in _text_descendants(snap, t)]
        return f"Apply a dark theme to {ref_text(snap, t)}.", tuple(goal), t, [t]
    if form == "recolor":
        t = target()
        if t is None or snap.nodes[t].kind in ("page", "group"):
            return None
        goal = (req(next(k), snap.nodes[t].kind, {"fill": COLORS[g["color"].lower()]}, node_id=t),)
        return f"Recolor {ref_text(snap, t)} to {g['color'].lower()}.", goal, t, [t]
    if form == "arrange":
        t = target(frames)
        if t is None:
            return None
        mode = "vertical" if g["dir"].lower() == "vertically" else "horizontal"
        goal = (req(next(k), "frame", {"layout_mode": mode}, node_id=t),)
        return f"Arrange children of {ref_text(snap, t)} {g['dir'].lower()}.", goal, t, [t]
    if form == "spacing":
        t = target(frames)
        if t is None:
            return None
        goal = (req(next(k), "frame", {"item_spacing": int(g["n"])}, node_id=t),)
        return f"Set item spacing of {ref_text(snap, t)} to {g['n']}.", goal, t, [t]
    return None


def generate_plan(request: Request, snap: CanvasSnapshot) -> tuple[bool, Plan]:
    """Map a structured request to ``(is_action_needed, plan)``."""
    text = request.text.strip()
    if text.lower().startswith(SWITCH_PREFIX):
        text = text[len(SWITCH_PREFIX):].strip()
    form, groups = parse_request(text)
    if form == CHATTER:
        return False, NO_PLAN
    sel = tuple(s for s in request.selection if s in snap.nodes)
    built = build_goal(form, groups, snap, sel)
    if built is None:
        return False, NO_PLAN
    ptext, goal, anchor, refs = built
    referenced = tuple((nid, snap.nodes[nid].name) for nid in dict.fromkeys(list(sel) + refs))
    return True, Plan(text=ptext, referenced=referenced, goal=goal, anchor=anchor)
