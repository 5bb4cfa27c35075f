"""The 38 canvas operations and their parameter schemas.

Every tool validates its parameters against a declarative schema before it
touches the document; a handler that fails midway is rolled back, so a call
either applies completely (revision + 1) or not at all.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping

from .changes import ChangeSet, diff_nodes
from .model import (
    AUTO_LAYOUT_MODES,
    CONTAINER_KINDS,
    SHAPE_KINDS,
    CanvasDocument,
    CanvasNode,
    InvalidParam,
    MissingNode,
    MoveInsideAutoLayout,
    RootLevelCreate,
    UnknownTool,
    freeze,
)

ACTORS = ("agent", "user")

TEXT_DEFAULTS = {"font_size": 16, "font_family": "Inter", "font_style": "Regular", "text_align": "left"}
CHAR_WIDTH_EM = 0.6
LINE_HEIGHT_EM = 1.2

# copy_style copies exactly these keys.
STYLE_KEYS = ("fill", "stroke", "corner_radius", "opacity", "drop_shadow", "inner_shadow")


@dataclass(frozen=True)
class ToolCall:
    tool: str
    params: Mapping[str, Any] = field(default_factory=dict)
    actor: str = "agent"
    tick: int = 0

    def to_json(self) -> dict:
        return {"tool": self.tool, "params": dict(sorted(self.params.items())), "actor": self.actor, "tick": self.tick}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "ToolCall":
        return cls(
            tool=data["tool"],
            params={k: freeze(v) for k, v in data.get("params", {}).items()},
            actor=data.get("actor", "agent"),
            tick=int(data.get("tick", 0)),
        )


@dataclass(frozen=True)
class ToolResult:
    """Outcome of one applied call; ``changes`` is the exact delta it produced."""

    call: ToolCall
    changes: ChangeSet
    revision: int
    value: Any = None


# -- parameter validators ----------------------------------------------------

Validator = Callable[[CanvasDocument, str, Any], Any]


def _is_num(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def v_node(doc: CanvasDocument, name: str, v: Any) -> str:
    if not isinstance(v, str):
        raise InvalidParam(f"{name} must be a node id string")
    if v not in doc:
        raise MissingNode(f"{name}: node {v!r} does not exist")
    return v


def v_nodes(doc: CanvasDocument, name: str, v: Any) -> tuple[str, ...]:
    if not isinstance(v, (list, tuple)) or not v:
        raise InvalidParam(f"{name} must be a non-empty list of node ids")
    out = tuple(v_node(doc, name, x) for x in v)
    if len(set(out)) != len(out):
        raise InvalidParam(f"{name} contains duplicates")
    return out


def v_new_id(doc: CanvasDocument, name: str, v: Any) -> str:
    if not isinstance(v, str) or not v:
        raise InvalidParam(f"{name} must be a non-empty string")
    if v in doc:
        raise InvalidParam(f"{name}: id {v!r} already in use")
    return v


def v_str(doc: CanvasDocument, name: str, v: Any) -> str:
    if not isinstance(v, str):
        raise InvalidParam(f"{name} must be a string")
    return v


def v_name(doc: CanvasDocument, name: str, v: Any) -> str:
    if not isinstance(v, str) or not v.strip():
        raise InvalidParam(f"{name} must be a non-empty string")
    return v


def v_num(doc: CanvasDocument, name: str, v: Any) -> float:
    if not _is_num(v):
        raise InvalidParam(f"{name} must be a finite number")
    return v


def v_nonneg(doc: CanvasDocument, name: str, v: Any) -> float:
    v = v_num(doc, name, v)
    if v < 0:
        raise InvalidParam(f"{name} must be >= 0")
    return v


def v_pos(doc: CanvasDocument, name: str, v: Any) -> float:
    v = v_num(doc, name, v)
    if v <= 0:
        raise InvalidParam(f"{name} must be > 0")
    return v


def v_unit(doc: CanvasDocument, name: str, v: Any) -> float:
    v = v_num(doc, name, v)
    if not 0 <= v <= 1:
        raise InvalidParam(f"{name} must be within [0, 1]")
    return v


def v_index(doc: CanvasDocument, name: str, v: Any) -> int:
    if not isinstance(v, int) or isinstance(v, bool) or v < 0:
        raise InvalidParam(f"{name} must be a non-negative integer")
    return v


def v_int_min(lo: int) -> Validator:
    def check(doc: CanvasDocument, name: str, v: Any) -> int:
        if not isinstance(v, int) or isinstance(v, bool) or v < lo:
            raise InvalidParam(f"{name} must be an integer >= {lo}")
        return v

    return check


def v_bool(doc: CanvasDocument, name: str, v: Any) -> bool:
    if not isinstance(v, bool):
        raise InvalidParam(f"{name} must be a boolean")
    return v


def v_color(doc: CanvasDocument, name: str, v: Any) -> tuple[float, ...]:
    if not isinstance(v, (list, tuple)) or len(v) not in (3, 4):
        raise InvalidParam(f"{name} must be an RGB or RGBA sequence")
    vals = tuple(v_unit(doc, name, c) for c in v)
    return vals if len(vals) == 4 else vals + (1,)


def v_enum(*choices: str) -> Validator:
    def check(doc: CanvasDocument, name: str, v: Any) -> str:
        if v not in choices:
            raise InvalidParam(f"{name} must be one of {', '.join(choices)}")
        return v

    return check


def v_padding(doc: CanvasDocument, name: str, v: Any) -> tuple:
    if _is_num(v):
        v = (v, v, v, v)
    if not isinstance(v, (list, tuple)) or len(v) != 4:
        raise InvalidParam(f"{name} must be a number or [top, right, bottom, left]")
    return tuple(v_nonneg(doc, name, x) for x in v)


def v_radius(doc: CanvasDocument, name: str, v: Any) -> Any:
    if isinstance(v, (list, tuple)):
        if len(v) != 4:
            raise InvalidParam(f"{name} must be a number or four numbers")
        return tuple(v_nonneg(doc, name, x) for x in v)
    return v_nonneg(doc, name, v)


def v_stops(doc: CanvasDocument, name: str, v: Any) -> tuple:
    if not isinstance(v, (list, tuple)) or len(v) < 2:
        raise InvalidParam(f"{name} needs at least two color stops")
    out = []
    for stop in v:
        if isinstance(stop, Mapping):
            pos, color = stop.get("position"), stop.get("color")
        elif isinstance(stop, (list, tuple)) and len(stop) == 2:
            pos, color = stop
        else:
            raise InvalidParam(f"{name}: each stop is (position, color)")
        out.append((v_unit(doc, name, pos), v_color(doc, name, color)))
    positions = [p for p, _ in out]
    if positions != sorted(positions):
        raise InvalidParam(f"{name}: stop positions must be ascending")
    return tuple(out)


def v_text_updates(doc: CanvasDocument, name: str, v: Any) -> tuple:
    if not isinstance(v, (list, tuple)) or not v:
        raise InvalidParam(f"{name} must be a non-empty list of {{node_id, text}}")
    out = []
    for item in v:
        if not isinstance(item, Mapping):
            raise InvalidParam(f"{name}: each update is {{node_id, text}}")
        out.append((v_node(doc, name, item.get("node_id")), v_str(doc, name, item.get("text"))))
    return tuple(out)


# -- transaction journal -----------------------------------------------------

_MISSING = object()


class _Tx:
    """Copy-on-write edit journal over a document, with rollback."""

    def __init__(self, doc: CanvasDocument) -> None:
        self.doc = doc
        self._orig_nodes: dict[str, Any] = {}
        self._orig_children: dict[str, Any] = {}
        self._orig_counter = doc.id_counter

    # bookkeeping
    def _save_node(self, nid: str) -> None:
        if nid not in self._orig_nodes:
            self._orig_nodes[nid] = self.doc._nodes.get(nid, _MISSING)

    def _save_children(self, pid: str) -> None:
        if pid not in self._orig_children:
            kids = self.doc._children.get(pid)
            self._orig_children[pid] = _MISSING if kids is None else list(kids)

    def rollback(self) -> None:
        for nid, node in self._orig_nodes.items():
            if node is _MISSING:
                self.doc._nodes.pop(nid, None)
            else:
                self.doc._nodes[nid] = node
        for pid, kids in self._orig_children.items():
            if kids is _MISSING:
                self.doc._children.pop(pid, None)
            else:
                self.doc._children[pid] = kids
        self.doc.id_counter = self._orig_counter

    def changes(self) -> ChangeSet:
        before = {k: v for k, v in self._orig_nodes.items() if v is not _MISSING}
        after = {k: self.doc._nodes[k] for k in self._orig_nodes if k in self.doc._nodes}
        return diff_nodes(before, after, self._orig_nodes.keys())

    # reads
    def node(self, nid: str) -> CanvasNode:
        return self.doc.node(nid)

    def kids(self, pid: str) -> list[str]:
        return self.doc._children.get(pid, [])

    def next_id(self) -> str:
        while True:
            self.doc.id_counter += 1
            nid = f"n{self.doc.id_counter}"
            if nid not in self.doc._nodes:
                return nid

    # writes
    def put(self, node: CanvasNode) -> None:
        self._save_node(node.id)
        self.doc._nodes[node.id] = node

    def set_props(self, nid: str, **props: Any) -> None:
        node = self.node(nid)
        new = node.with_props(**props)
        if new.props != node.props:
            self.put(new)

    def set_name(self, nid: str, name: str) -> None:
        node = self.node(nid)
        if node.name != name:
            self.put(replace(node, name=name))

    def _reindex(self, pid: str) -> None:
        for i, cid in enumerate(self.doc._children.get(pid, ())):
            child = self.doc._nodes[cid]
            if child.index != i or child.parent != pid:
                self.put(replace(child, index=i, parent=pid))

    def detach(self, nid: str) -> None:
        node = self.node(nid)
        pid = node.parent
        self._save_children(pid)
        self.doc._children[pid] = [c for c in self.doc._children[pid] if c != nid]
        self._reindex(pid)

    def attach(self, nid: str, pid: str, index: int | None = None) -> None:
        self._save_children(pid)
        kids = list(self.doc._children.get(pid, ()))
        if index is None or index > len(kids):
            index = len(kids)
        kids.insert(index, nid)
        self.doc._children[pid] = kids
        node = self.doc._nodes[nid]
        if node.parent != pid:
            self.put(replace(node, parent=pid))
        self._reindex(pid)

    def add(self, node: CanvasNode, index: int | None = None) -> None:
        self.put(replace(node, index=-1))
        self._save_children(node.id)
        self.doc._children[node.id] = []
        self.attach(node.id, node.parent, index)

    def remove(self, nid: str) -> None:
        self.node(nid)  # raises MissingNode
        self.detach(nid)
        for cid in self.doc.subtree(nid):
            self._save_node(cid)
            self._save_children(cid)
            self.doc._nodes.pop(cid, None)
            self.doc._children.pop(cid, None)


# -- tool specifications -----------------------------------------------------

@dataclass(frozen=True)
class ToolSpec:
    name: str
    category: str
    summary: str
    params: Mapping[str, tuple[Validator, bool]]
    handler: Callable[[_Tx, dict], Any]
    one_of: tuple[tuple[str, ...], ...] = ()
    any_of: tuple[str, ...] = ()
    writes: tuple[str, ...] = ()

    def validate(self, doc: CanvasDocument, params: Mapping[str, Any]) -> dict:
        unknown = set(params) - set(self.params)
        if unknown:
            raise InvalidParam(f"{self.name}: unknown parameter(s) {', '.join(sorted(unknown))}")
        out = {}
        for pname, (check, required) in self.params.items():
            if pname not in params or params[pname] is None:
                if required:
                    raise InvalidParam(f"{self.name}: missing required parameter {pname}")
                continue
            out[pname] = check(doc, pname, params[pname])
        for group in self.one_of:
            present = [g for g in group if g in out]
            if len(present) != 1:
                raise InvalidParam(f"{self.name}: exactly one of {', '.join(group)} is required")
        if self.any_of and not any(k in out for k in self.any_of):
            raise InvalidParam(f"{self.name}: at least one of {', '.join(self.any_of)} is required")
        return out


CATALOGUE: dict[str, ToolSpec] = {}


def tool(name: str, category: str, summary: str, params: Mapping[str, tuple[Validator, bool]], **kw: Any):
    def deco(fn: Callable[[_Tx, dict], Any]) -> Callable[[_Tx, dict], Any]:
        if name in CATALOGUE:
            raise ValueError(f"duplicate tool {name}")
        CATALOGUE[name] = ToolSpec(name, category, summary, params, fn, **kw)
        return fn

    return deco


REQ = True
OPT = False


# -- helpers -----------------------------------------------------------------

def _require_kind(node: CanvasNode, kinds: set[str] | frozenset[str], what: str) -> None:
    if node.kind not in kinds:
        raise InvalidParam(f"{what} requires one of {sorted(kinds)}, got {node.kind} {node.id!r}")


def _not_root(tx: _Tx, nid: str) -> CanvasNode:
    node = tx.node(nid)
    if node.parent is None:
        raise InvalidParam("the page root cannot be targeted by this tool")
    return node


def _is_auto_layout(node: CanvasNode | None) -> bool:
    return node is not None and node.props.get("layout_mode") in AUTO_LAYOUT_MODES


def measure_text(text: str, font_size: float, line_height: float | None = None) -> tuple[float, float]:
    """Nominal text box: each character is 0.6 em wide, lines are 1.2 em tall."""
    lines = text.split("\n") or [""]
    width = round(CHAR_WIDTH_EM * font_size * max(len(line) for line in lines), 4)
    lh = line_height if line_height is not None else LINE_HEIGHT_EM * font_size
    height = round(lh * len(lines), 4)
    return width, height


def _remeasure(tx: _Tx, nid: str) -> None:
    node = tx.node(nid)
    if node.kind != "text":
        return
    w, h = measure_text(node.props.get("text", ""), node.props.get("font_size", 16), node.props.get("line_height"))
    upd = {}
    if node.props.get("sizing_h", "hug") == "hug":
        upd["width"] = w
    if node.props.get("sizing_v", "hug") == "hug":
        upd["height"] = h
    if upd:
        tx.set_props(nid, **upd)


def _check_index(tx: _Tx, pid: str, index: int | None, extra: int = 0) -> None:
    if index is not None and index > len(tx.kids(pid)) + extra:
        raise InvalidParam(f"index {index} out of range for {pid!r} ({len(tx.kids(pid))} children)")


def _container(tx: _Tx, pid: str) -> CanvasNode:
    parent = tx.node(pid)
    _require_kind(parent, CONTAINER_KINDS - {"boolean-composite"}, "parent")
    return parent


def _check_same_parent(tx: _Tx, ids: tuple[str, ...]) -> str:
    parents = {_not_root(tx, i).parent for i in ids}
    if len(parents) != 1:
        raise InvalidParam("nodes must share the same parent")
    return parents.pop()


def _bbox(tx: _Tx, ids: tuple[str, ...]) -> dict:
    xs, ys, xe, ye = [], [], [], []
    for i in ids:
        p = tx.node(i).props
        x, y = p.get("x", 0), p.get("y", 0)
        xs.append(x)
        ys.append(y)
        xe.append(x + p.get("width", 0))
        ye.append(y + p.get("height", 0))
    x0, y0 = min(xs), min(ys)
    return {"x": x0, "y": y0, "width": max(xe) - x0, "height": max(ye) - y0}


# -- create tools ------------------------------------------------------------

CREATE_COMMON = {
    "parent_id": (v_node, OPT),
    "new_id": (v_new_id, OPT),
    "name": (v_name, OPT),
    "x": (v_num, OPT),
    "y": (v_num, OPT),
    "width": (v_pos, OPT),
    "height": (v_pos, OPT),
    "index": (v_index, OPT),
    "top_level": (v_bool, OPT),
}
SHAPE_STYLE = {"fill": (v_color, OPT), "opacity": (v_unit, OPT), "stroke_color": (v_color, OPT), "stroke_weight": (v_nonneg, OPT)}

DEFAULT_SHAPE_FILL = (0.85, 0.85, 0.85, 1)


def _create(tx: _Tx, p: dict, kind: str, default_name: str, props: dict) -> str:
    pid = p.get("parent_id")
    if pid is None:
        raise RootLevelCreate(f"create_{kind}: parent_id is required; elements are never created at the root")
    parent = _container(tx, pid)
    if parent.kind == "page" and not p.get("top_level", False):
        raise RootLevelCreate(f"create_{kind}: root-level creation needs top_level=true")
    index = p.get("index")
    _check_index(tx, pid, index)
    nid = p.get("new_id") or tx.next_id()
    base = {"x": p.get("x", 0), "y": p.get("y", 0), "width": p.get("width", 100), "height": p.get("height", 100)}
    if "stroke_color" in p or "stroke_weight" in p:
        props["stroke"] = {"align": "inside", "color": p.get("stroke_color", (0, 0, 0, 1)), "weight": p.get("stroke_weight", 1)}
    if "opacity" in p:
        props["opacity"] = p["opacity"]
    base.update(props)
    node = CanvasNode(nid, p.get("name", default_name), kind, pid, -1, {k: v for k, v in base.items() if v is not None})
    tx.add(node, index)
    return nid


@tool("create_rectangle", "create", "Create a new rectangular shape node with common styling properties.",
      {**CREATE_COMMON, **SHAPE_STYLE, "corner_radius": (v_radius, OPT)})
def _create_rectangle(tx: _Tx, p: dict) -> str:
    return _create(tx, p, "rectangle", "Rectangle", {"fill": p.get("fill", DEFAULT_SHAPE_FILL), "corner_radius": p.get("corner_radius")})


FRAME_PARAMS = {
    **CREATE_COMMON,
    **SHAPE_STYLE,
    "corner_radius": (v_radius, OPT),
    "layout_mode": (v_enum("horizontal", "vertical", "none"), OPT),
    "item_spacing": (v_num, OPT),
    "padding": (v_padding, OPT),
    "primary_align": (v_enum("min", "center", "max", "space_between"), OPT),
    "counter_align": (v_enum("min", "center", "max", "baseline"), OPT),
    "sizing_h": (v_enum("fixed", "hug", "fill"), OPT),
    "sizing_v": (v_enum("fixed", "hug", "fill"), OPT),
    "clips_content": (v_bool, OPT),
}


@tool("create_frame", "create", "Create a new frame container with auto-layout capabilities and layout properties.", FRAME_PARAMS)
def _create_frame(tx: _Tx, p: dict) -> str:
    mode = p.get("layout_mode", "none")
    for axis in ("sizing_h", "sizing_v"):
        if p.get(axis) == "hug" and mode not in AUTO_LAYOUT_MODES:
            raise InvalidParam(f"{axis}=hug requires an auto-layout frame")
    parent = tx.node(p["parent_id"]) if "parent_id" in p else None
    for axis in ("sizing_h", "sizing_v"):
        if p.get(axis) == "fill" and not _is_auto_layout(parent):
            raise InvalidParam(f"{axis}=fill requires an auto-layout parent")
    props = {
        "fill": p.get("fill", (1, 1, 1, 1)),
        "corner_radius": p.get("corner_radius"),
        "layout_mode": mode,
        "item_spacing": p.get("item_spacing", 0),
        "padding": p.get("padding", (0, 0, 0, 0)),
        "primary_align": p.get("primary_align", "min"),
        "counter_align": p.get("counter_align", "min"),
        "sizing_h": p.get("sizing_h", "fixed"),
        "sizing_v": p.get("sizing_v", "fixed"),
        "clips_content": p.get("clips_content", False),
    }
    return _create(tx, p, "frame", "Frame", props)


@tool("create_frame_from_node", "create", "Create a new frame that wraps an existing node.",
      {"node_id": (v_node, REQ), "new_id": (v_new_id, OPT), "name": (v_name, OPT)})
def _create_frame_from_node(tx: _Tx, p: dict) -> str:
    inner = _not_root(tx, p["node_id"])
    pid, index = inner.parent, inner.index
    parent = tx.node(pid)
    if parent.kind == "boolean-composite":
        raise InvalidParam("cannot wrap an operand of a boolean composite")
    fid = p.get("new_id") or tx.next_id()
    ip = inner.props
    frame = CanvasNode(
        fid,
        p.get("name", "Frame"),
        "frame",
        pid,
        -1,
        {
            "x": ip.get("x", 0),
            "y": ip.get("y", 0),
            "width": ip.get("width", 100),
            "height": ip.get("height", 100),
            "fill": (1, 1, 1, 0),
            "layout_mode": "none",
            "item_spacing": 0,
            "padding": (0, 0, 0, 0),
            "primary_align": "min",
            "counter_align": "min",
            "sizing_h": "fixed",
            "sizing_v": "fixed",
            "clips_content": False,
        },
    )
    tx.detach(inner.id)
    tx.add(frame, index)
    tx.attach(inner.id, fid, 0)
    tx.set_props(inner.id, x=0, y=0)
    return fid


@tool("create_text", "create", "Create a new text node with customizable content and typography options.",
      {**CREATE_COMMON, "text": (v_str, REQ), "font_size": (v_pos, OPT), "font_family": (v_name, OPT),
       "font_style": (v_name, OPT), "fill": (v_color, OPT), "text_align": (v_enum("left", "center", "right", "justified"), OPT)})
def _create_text(tx: _Tx, p: dict) -> str:
    fs = p.get("font_size", TEXT_DEFAULTS["font_size"])
    w, h = measure_text(p["text"], fs)
    props = {
        "text": p["text"],
        "font_size": fs,
        "font_family": p.get("font_family", TEXT_DEFAULTS["font_family"]),
        "font_style": p.get("font_style", TEXT_DEFAULTS["font_style"]),
        "text_align": p.get("text_align", TEXT_DEFAULTS["text_align"]),
        "fill": p.get("fill", (0, 0, 0, 1)),
        "sizing_h": "fixed" if "width" in p else "hug",
        "sizing_v": "fixed" if "height" in p else "hug",
    }
    q = dict(p)
    q.setdefault("width", w)
    q.setdefault("height", h)
    return _create(tx, q, "text", p["text"][:24] or "Text", props)


@tool("create_graphic", "create", "Create a new vector graphic node from SVG markup.",
      {**CREATE_COMMON, "svg": (v_str, REQ)})
def _create_graphic(tx: _Tx, p: dict) -> str:
    if "<svg" not in p["svg"]:
        raise InvalidParam("svg must contain an <svg> element")
    return _create(tx, p, "graphic", "Graphic", {"svg": p["svg"]})


@tool("create_ellipse", "create", "Create a new elliptical or circular shape node with customizable styling.",
      {**CREATE_COMMON, **SHAPE_STYLE})
def _create_ellipse(tx: _Tx, p: dict) -> str:
    return _create(tx, p, "ellipse", "Ellipse", {"fill": p.get("fill", DEFAULT_SHAPE_FILL)})


@tool("create_polygon", "create", "Create a new polygon shape with configurable number of sides.",
      {**CREATE_COMMON, **SHAPE_STYLE, "sides": (v_int_min(3), OPT)})
def _create_polygon(tx: _Tx, p: dict) -> str:
    return _create(tx, p, "polygon", "Polygon", {"fill": p.get("fill", DEFAULT_SHAPE_FILL), "sides": p.get("sides", 3)})


@tool("create_star", "create", "Create a new star shape with customizable points and styling.",
      {**CREATE_COMMON, **SHAPE_STYLE, "points": (v_int_min(3), OPT), "inner_radius": (v_unit, OPT)})
def _create_star(tx: _Tx, p: dict) -> str:
    return _create(
        tx, p, "star", "Star",
        {"fill": p.get("fill", DEFAULT_SHAPE_FILL), "points": p.get("points", 5), "inner_radius": p.get("inner_radius", 0.382)},
    )


@tool("create_line", "create", "Create a new line element between two points with stroke styling options.",
      {k: v for k, v in CREATE_COMMON.items() if k not in ("x", "y", "width", "height")}
      | {"start_x": (v_num, OPT), "start_y": (v_num, OPT), "end_x": (v_num, REQ), "end_y": (v_num, REQ),
         "stroke_color": (v_color, OPT), "stroke_weight": (v_nonneg, OPT)})
def _create_line(tx: _Tx, p: dict) -> str:
    sx, sy = p.get("start_x", 0), p.get("start_y", 0)
    ex, ey = p["end_x"], p["end_y"]
    if (sx, sy) == (ex, ey):
        raise InvalidParam("line endpoints must differ")
    q = dict(p)
    q.update(x=min(sx, ex), y=min(sy, ey))
    q["stroke_color"] = p.get("stroke_color", (0, 0, 0, 1))
    q["stroke_weight"] = p.get("stroke_weight", 1)
    props = {"points": ((sx, sy), (ex, ey)), "width": abs(ex - sx), "height": abs(ey - sy)}
    return _create(tx, q, "line", "Line", props)


# -- text tools --------------------------------------------------------------

def _text_node(tx: _Tx, nid: str) -> CanvasNode:
    node = tx.node(nid)
    _require_kind(node, {"text"}, "text tool")
    return node


@tool("set_text_content", "text", "Modify the text content of one or multiple text nodes.",
      {"node_id": (v_node, OPT), "text": (v_str, OPT), "updates": (v_text_updates, OPT)},
      one_of=(("node_id", "updates"),), writes=("text",))
def _set_text_content(tx: _Tx, p: dict) -> None:
    if "node_id" in p:
        if "text" not in p:
            raise InvalidParam("set_text_content: text is required with node_id")
        updates = ((p["node_id"], p["text"]),)
    else:
        if "text" in p:
            raise InvalidParam("set_text_content: use text inside updates")
        updates = p["updates"]
    for nid, _ in updates:
        _text_node(tx, nid)
    for nid, text in updates:
        tx.set_props(nid, text=text)
        _remeasure(tx, nid)


@tool("set_text_properties", "text", "Modify visual text properties such as font size, line height, letter spacing, and alignment.",
      {"node_id": (v_node, REQ), "font_size": (v_pos, OPT), "line_height": (v_pos, OPT), "letter_spacing": (v_num, OPT),
       "text_align": (v_enum("left", "center", "right", "justified"), OPT)},
      any_of=("font_size", "line_height", "letter_spacing", "text_align"),
      writes=("font_size", "line_height", "letter_spacing", "text_align"))
def _set_text_properties(tx: _Tx, p: dict) -> None:
    nid = p.pop("node_id")
    _text_node(tx, nid)
    tx.set_props(nid, **p)
    _remeasure(tx, nid)


@tool("set_text_decoration", "text", "Apply underline, strikethrough, and text case transformations.",
      {"node_id": (v_node, REQ), "decoration": (v_enum("none", "underline", "strikethrough"), OPT),
       "text_case": (v_enum("original", "upper", "lower", "title"), OPT)},
      any_of=("decoration", "text_case"), writes=("text_decoration", "text_case"))
def _set_text_decoration(tx: _Tx, p: dict) -> None:
    _text_node(tx, p["node_id"])
    upd = {}
    if "decoration" in p:
        upd["text_decoration"] = p["decoration"]
    if "text_case" in p:
        upd["text_case"] = p["text_case"]
    tx.set_props(p["node_id"], **upd)


@tool("set_text_font", "text", "Change the font family and style of a text node.",
      {"node_id": (v_node, REQ), "family": (v_name, REQ), "style": (v_name, OPT)}, writes=("font_family", "font_style"))
def _set_text_font(tx: _Tx, p: dict) -> None:
    _text_node(tx, p["node_id"])
    tx.set_props(p["node_id"], font_family=p["family"], font_style=p.get("style", "Regular"))


# -- operation tools ---------------------------------------------------------

@tool("move_node", "operation", "Move a node to a new position, optionally changing its parent container.",
      {"node_id": (v_node, REQ), "x": (v_num, REQ), "y": (v_num, REQ), "parent_id": (v_node, OPT)}, writes=("x", "y", "@slot"))
def _move_node(tx: _Tx, p: dict) -> None:
    node = _not_root(tx, p["node_id"])
    if _is_auto_layout(tx.node(node.parent)):
        raise MoveInsideAutoLayout(f"{node.id!r} sits in an auto-layout frame; use move_node_into_frame")
    pid = p.get("parent_id")
    if pid is not None and pid != node.parent:
        parent = _container(tx, pid)
        if _is_auto_layout(parent):
            raise MoveInsideAutoLayout(f"target {pid!r} is an auto-layout frame; use move_node_into_frame")
        if pid == node.id or tx.doc.is_descendant(pid, node.id):
            raise InvalidParam("cannot move a node into its own subtree")
        tx.detach(node.id)
        tx.attach(node.id, pid)
    tx.set_props(node.id, x=p["x"], y=p["y"])


@tool("move_node_into_frame", "operation", "Move a node into a target frame at an optional index position.",
      {"node_id": (v_node, REQ), "frame_id": (v_node, REQ), "index": (v_index, OPT)}, writes=("@slot",))
def _move_node_into_frame(tx: _Tx, p: dict) -> None:
    node = _not_root(tx, p["node_id"])
    fid = p["frame_id"]
    _container(tx, fid)
    if fid == node.id or tx.doc.is_descendant(fid, node.id):
        raise InvalidParam("cannot move a node into its own subtree")
    same = node.parent == fid
    _check_index(tx, fid, p.get("index"), extra=-1 if same else 0)
    tx.detach(node.id)
    tx.attach(node.id, fid, p.get("index"))


def _copy_subtree(tx: _Tx, src: str, pid: str, index: int | None, root_id: str | None, pos: dict) -> str:
    order = tx.doc.subtree(src)
    mapping = {}
    for i, old in enumerate(order):
        mapping[old] = root_id if (i == 0 and root_id) else tx.next_id()
    for i, old in enumerate(order):
        n = tx.node(old)
        props = dict(n.props)
        if n.kind == "boolean-composite" and "operands" in props:
            props["operands"] = tuple(mapping.get(o, o) for o in props["operands"])
        if i == 0:
            props.update(pos)
            tx.add(CanvasNode(mapping[old], n.name, n.kind, pid, -1, props), index)
        else:
            tx.add(CanvasNode(mapping[old], n.name, n.kind, mapping[n.parent], -1, props))
    return mapping[src]


@tool("clone_node", "operation", "Create a duplicate copy of an existing node, optionally in a different parent or position.",
      {"node_id": (v_node, REQ), "parent_id": (v_node, OPT), "index": (v_index, OPT), "x": (v_num, OPT), "y": (v_num, OPT),
       "new_id": (v_new_id, OPT)})
def _clone_node(tx: _Tx, p: dict) -> str:
    node = _not_root(tx, p["node_id"])
    pid = p.get("parent_id", node.parent)
    _container(tx, pid)
    index = p.get("index")
    if index is None and pid == node.parent:
        index = node.index + 1
    _check_index(tx, pid, index)
    pos = {k: p[k] for k in ("x", "y") if k in p}
    return _copy_subtree(tx, node.id, pid, index, p.get("new_id"), pos)


@tool("resize_node", "operation", "Change the width and height of a node while keeping its position.",
      {"node_id": (v_node, REQ), "width": (v_pos, REQ), "height": (v_pos, REQ)}, writes=("width", "height"))
def _resize_node(tx: _Tx, p: dict) -> None:
    node = _not_root(tx, p["node_id"])
    upd: dict[str, Any] = {"width": p["width"], "height": p["height"]}
    for axis in ("sizing_h", "sizing_v"):
        if node.props.get(axis) in ("hug", "fill"):
            upd[axis] = "fixed"
    tx.set_props(node.id, **upd)


@tool("delete_node", "operation", "Permanently remove one or more nodes from their parent.",
      {"node_id": (v_node, OPT), "node_ids": (v_nodes, OPT)}, one_of=(("node_id", "node_ids"),), writes=("@node",))
def _delete_node(tx: _Tx, p: dict) -> None:
    ids = (p["node_id"],) if "node_id" in p else p["node_ids"]
    for nid in ids:
        _not_root(tx, nid)
    for nid in ids:
        if nid in tx.doc:
            tx.remove(nid)


@tool("group_nodes", "operation", "Combine multiple elements into a single GROUP container.",
      {"node_ids": (v_nodes, REQ), "name": (v_name, OPT), "new_id": (v_new_id, OPT)})
def _group_nodes(tx: _Tx, p: dict) -> str:
    ids = p["node_ids"]
    pid = _check_same_parent(tx, ids)
    if tx.node(pid).kind == "boolean-composite":
        raise InvalidParam("cannot group operands of a boolean composite")
    ordered = sorted(ids, key=lambda i: tx.node(i).index)
    index = tx.node(ordered[0]).index
    gid = p.get("new_id") or tx.next_id()
    box = _bbox(tx, ids)
    for nid in ordered:
        tx.detach(nid)
    tx.add(CanvasNode(gid, p.get("name", "Group"), "group", pid, -1, box), index)
    for nid in ordered:
        tx.attach(nid, gid)
    return gid


@tool("ungroup_nodes", "operation", "Break apart a GROUP container into individual elements.", {"node_id": (v_node, REQ)})
def _ungroup_nodes(tx: _Tx, p: dict) -> tuple[str, ...]:
    group = _not_root(tx, p["node_id"])
    _require_kind(group, {"group"}, "ungroup_nodes")
    kids = list(tx.kids(group.id))
    pid, index = group.parent, group.index
    for cid in kids:
        tx.detach(cid)
    tx.remove(group.id)
    for offset, cid in enumerate(kids):
        tx.attach(cid, pid, index + offset)
    return tuple(kids)


@tool("rename_node", "operation", "Change the display name of a design element.",
      {"node_id": (v_node, REQ), "name": (v_name, REQ)}, writes=("name",))
def _rename_node(tx: _Tx, p: dict) -> None:
    tx.set_name(p["node_id"], p["name"])


@tool("rotate_node", "operation", "Apply a rotation transformation to a node.",
      {"node_id": (v_node, REQ), "angle": (v_num, REQ)}, writes=("rotation",))
def _rotate_node(tx: _Tx, p: dict) -> None:
    node = _not_root(tx, p["node_id"])
    angle = p["angle"] % 360
    tx.set_props(node.id, rotation=angle if angle else None)


@tool("boolean_nodes", "operation", "Combine vector shapes using UNION, SUBTRACT, INTERSECT or EXCLUDE.",
      {"node_ids": (v_nodes, REQ), "operation": (v_enum("UNION", "SUBTRACT", "INTERSECT", "EXCLUDE"), REQ),
       "name": (v_name, OPT), "new_id": (v_new_id, OPT)})
def _boolean_nodes(tx: _Tx, p: dict) -> str:
    ids = p["node_ids"]
    if len(ids) < 2:
        raise InvalidParam("boolean_nodes needs at least two operands")
    for nid in ids:
        _require_kind(tx.node(nid), SHAPE_KINDS, "boolean_nodes operand")
    pid = _check_same_parent(tx, ids)
    ordered = sorted(ids, key=lambda i: tx.node(i).index)
    index = tx.node(ordered[0]).index
    bid = p.get("new_id") or tx.next_id()
    props = _bbox(tx, ids)
    props.update(boolean_operation=p["operation"], operands=tuple(ordered), fill=tx.node(ordered[0]).props.get("fill", DEFAULT_SHAPE_FILL))
    for nid in ordered:
        tx.detach(nid)
    tx.add(CanvasNode(bid, p.get("name", p["operation"].title()), "boolean-composite", pid, -1, props), index)
    for nid in ordered:
        tx.attach(nid, bid)
    return bid


@tool("reorder_node", "operation", "Change the stacking order (z-index) of a node within its parent.",
      {"node_id": (v_node, REQ), "index": (v_index, OPT), "direction": (v_enum("front", "back", "forward", "backward"), OPT)},
      one_of=(("index", "direction"),), writes=("@slot",))
def _reorder_node(tx: _Tx, p: dict) -> None:
    node = _not_root(tx, p["node_id"])
    n = len(tx.kids(node.parent))
    if "index" in p:
        if p["index"] >= n:
            raise InvalidParam(f"index {p['index']} out of range ({n} siblings)")
        target = p["index"]
    else:
        target = {
            "front": n - 1,
            "back": 0,
            "forward": min(n - 1, node.index + 1),
            "backward": max(0, node.index - 1),
        }[p["direction"]]
    if target != node.index:
        tx.detach(node.id)
        tx.attach(node.id, node.parent, target)


# -- style tools -------------------------------------------------------------

PAINTABLE = frozenset({"frame", "rectangle", "ellipse", "polygon", "star", "line", "text", "graphic", "boolean-composite"})
ROUNDABLE = frozenset({"frame", "rectangle", "polygon", "star"})


@tool("set_fill_color", "style", "Set the solid fill color of a node using RGBA values.",
      {"node_id": (v_node, REQ), "color": (v_color, REQ)}, writes=("fill",))
def _set_fill_color(tx: _Tx, p: dict) -> None:
    _require_kind(tx.node(p["node_id"]), PAINTABLE, "set_fill_color")
    tx.set_props(p["node_id"], fill=p["color"])


@tool("set_corner_radius", "style", "Set corner radius values to create rounded corners.",
      {"node_id": (v_node, REQ), "radius": (v_radius, REQ)}, writes=("corner_radius",))
def _set_corner_radius(tx: _Tx, p: dict) -> None:
    _require_kind(tx.node(p["node_id"]), ROUNDABLE, "set_corner_radius")
    tx.set_props(p["node_id"], corner_radius=p["radius"])


@tool("get_styles", "style", "Retrieve all available text, color, and effect styles from the document.", {})
def _get_styles(tx: _Tx, p: dict) -> dict:
    return dict(tx.doc.styles)


@tool("set_opacity", "style", "Adjust the overall opacity of a node.",
      {"node_id": (v_node, REQ), "opacity": (v_unit, REQ)}, writes=("opacity",))
def _set_opacity(tx: _Tx, p: dict) -> None:
    _not_root(tx, p["node_id"])
    tx.set_props(p["node_id"], opacity=p["opacity"])


@tool("set_stroke", "style", "Add or modify a node's border color, thickness, and alignment.",
      {"node_id": (v_node, REQ), "color": (v_color, REQ), "weight": (v_nonneg, OPT),
       "align": (v_enum("inside", "outside", "center"), OPT)}, writes=("stroke",))
def _set_stroke(tx: _Tx, p: dict) -> None:
    _require_kind(tx.node(p["node_id"]), PAINTABLE, "set_stroke")
    tx.set_props(p["node_id"], stroke={"align": p.get("align", "inside"), "color": p["color"], "weight": p.get("weight", 1)})


@tool("set_fill_gradient", "style", "Apply linear, radial, angular or diamond gradient fills with color stops.",
      {"node_id": (v_node, REQ), "gradient_type": (v_enum("linear", "radial", "angular", "diamond"), REQ),
       "stops": (v_stops, REQ)}, writes=("gradient",))
def _set_fill_gradient(tx: _Tx, p: dict) -> None:
    _require_kind(tx.node(p["node_id"]), PAINTABLE, "set_fill_gradient")
    tx.set_props(p["node_id"], gradient={"stops": p["stops"], "type": p["gradient_type"]})


SHADOW_PARAMS = {
    "node_id": (v_node, REQ),
    "color": (v_color, OPT),
    "offset_x": (v_num, OPT),
    "offset_y": (v_num, OPT),
    "blur": (v_nonneg, OPT),
    "spread": (v_num, OPT),
}


def _shadow(p: dict) -> dict:
    return {
        "blur": p.get("blur", 4),
        "color": p.get("color", (0, 0, 0, 0.25)),
        "offset": (p.get("offset_x", 0), p.get("offset_y", 4)),
        "spread": p.get("spread", 0),
    }


@tool("set_drop_shadow", "style", "Add a drop shadow with configurable color, blur, offset, and spread.", SHADOW_PARAMS, writes=("drop_shadow",))
def _set_drop_shadow(tx: _Tx, p: dict) -> None:
    _require_kind(tx.node(p["node_id"]), PAINTABLE, "set_drop_shadow")
    tx.set_props(p["node_id"], drop_shadow=_shadow(p))


@tool("set_inner_shadow", "style", "Add an inner shadow effect inside a node's boundaries.", SHADOW_PARAMS, writes=("inner_shadow",))
def _set_inner_shadow(tx: _Tx, p: dict) -> None:
    _require_kind(tx.node(p["node_id"]), PAINTABLE, "set_inner_shadow")
    tx.set_props(p["node_id"], inner_shadow=_shadow(p))


@tool("copy_style", "style", "Copy visual style properties from one node to another.",
      {"source_id": (v_node, REQ), "target_id": (v_node, OPT), "target_ids": (v_nodes, OPT)},
      one_of=(("target_id", "target_ids"),), writes=STYLE_KEYS)
def _copy_style(tx: _Tx, p: dict) -> None:
    src = tx.node(p["source_id"])
    targets = (p["target_id"],) if "target_id" in p else p["target_ids"]
    for t in targets:
        _require_kind(tx.node(t), PAINTABLE, "copy_style target")
    style = {k: src.props[k] for k in STYLE_KEYS if k in src.props}
    if "corner_radius" in style:
        style_for = lambda node: style if node.kind in ROUNDABLE else {k: v for k, v in style.items() if k != "corner_radius"}  # noqa: E731
    else:
        style_for = lambda node: style  # noqa: E731
    for t in targets:
        upd = style_for(tx.node(t))
        if upd:
            tx.set_props(t, **upd)


# -- layout tools ------------------------------------------------------------

def _frame(tx: _Tx, nid: str, what: str) -> CanvasNode:
    node = tx.node(nid)
    _require_kind(node, {"frame"}, what)
    return node


@tool("set_padding", "layout", "Configure internal padding values for auto-layout frames.",
      {"node_id": (v_node, REQ), "top": (v_nonneg, OPT), "right": (v_nonneg, OPT), "bottom": (v_nonneg, OPT), "left": (v_nonneg, OPT)},
      any_of=("top", "right", "bottom", "left"), writes=("padding",))
def _set_padding(tx: _Tx, p: dict) -> None:
    node = _frame(tx, p["node_id"], "set_padding")
    cur = list(node.props.get("padding", (0, 0, 0, 0)))
    for i, side in enumerate(("top", "right", "bottom", "left")):
        if side in p:
            cur[i] = p[side]
    tx.set_props(node.id, padding=tuple(cur))


@tool("set_axis_align", "layout", "Configure primary and counter axis alignment in auto-layout frames.",
      {"node_id": (v_node, REQ), "primary": (v_enum("min", "center", "max", "space_between"), OPT),
       "counter": (v_enum("min", "center", "max", "baseline"), OPT)}, any_of=("primary", "counter"),
      writes=("primary_align", "counter_align"))
def _set_axis_align(tx: _Tx, p: dict) -> None:
    node = _frame(tx, p["node_id"], "set_axis_align")
    upd = {}
    if "primary" in p:
        upd["primary_align"] = p["primary"]
    if "counter" in p:
        upd["counter_align"] = p["counter"]
    tx.set_props(node.id, **upd)


@tool("set_layout_sizing", "layout", "Control horizontal and vertical resizing behavior (fixed, hug, fill).",
      {"node_id": (v_node, REQ), "horizontal": (v_enum("fixed", "hug", "fill"), OPT), "vertical": (v_enum("fixed", "hug", "fill"), OPT)},
      any_of=("horizontal", "vertical"), writes=("sizing_h", "sizing_v"))
def _set_layout_sizing(tx: _Tx, p: dict) -> None:
    node = _not_root(tx, p["node_id"])
    parent = tx.node(node.parent)
    upd = {}
    for key, axis in (("horizontal", "sizing_h"), ("vertical", "sizing_v")):
        if key not in p:
            continue
        mode = p[key]
        if mode == "hug" and not (node.kind == "text" or _is_auto_layout(node)):
            raise InvalidParam("hug sizing requires an auto-layout frame or a text node")
        if mode == "fill" and not _is_auto_layout(parent):
            raise InvalidParam("fill sizing requires an auto-layout parent")
        upd[axis] = mode
    tx.set_props(node.id, **upd)
    _remeasure(tx, node.id)


@tool("set_item_spacing", "layout", "Define spacing between child elements in auto-layout frames.",
      {"node_id": (v_node, REQ), "spacing": (v_num, REQ)}, writes=("item_spacing",))
def _set_item_spacing(tx: _Tx, p: dict) -> None:
    node = _frame(tx, p["node_id"], "set_item_spacing")
    tx.set_props(node.id, item_spacing=p["spacing"])


@tool("set_layout_mode", "layout", "Configure layout direction (horizontal, vertical, none) and wrapping for frames.",
      {"node_id": (v_node, REQ), "mode": (v_enum("horizontal", "vertical", "none"), REQ), "wrap": (v_bool, OPT)},
      writes=("layout_mode", "layout_wrap"))
def _set_layout_mode(tx: _Tx, p: dict) -> None:
    node = _frame(tx, p["node_id"], "set_layout_mode")
    upd: dict[str, Any] = {"layout_mode": p["mode"]}
    if "wrap" in p:
        upd["layout_wrap"] = p["wrap"] or None
    if p["mode"] not in AUTO_LAYOUT_MODES:
        for axis in ("sizing_h", "sizing_v"):
            if node.props.get(axis) == "hug":
                upd[axis] = "fixed"
    tx.set_props(node.id, **upd)


# -- entry point -------------------------------------------------------------

def apply_tool(doc: CanvasDocument, call: ToolCall) -> ToolResult:
    """Validate and execute ``call`` on ``doc``; raises a :class:`CanvasError` subclass on rejection."""
    spec = CATALOGUE.get(call.tool)
    if spec is None:
        raise UnknownTool(f"unknown tool {call.tool!r}")
    if call.actor not in ACTORS:
        raise InvalidParam(f"actor must be one of {ACTORS}")
    params = spec.validate(doc, call.params)
    tx = _Tx(doc)
    try:
        value = spec.handler(tx, params)
    except Exception:
        tx.rollback()
        raise
    changes = tx.changes()
    doc.revision += 1
    return ToolResult(call, changes, doc.revision, value)


def call_targets(call: ToolCall) -> set[tuple[str, str]]:
    """``(node_id, key)`` pairs a call writes on pre-existing nodes (used for non-interference checks)."""
    spec = CATALOGUE.get(call.tool)
    if spec is None:
        return set()
    p = call.params
    ids: list[str] = []
    if call.tool == "copy_style":
        ids = [p["target_id"]] if "target_id" in p else list(p.get("target_ids", ()))
    elif call.tool == "set_text_content" and "updates" in p:
        ids = [u["node_id"] if isinstance(u, Mapping) else u[0] for u in p["updates"]]
    elif "node_id" in p and spec.category != "create":
        ids = [p["node_id"]]
    elif "node_ids" in p and call.tool == "delete_node":
        ids = list(p["node_ids"])
    keys: tuple[str, ...] = spec.writes
    if call.tool in ("group_nodes", "boolean_nodes", "ungroup_nodes", "create_frame_from_node"):
        keys = ("@slot",)
        ids = list(p.get("node_ids", ())) or [p["node_id"]]
    return {(i, k) for i in ids for k in keys}
