"""Structural invariant checks and auto-layout geometry."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .model import AUTO_LAYOUT_MODES, CanvasNode, CanvasSnapshot

VIOLATION_CODES = ("CycleDetected", "IndexCollision", "IndexGap", "MissingParent", "OrphanNode", "RootInvalid")


@dataclass(frozen=True)
class Violation:
    code: str
    node_id: str
    detail: str

    def __str__(self) -> str:
        return f"{self.code}({self.node_id}): {self.detail}"


def _nodes(obj) -> tuple[Mapping[str, CanvasNode], str]:
    if isinstance(obj, CanvasSnapshot):
        return obj.nodes, obj.root
    return obj.nodes(), obj.root


def validate(obj) -> list[Violation]:
    """Return every invariant violation in a snapshot or document (empty list means valid).

    Checked: a single parentless root, parents exist, no parent cycles, every
    node reachable from the root, and sibling indices form 0..n-1 exactly.
    """
    nodes, root = _nodes(obj)
    out: list[Violation] = []
    rnode = nodes.get(root)
    if rnode is None or rnode.parent is not None:
        out.append(Violation("RootInvalid", root, "root missing or has a parent"))
    for n in nodes.values():
        if n.id != root and n.parent is None:
            out.append(Violation("OrphanNode", n.id, "non-root node without a parent"))
        elif n.parent is not None and n.parent not in nodes:
            out.append(Violation("MissingParent", n.id, f"parent {n.parent!r} does not exist"))

    cyclic: set[str] = set()
    for start in nodes:
        seen = []
        cur = nodes.get(start)
        while cur is not None and cur.parent is not None:
            if cur.id in seen:
                cyc = seen[seen.index(cur.id):]
                if not cyclic.intersection(cyc):
                    out.append(Violation("CycleDetected", min(cyc), " -> ".join(cyc)))
                cyclic.update(cyc)
                break
            seen.append(cur.id)
            cur = nodes.get(cur.parent)

    by_parent: dict[str, list[CanvasNode]] = {}
    for n in nodes.values():
        if n.parent is not None:
            by_parent.setdefault(n.parent, []).append(n)
    for pid, kids in sorted(by_parent.items()):
        idx: dict[int, str] = {}
        for k in sorted(kids, key=lambda n: n.id):
            if k.index in idx:
                out.append(Violation("IndexCollision", k.id, f"shares index {k.index} with {idx[k.index]!r} under {pid!r}"))
            else:
                idx[k.index] = k.id
        expected = set(range(len(kids)))
        if set(idx) != expected and len(idx) == len(kids):
            out.append(Violation("IndexGap", pid, f"child indices {sorted(idx)} are not 0..{len(kids) - 1}"))

    reachable = {root}
    stack = [root]
    while stack:
        for k in by_parent.get(stack.pop(), ()):
            if k.id not in reachable:
                reachable.add(k.id)
                stack.append(k.id)
    for nid in sorted(nodes):
        if nid not in reachable and nid not in cyclic and nodes[nid].parent in nodes:
            out.append(Violation("OrphanNode", nid, "not reachable from the root"))
    return out


def layout_positions(snap: CanvasSnapshot, frame_id: str) -> dict[str, tuple[float, float]]:
    """Rendered top-left position of each child of ``frame_id``.

    Auto-layout frames place children in index order along the primary axis,
    starting at the leading padding and separated by ``item_spacing``; other
    containers use the stored ``x``/``y``.
    """
    frame = snap.nodes[frame_id]
    kids = snap.children(frame_id)
    mode = frame.props.get("layout_mode")
    if mode not in AUTO_LAYOUT_MODES:
        return {k.id: (k.props.get("x", 0), k.props.get("y", 0)) for k in kids}
    top, right, bottom, left = frame.props.get("padding", (0, 0, 0, 0))
    gap = frame.props.get("item_spacing", 0)
    out = {}
    cursor = left if mode == "horizontal" else top
    for k in kids:
        if mode == "horizontal":
            out[k.id] = (cursor, top)
            cursor += k.props.get("width", 0) + gap
        else:
            out[k.id] = (left, cursor)
            cursor += k.props.get("height", 0) + gap
    return out


def render_order(snap: CanvasSnapshot, frame_id: str) -> list[str]:
    """Children sorted by rendered position along the frame's primary axis (left-to-right / top-to-bottom)."""
    frame = snap.nodes[frame_id]
    pos = layout_positions(snap, frame_id)
    axis = 1 if frame.props.get("layout_mode") == "vertical" else 0
    return sorted(pos, key=lambda nid: (pos[nid][axis], snap.nodes[nid].index))
