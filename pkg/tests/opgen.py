"""Random tool-call generator used by the fuzz and property tests."""
from __future__ import annotations

import random

from coact.canvas.model import ROOT_ID, CanvasDocument
from coact.canvas.tools import ToolCall

CONTAINERS = ("frame", "group")
COLORS = ((1, 0, 0, 1), (0, 0.5, 1, 1), (0.2, 0.2, 0.2, 1), (1, 1, 1, 0.5))


def _pick(rng: random.Random, ids: list[str]) -> str | None:
    return rng.choice(ids) if ids else None


def random_call(doc: CanvasDocument, rng: random.Random, actor: str = "agent") -> ToolCall:
    """A plausible call against the current document. It may still be rejected, which is part of the test."""
    nodes = doc.nodes()
    non_root = sorted(n for n in nodes if n != ROOT_ID)
    frames = sorted(n for n, v in nodes.items() if v.kind == "frame")
    texts = sorted(n for n, v in nodes.items() if v.kind == "text")
    parent = _pick(rng, frames) or ROOT_ID
    top = parent == ROOT_ID
    kind = rng.choices(
        ["rect", "frame", "text", "ellipse", "move_into", "reorder", "fill", "opacity", "resize", "delete",
         "clone", "rename", "layout", "spacing", "padding", "text_content", "group", "ungroup", "rotate", "boolean", "move"],
        weights=[6, 3, 4, 2, 4, 3, 4, 2, 2, 1, 2, 1, 2, 2, 1, 2, 1, 1, 1, 1, 2],
    )[0]
    target = _pick(rng, non_root)
    size = {"width": rng.randint(10, 200), "height": rng.randint(10, 200)}
    if kind == "rect" or target is None:
        return ToolCall("create_rectangle", {"parent_id": parent, "top_level": top, "x": rng.randint(0, 300), "y": rng.randint(0, 300), **size,
                                             "fill": rng.choice(COLORS)}, actor)
    if kind == "frame":
        return ToolCall("create_frame", {"parent_id": parent, "top_level": top, **size,
                                         "layout_mode": rng.choice(("horizontal", "vertical", "none")), "item_spacing": rng.choice((0, 8, 16))}, actor)
    if kind == "text":
        return ToolCall("create_text", {"parent_id": parent, "top_level": top, "text": rng.choice(("Hi", "Pricing", "A longer label"))}, actor)
    if kind == "ellipse":
        return ToolCall("create_ellipse", {"parent_id": parent, "top_level": top, **size}, actor)
    if kind == "move_into" and frames:
        return ToolCall("move_node_into_frame", {"node_id": target, "frame_id": rng.choice(frames), "index": rng.randint(0, 3)}, actor)
    if kind == "reorder":
        if rng.random() < 0.5:
            return ToolCall("reorder_node", {"node_id": target, "index": rng.randint(0, 3)}, actor)
        return ToolCall("reorder_node", {"node_id": target, "direction": rng.choice(("front", "back", "forward", "backward"))}, actor)
    if kind == "fill":
        return ToolCall("set_fill_color", {"node_id": target, "color": rng.choice(COLORS)}, actor)
    if kind == "opacity":
        return ToolCall("set_opacity", {"node_id": target, "opacity": rng.choice((0.25, 0.5, 1.0))}, actor)
    if kind == "resize":
        return ToolCall("resize_node", {"node_id": target, **size}, actor)
    if kind == "delete":
        return ToolCall("delete_node", {"node_id": target}, actor)
    if kind == "clone":
        return ToolCall("clone_node", {"node_id": target, "parent_id": parent}, actor)
    if kind == "rename":
        return ToolCall("rename_node", {"node_id": target, "name": rng.choice(("A", "B", "Hero", "Card"))}, actor)
    if kind == "layout" and frames:
        return ToolCall("set_layout_mode", {"node_id": rng.choice(frames), "mode": rng.choice(("horizontal", "vertical", "none"))}, actor)
    if kind == "spacing" and frames:
        return ToolCall("set_item_spacing", {"node_id": rng.choice(frames), "spacing": rng.choice((4, 12, 24))}, actor)
    if kind == "padding" and frames:
        return ToolCall("set_padding", {"node_id": rng.choice(frames), "top": rng.choice((0, 8)), "left": rng.choice((0, 16))}, actor)
    if kind == "text_content" and texts:
        return ToolCall("set_text_content", {"node_id": rng.choice(texts), "text": rng.choice(("One", "Two words", ""))}, actor)
    if kind == "group":
        siblings = sorted(n for n in non_root if nodes[n].parent == nodes[target].parent)
        return ToolCall("group_nodes", {"node_ids": rng.sample(siblings, min(len(siblings), 2))}, actor)
    if kind == "ungroup":
        groups = sorted(n for n, v in nodes.items() if v.kind == "group")
        return ToolCall("ungroup_nodes", {"node_id": _pick(rng, groups) or target}, actor)
    if kind == "rotate":
        return ToolCall("rotate_node", {"node_id": target, "angle": rng.choice((0, 45, 90))}, actor)
    if kind == "boolean":
        siblings = sorted(n for n in non_root if nodes[n].parent == nodes[target].parent)
        return ToolCall("boolean_nodes", {"node_ids": rng.sample(siblings, min(len(siblings), 2)),
                                          "operation": rng.choice(("UNION", "SUBTRACT", "INTERSECT", "EXCLUDE"))}, actor)
    return ToolCall("move_node", {"node_id": target, "x": rng.randint(0, 400), "y": rng.randint(0, 400)}, actor)
