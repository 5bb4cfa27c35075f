"""Hierarchical canvas document: nodes, immutable snapshots, canonical JSON."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Any, Iterable, Mapping

ROOT_ID = "page"

NODE_KINDS = (
    "frame",
    "group",
    "rectangle",
    "ellipse",
    "polygon",
    "star",
    "line",
    "text",
    "graphic",
    "boolean-composite",
)
# "page" is reserved for the document root.
ALL_KINDS = ("page",) + NODE_KINDS
CONTAINER_KINDS = frozenset({"page", "frame", "group", "boolean-composite"})
SHAPE_KINDS = frozenset({"rectangle", "ellipse", "polygon", "star", "line", "graphic", "boolean-composite"})
AUTO_LAYOUT_MODES = frozenset({"horizontal", "vertical"})


class CanvasError(Exception):
    """Base class for canvas operation failures."""

    code = "CanvasError"


class UnknownTool(CanvasError):
    code = "UnknownTool"


class MissingNode(CanvasError):
    code = "MissingNode"


class InvalidParam(CanvasError):
    code = "InvalidParam"


class RootLevelCreate(CanvasError):
    code = "RootLevelCreate"


class MoveInsideAutoLayout(CanvasError):
    code = "MoveInsideAutoLayout"


class LineageMismatch(CanvasError):
    code = "LineageMismatch"


def freeze(value: Any) -> Any:
    """Normalize a property value: lists become tuples, dict values are frozen recursively."""
    if isinstance(value, (list, tuple)):
        return tuple(freeze(v) for v in value)
    if isinstance(value, dict):
        return {k: freeze(v) for k, v in sorted(value.items())}
    return value


@dataclass(frozen=True)
class CanvasNode:
    """One design element. Instances are never mutated once stored in a document."""

    id: str
    name: str
    kind: str
    parent: str | None
    index: int
    props: Mapping[str, Any] = field(default_factory=dict)

    def prop(self, key: str, default: Any = None) -> Any:
        return self.props.get(key, default)

    def with_props(self, **updates: Any) -> "CanvasNode":
        props = dict(self.props)
        for k, v in updates.items():
            if v is None:
                props.pop(k, None)
            else:
                props[k] = v
        return replace(self, props=props)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "kind": self.kind,
            "parent": self.parent,
            "index": self.index,
            "props": dict(sorted(self.props.items())),
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "CanvasNode":
        return cls(
            id=data["id"],
            name=data["name"],
            kind=data["kind"],
            parent=data.get("parent"),
            index=int(data.get("index", 0)),
            props={k: freeze(v) for k, v in data.get("props", {}).items()},
        )


@dataclass(frozen=True)
class CanvasSnapshot:
    """Immutable view of a document at one revision; safe to share between threads."""

    lineage: str
    revision: int
    root: str
    nodes: Mapping[str, CanvasNode]
    styles: Mapping[str, Any] = field(default_factory=dict)
    id_counter: int = 0

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.nodes

    def get(self, node_id: str) -> CanvasNode | None:
        return self.nodes.get(node_id)

    def children(self, parent_id: str) -> list[CanvasNode]:
        kids = [n for n in self.nodes.values() if n.parent == parent_id]
        kids.sort(key=lambda n: (n.index, n.id))
        return kids

    def descendants(self, node_id: str) -> list[str]:
        by_parent: dict[str, list[str]] = {}
        for n in self.nodes.values():
            if n.parent is not None:
                by_parent.setdefault(n.parent, []).append(n.id)
        out: list[str] = []
        stack = list(by_parent.get(node_id, ()))
        while stack:
            nid = stack.pop()
            out.append(nid)
            stack.extend(by_parent.get(nid, ()))
        return sorted(out)

    def ancestors(self, node_id: str) -> list[str]:
        out = []
        seen = set()
        node = self.nodes.get(node_id)
        while node is not None and node.parent is not None and node.parent not in seen:
            seen.add(node.parent)
            out.append(node.parent)
            node = self.nodes.get(node.parent)
        return out

    def find(self, name: str, parent: str | None = None, kind: str | None = None) -> list[CanvasNode]:
        hits = [
            n
            for n in self.nodes.values()
            if n.name == name and (parent is None or n.parent == parent) and (kind is None or n.kind == kind)
        ]
        hits.sort(key=lambda n: (n.parent or "", n.index, n.id))
        return hits

    def to_json(self) -> dict:
        return {
            "lineage": self.lineage,
            "revision": self.revision,
            "root": self.root,
            "id_counter": self.id_counter,
            "styles": dict(sorted(self.styles.items())),
            "nodes": [self.nodes[k].to_json() for k in sorted(self.nodes)],
        }

    def canonical(self) -> str:
        return canonical_json(self.to_json())

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "CanvasSnapshot":
        nodes = {}
        for raw in data["nodes"]:
            node = CanvasNode.from_json(raw)
            nodes[node.id] = node
        return cls(
            lineage=data["lineage"],
            revision=int(data["revision"]),
            root=data["root"],
            nodes=MappingProxyType(nodes),
            styles=MappingProxyType({k: freeze(v) for k, v in data.get("styles", {}).items()}),
            id_counter=int(data.get("id_counter", 0)),
        )


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class CanvasDocument:
    """Mutable shared workspace. Mutations go through :func:`coact.canvas.tools.apply_tool`."""

    def __init__(
        self,
        lineage: str = "canvas",
        root_name: str = "Page 1",
        styles: Mapping[str, Any] | None = None,
    ) -> None:
        self.lineage = lineage
        self.root = ROOT_ID
        self.revision = 0
        self.id_counter = 0
        self.styles: dict[str, Any] = {k: freeze(v) for k, v in (styles or {}).items()}
        self._nodes: dict[str, CanvasNode] = {
            ROOT_ID: CanvasNode(id=ROOT_ID, name=root_name, kind="page", parent=None, index=0, props={})
        }
        self._children: dict[str, list[str]] = {ROOT_ID: []}

    # -- construction -----------------------------------------------------
    @classmethod
    def from_snapshot(cls, snap: CanvasSnapshot) -> "CanvasDocument":
        doc = cls.__new__(cls)
        doc.lineage = snap.lineage
        doc.root = snap.root
        doc.revision = snap.revision
        doc.id_counter = snap.id_counter
        doc.styles = dict(snap.styles)
        doc._nodes = dict(snap.nodes)
        doc._rebuild_children()
        return doc

    @classmethod
    def from_nodes(cls, nodes: Iterable[CanvasNode], root: str = ROOT_ID, lineage: str = "canvas") -> "CanvasDocument":
        """Build a document from raw nodes without checking invariants (see :func:`validate`)."""
        doc = cls.__new__(cls)
        doc.lineage = lineage
        doc.root = root
        doc.revision = 0
        doc.id_counter = 0
        doc.styles = {}
        doc._nodes = {n.id: n for n in nodes}
        doc._rebuild_children()
        return doc

    def _rebuild_children(self) -> None:
        children: dict[str, list[CanvasNode]] = {}
        for n in self._nodes.values():
            if n.parent is not None:
                children.setdefault(n.parent, []).append(n)
        self._children = {
            pid: [n.id for n in sorted(kids, key=lambda n: (n.index, n.id))] for pid, kids in children.items()
        }

    # -- read access ------------------------------------------------------
    def __contains__(self, node_id: str) -> bool:
        return node_id in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def get(self, node_id: str) -> CanvasNode | None:
        return self._nodes.get(node_id)

    def node(self, node_id: str) -> CanvasNode:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise MissingNode(f"node {node_id!r} does not exist") from None

    def child_ids(self, parent_id: str) -> list[str]:
        return list(self._children.get(parent_id, ()))

    def nodes(self) -> Mapping[str, CanvasNode]:
        return MappingProxyType(self._nodes)

    def snapshot(self) -> CanvasSnapshot:
        return CanvasSnapshot(
            lineage=self.lineage,
            revision=self.revision,
            root=self.root,
            nodes=MappingProxyType(dict(self._nodes)),
            styles=MappingProxyType(dict(self.styles)),
            id_counter=self.id_counter,
        )

    def canonical(self) -> str:
        return self.snapshot().canonical()

    def is_descendant(self, node_id: str, ancestor_id: str) -> bool:
        node = self._nodes.get(node_id)
        seen = set()
        while node is not None and node.parent is not None and node.id not in seen:
            seen.add(node.id)
            if node.parent == ancestor_id:
                return True
            node = self._nodes.get(node.parent)
        return False

    def subtree(self, node_id: str) -> list[str]:
        """Node id followed by all descendants, depth-first in child order."""
        out = []
        stack = [node_id]
        while stack:
            nid = stack.pop()
            out.append(nid)
            stack.extend(reversed(self._children.get(nid, ())))
        return out
