"""Structural deltas between canvas snapshots.

A :class:`ChangeSet` is the minimal description of how one snapshot turns into
another. For attribution it is further decomposed into *atoms*: one
``(node_id, key)`` pair per independently writable slot, where ``key`` is a
property name, ``"name"``, ``"@slot"`` (parent and child index) or ``"@node"``
(existence and kind).
"""
from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Any, Iterable, Iterator, Mapping

from .model import CanvasNode, CanvasSnapshot, LineageMismatch

NODE = "@node"
SLOT = "@slot"
NAME = "name"

Atom = tuple[str, str]


@dataclass(frozen=True)
class PropChange:
    node_id: str
    key: str
    before: Any
    after: Any

    def to_json(self) -> list:
        return [self.node_id, self.key, self.before, self.after]


@dataclass(frozen=True)
class Move:
    node_id: str
    before_parent: str | None
    before_index: int
    after_parent: str | None
    after_index: int

    def to_json(self) -> list:
        return [self.node_id, self.before_parent, self.before_index, self.after_parent, self.after_index]


@dataclass(frozen=True)
class ChangeSet:
    created: tuple[CanvasNode, ...] = ()
    deleted: tuple[str, ...] = ()
    modified: tuple[PropChange, ...] = ()
    moved: tuple[Move, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.created or self.deleted or self.modified or self.moved)

    def is_empty(self) -> bool:
        return not self

    def touched_nodes(self) -> set[str]:
        ids = {n.id for n in self.created} | set(self.deleted)
        ids.update(m.node_id for m in self.modified)
        ids.update(m.node_id for m in self.moved)
        return ids

    def to_json(self) -> dict:
        return {
            "created": [n.to_json() for n in self.created],
            "deleted": list(self.deleted),
            "modified": [m.to_json() for m in self.modified],
            "moved": [m.to_json() for m in self.moved],
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "ChangeSet":
        from .model import freeze

        return cls(
            created=tuple(CanvasNode.from_json(n) for n in data.get("created", ())),
            deleted=tuple(data.get("deleted", ())),
            modified=tuple(PropChange(m[0], m[1], freeze(m[2]), freeze(m[3])) for m in data.get("modified", ())),
            moved=tuple(Move(*m) for m in data.get("moved", ())),
        )

    def summary(self) -> str:
        if not self:
            return "None"
        parts = []
        for n in self.created:
            parts.append(f"created {n.kind} {n.id} ({n.name!r}) in {n.parent}")
        for nid in self.deleted:
            parts.append(f"deleted {nid}")
        for m in self.modified:
            parts.append(f"{m.node_id}.{m.key}: {m.before!r} -> {m.after!r}")
        for m in self.moved:
            parts.append(f"moved {m.node_id} to {m.after_parent}[{m.after_index}]")
        return "; ".join(parts)


EMPTY = ChangeSet()


def _node_fields(node: CanvasNode) -> Iterator[tuple[str, Any]]:
    yield NAME, node.name
    yield from node.props.items()


def diff_nodes(before: Mapping[str, CanvasNode], after: Mapping[str, CanvasNode], ids: Iterable[str] | None = None) -> ChangeSet:
    """Diff two node maps, optionally restricted to ``ids``."""
    if ids is None:
        ids = before.keys() | after.keys()
    created, deleted, modified, moved = [], [], [], []
    for nid in sorted(ids):
        a = before.get(nid)
        b = after.get(nid)
        if a is b:
            continue
        if a is None:
            created.append(b)
            continue
        if b is None:
            deleted.append(nid)
            continue
        if a.name != b.name:
            modified.append(PropChange(nid, NAME, a.name, b.name))
        if a.props is not b.props:
            for key in sorted(a.props.keys() | b.props.keys()):
                va = a.props.get(key)
                vb = b.props.get(key)
                if va != vb:
                    modified.append(PropChange(nid, key, va, vb))
        if a.parent != b.parent or a.index != b.index:
            moved.append(Move(nid, a.parent, a.index, b.parent, b.index))
    return ChangeSet(tuple(created), tuple(deleted), tuple(modified), tuple(moved))


def diff(before: CanvasSnapshot, after: CanvasSnapshot) -> ChangeSet:
    """Minimal, complete delta turning ``before`` into ``after``; ordered by node id then key."""
    if before.lineage != after.lineage:
        raise LineageMismatch(f"snapshots belong to different documents: {before.lineage!r} vs {after.lineage!r}")
    return diff_nodes(before.nodes, after.nodes)


def apply_changeset(snap: CanvasSnapshot, cs: ChangeSet, revision: int | None = None) -> CanvasSnapshot:
    """Apply ``cs`` to ``snap``. ``diff(a, b)`` applied to ``a`` yields ``b``'s node map."""
    nodes = dict(snap.nodes)
    for nid in cs.deleted:
        nodes.pop(nid, None)
    for node in cs.created:
        nodes[node.id] = node
    edits: dict[str, dict[str, Any]] = {}
    for m in cs.modified:
        edits.setdefault(m.node_id, {})[m.key] = m.after
    for m in cs.moved:
        edits.setdefault(m.node_id, {})[SLOT] = (m.after_parent, m.after_index)
    for nid, upd in edits.items():
        node = nodes[nid]
        props = dict(node.props)
        name, parent, index = node.name, node.parent, node.index
        for key, value in upd.items():
            if key == NAME:
                name = value
            elif key == SLOT:
                parent, index = value
            elif value is None:
                props.pop(key, None)
            else:
                props[key] = value
        nodes[nid] = CanvasNode(nid, name, node.kind, parent, index, props)
    return CanvasSnapshot(
        lineage=snap.lineage,
        revision=snap.revision if revision is None else revision,
        root=snap.root,
        nodes=MappingProxyType(nodes),
        styles=snap.styles,
        id_counter=snap.id_counter,
    )


# -- atoms ------------------------------------------------------------------

def atoms(cs: ChangeSet) -> dict[Atom, Any]:
    """Decompose a change set into ``(node, key) -> after value`` atoms."""
    out: dict[Atom, Any] = {}
    for n in cs.created:
        out[(n.id, NODE)] = n.kind
        out[(n.id, SLOT)] = (n.parent, n.index)
        for key, value in _node_fields(n):
            out[(n.id, key)] = value
    for nid in cs.deleted:
        out[(nid, NODE)] = None
    for m in cs.modified:
        out[(m.node_id, m.key)] = m.after
    for m in cs.moved:
        out[(m.node_id, SLOT)] = (m.after_parent, m.after_index)
    return out


def fold_atoms(changesets: Iterable[ChangeSet]) -> dict[Atom, Any]:
    """Net last-writer atoms over a sequence of change sets applied in order."""
    out: dict[Atom, Any] = {}
    for cs in changesets:
        cur = atoms(cs)
        for nid in cs.deleted:
            for key in [k for k in out if k[0] == nid]:
                del out[key]
        out.update(cur)
    return out


def atom_value(snap: CanvasSnapshot, atom: Atom) -> Any:
    nid, key = atom
    node = snap.nodes.get(nid)
    if node is None:
        return None
    if key == NODE:
        return node.kind
    if key == SLOT:
        return (node.parent, node.index)
    if key == NAME:
        return node.name
    return node.props.get(key)


def changeset_from_atoms(
    keys: Iterable[Atom],
    before: CanvasSnapshot,
    after: CanvasSnapshot,
    intended: Mapping[Atom, Any] | None = None,
) -> ChangeSet:
    """Rebuild a change set covering exactly ``keys``.

    ``intended`` overrides the after-value of atoms owned by *another* actor on
    nodes this side created; it lets a created node carry the value its creator
    wrote while the other actor's overwrite is listed separately.
    """
    keys = set(keys)
    intended = intended or {}
    by_node: dict[str, set[str]] = {}
    for nid, key in keys:
        by_node.setdefault(nid, set()).add(key)
    created, deleted, modified, moved = [], [], [], []
    for nid in sorted(by_node):
        ks = by_node[nid]
        a = before.nodes.get(nid)
        b = after.nodes.get(nid)
        if NODE in ks and a is None and b is not None:
            props = {}
            name = b.name
            parent, index = b.parent, b.index
            for key, value in _node_fields(b):
                if (nid, key) not in keys and (nid, key) in intended:
                    value = intended[(nid, key)]
                if key == NAME:
                    name = value
                elif value is not None:
                    props[key] = value
            if (nid, SLOT) not in keys and (nid, SLOT) in intended and intended[(nid, SLOT)] is not None:
                parent, index = intended[(nid, SLOT)]
            created.append(CanvasNode(nid, name, b.kind, parent, index, props))
            continue
        if NODE in ks and b is None:
            deleted.append(nid)
            continue
        for key in sorted(ks - {NODE, SLOT}):
            if a is None:
                va = intended.get((nid, key))
            else:
                va = a.name if key == NAME else a.props.get(key)
            vb = atom_value(after, (nid, key))
            if va != vb:
                modified.append(PropChange(nid, key, va, vb))
        if SLOT in ks and b is not None:
            if a is not None:
                bp, bi = a.parent, a.index
            else:
                bp, bi = intended.get((nid, SLOT)) or (None, -1)
            if (bp, bi) != (b.parent, b.index):
                moved.append(Move(nid, bp, bi, b.parent, b.index))
    return ChangeSet(tuple(created), tuple(deleted), tuple(modified), tuple(moved))
