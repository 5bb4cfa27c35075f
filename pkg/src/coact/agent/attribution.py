"""Who changed what: splitting an observed window delta between agent and user."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable

from ..canvas.changes import (
    NODE,
    SLOT,
    Atom,
    ChangeSet,
    atom_value,
    atoms,
    changeset_from_atoms,
    diff,
    fold_atoms,
)
from ..canvas.model import CanvasSnapshot


@dataclass(frozen=True)
class Override:
    """An agent write that did not survive the window: the user overwrote it."""

    node_id: str
    key: str
    expected: Any
    actual: Any

    def to_json(self) -> list:
        return [self.node_id, self.key, self.expected, self.actual]


@dataclass(frozen=True)
class Attribution:
    agent: ChangeSet
    user: ChangeSet
    overrides: tuple[Override, ...] = ()
    iteration: int = 0
    agent_keys: frozenset[Atom] = field(default_factory=frozenset)
    user_keys: frozenset[Atom] = field(default_factory=frozenset)

    @property
    def agent_summary(self) -> str:
        return self.agent.summary()

    @property
    def user_summary(self) -> str:
        parts = [] if not self.user else [self.user.summary()]
        parts += [f"override {o.node_id}.{o.key}: expected {o.expected!r}, found {o.actual!r}" for o in self.overrides]
        return "; ".join(parts) if parts else "None"

    def user_atoms(self, after: CanvasSnapshot) -> dict[Atom, Any]:
        """User-written atoms including overrides, with their observed values."""
        out = {a: atom_value(after, a) for a in self.user_keys}
        for o in self.overrides:
            out[(o.node_id, o.key)] = o.actual
        return out

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration,
            "agent": self.agent.to_json(),
            "user": self.user.to_json(),
            "overrides": [o.to_json() for o in self.overrides],
            "agent_summary": self.agent_summary,
            "user_summary": self.user_summary,
        }


def attribute_changes(
    expected: Iterable[ChangeSet],
    before: CanvasSnapshot,
    after: CanvasSnapshot,
    iteration: int = 0,
) -> Attribution:
    """Partition ``diff(before, after)`` using the agent's own tool results.

    An observed atom belongs to the agent when the agent's net write to it
    matches the observed value; everything else observed is the user's. Agent
    writes that are absent from the final state become overrides.
    """
    observed = atoms(diff(before, after))
    exp = fold_atoms(expected)
    agent_keys = frozenset(a for a, v in observed.items() if a in exp and exp[a] == v)
    user_keys = frozenset(observed) - agent_keys
    overrides = []
    for a in sorted(exp):
        if a in observed or atom_value(after, a) == exp[a]:
            continue
        if a[0] not in after.nodes and a[1] != NODE and (a[0], NODE) in exp:
            continue  # one override for a removed node, not one per property
        overrides.append(Override(a[0], a[1], exp[a], atom_value(after, a)))
    return Attribution(
        agent=changeset_from_atoms(agent_keys, before, after, intended=exp),
        user=changeset_from_atoms(user_keys, before, after, intended=exp),
        overrides=tuple(overrides),
        iteration=iteration,
        agent_keys=agent_keys,
        user_keys=user_keys,
    )


def detect_idle_changes(prev: CanvasSnapshot, curr: CanvasSnapshot) -> Attribution:
    """Changes made while the agent was inactive belong wholly to the user."""
    if prev.revision > curr.revision:
        raise ValueError("prev snapshot is newer than curr")
    cs = diff(prev, curr)
    return Attribution(agent=ChangeSet(), user=cs, user_keys=frozenset(atoms(cs)))


def ground_truth(ops: Iterable[tuple[str, ChangeSet]], before: CanvasSnapshot, after: CanvasSnapshot) -> dict[Atom, str]:
    """Last-writer actor per observed atom, from a per-op actor ledger."""
    writer: dict[Atom, str] = {}
    for actor, cs in ops:
        for nid in cs.deleted:
            for key in [k for k in writer if k[0] == nid]:
                del writer[key]
        for a in atoms(cs):
            writer[a] = actor
    observed = atoms(diff(before, after))
    return {a: writer.get(a, "?") for a in observed}


def touched_child_counts(keys: Iterable[Atom], before: CanvasSnapshot, after: CanvasSnapshot) -> set[str]:
    """Parents whose child lists were altered by creations, deletions or moves in ``keys``."""
    out: set[str] = set()
    for nid, key in keys:
        if key not in (NODE, SLOT):
            continue
        a, b = before.nodes.get(nid), after.nodes.get(nid)
        if key == SLOT and a is not None and b is not None and a.parent == b.parent:
            continue  # reorder within the same parent keeps the count
        for node in (a, b):
            if node is not None and node.parent is not None:
                out.add(node.parent)
    return out


__all__ = [
    "Attribution",
    "Override",
    "attribute_changes",
    "detect_idle_changes",
    "ground_truth",
    "touched_child_counts",
]
