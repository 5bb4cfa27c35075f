"""Actor-attributed workspace events on a logical tick clock.

Every event consumes exactly one tick, so ``(tick, seq)`` is a total order and
agent act stages occupy contiguous tick spans that user events can land inside.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

from .canvas.changes import ChangeSet
from .canvas.tools import ToolCall

EVENT_KINDS = (
    "request",  # user sends a request; opens an agent-active segment
    "op",  # applied canvas operation
    "op-failed",  # rejected canvas operation (no revision change)
    "input",  # additional user input during a turn
    "abort",  # termination signal
    "focus",  # attention marker while observing
    "complete",  # agent finished the turn; closes the active segment
)
ACTORS = ("agent", "user")


@dataclass(frozen=True)
class ActionEvent:
    seq: int
    tick: int
    actor: str
    kind: str
    turn: int | None = None
    iteration: int | None = None
    call: ToolCall | None = None
    changes: ChangeSet | None = None
    revision: int | None = None
    text: str | None = None
    error: str | None = None
    tags: Mapping[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict:
        out: dict[str, Any] = {"seq": self.seq, "tick": self.tick, "actor": self.actor, "kind": self.kind}
        for key in ("turn", "iteration", "revision", "text", "error"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        if self.call is not None:
            out["call"] = self.call.to_json()
        if self.changes is not None:
            out["changes"] = self.changes.to_json()
        if self.tags:
            out["tags"] = dict(sorted(self.tags.items()))
        return out

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "ActionEvent":
        return cls(
            seq=int(data["seq"]),
            tick=int(data["tick"]),
            actor=data["actor"],
            kind=data["kind"],
            turn=data.get("turn"),
            iteration=data.get("iteration"),
            call=ToolCall.from_json(data["call"]) if "call" in data else None,
            changes=ChangeSet.from_json(data["changes"]) if "changes" in data else None,
            revision=data.get("revision"),
            text=data.get("text"),
            error=data.get("error"),
            tags=dict(data.get("tags", {})),
        )


@dataclass(frozen=True)
class LedgerEntry:
    """Ground truth for one canvas revision: who produced it and with which event."""

    revision: int
    actor: str
    seq: int


class Timeline:
    """Append-only event log plus the logical clock that stamps it."""

    def __init__(self, start_tick: int = 0) -> None:
        self.events: list[ActionEvent] = []
        self.ledger: list[LedgerEntry] = []
        self._tick = start_tick

    @property
    def tick(self) -> int:
        return self._tick

    def next_tick(self) -> int:
        t = self._tick
        self._tick += 1
        return t

    def emit(self, actor: str, kind: str, **fields: Any) -> ActionEvent:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        if actor not in ACTORS:
            raise ValueError(f"unknown actor {actor!r}")
        tick = fields.pop("tick", None)
        if tick is None:
            tick = self.next_tick()
        ev = ActionEvent(seq=len(self.events), tick=tick, actor=actor, kind=kind, **fields)
        self.events.append(ev)
        if kind == "op":
            self.ledger.append(LedgerEntry(ev.revision, actor, ev.seq))
        return ev
