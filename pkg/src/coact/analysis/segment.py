"""Split a session timeline into agent-active and idle segments, and into turns."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..events import ActionEvent
from ..session.log import CorruptLog, SessionLog


@dataclass(frozen=True)
class Segment:
    kind: str  # active | idle
    events: tuple[ActionEvent, ...]
    turn: int | None = None

    @property
    def seqs(self) -> range:
        return range(self.events[0].seq, self.events[-1].seq + 1) if self.events else range(0)


@dataclass(frozen=True)
class TurnSpan:
    """One turn: its request, everything up to completion or abort, and the idle work before it."""

    turn: int
    request: ActionEvent
    events: tuple[ActionEvent, ...]  # request .. end boundary inclusive
    end: ActionEvent  # completion, or the abort signal for terminated turns
    completion: ActionEvent
    idle_before: tuple[ActionEvent, ...] = ()
    record: dict = field(default_factory=dict)

    @property
    def terminated(self) -> bool:
        return self.end.kind == "abort"

    @property
    def user_events(self) -> tuple[ActionEvent, ...]:
        return tuple(e for e in self.events if e.actor == "user" and e.kind != "request")

    @property
    def iterations(self) -> int:
        if self.record.get("iterations") is not None:
            return len(self.record["iterations"])
        return max((e.iteration or 0 for e in self.events), default=0)


def segments(log: SessionLog) -> list[Segment]:
    """Active segments run request..complete; idle segments fill the gaps. Together they tile the log."""
    out: list[Segment] = []
    buf: list[ActionEvent] = []
    active: int | None = None
    for ev in log.events:
        if ev.kind == "request":
            if active is not None:
                raise CorruptLog(f"event {ev.seq}: request while turn {active} is still running")
            if buf:
                out.append(Segment("idle", tuple(buf)))
            buf, active = [ev], ev.turn
            continue
        buf.append(ev)
        if ev.kind == "complete":
            if active is None:
                raise CorruptLog(f"event {ev.seq}: completion outside a turn")
            out.append(Segment("active", tuple(buf), active))
            buf, active = [], None
    if active is not None:
        raise CorruptLog(f"turn {active} never completed")
    if buf:
        out.append(Segment("idle", tuple(buf)))
    return out


def segment_turns(log: SessionLog) -> list[TurnSpan]:
    """One :class:`TurnSpan` per request, in order; idle events attach to the following turn."""
    records = {t.get("turn"): t for t in log.turns}
    turns: list[TurnSpan] = []
    idle: tuple[ActionEvent, ...] = ()
    for seg in segments(log):
        if seg.kind == "idle":
            idle = seg.events
            continue
        req = seg.events[0]
        completion = seg.events[-1]
        if req.turn is None or completion.turn != req.turn:
            raise CorruptLog(f"turn boundaries disagree at event {req.seq}")
        abort = next((e for e in seg.events if e.kind == "abort"), None)
        end = abort or completion
        body = tuple(e for e in seg.events if e.seq <= end.seq)
        turns.append(TurnSpan(req.turn, req, body, end, completion, idle, records.get(req.turn, {})))
        idle = ()
    return turns
