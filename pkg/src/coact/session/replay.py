"""Re-apply a log's operations and check them against what it recorded."""
from __future__ import annotations

from ..canvas.model import CanvasDocument, CanvasError, CanvasSnapshot
from ..canvas.tools import apply_tool
from .log import CorruptLog, SessionLog


def replay(log: SessionLog, verify: bool = True) -> CanvasSnapshot:
    """Final canvas obtained by replaying every applied op from the initial canvas.

    With ``verify`` the revision of each op, the ledger and the logged final
    canvas must all agree with the replay; any mismatch raises :class:`CorruptLog`.
    """
    try:
        doc = CanvasDocument.from_snapshot(log.initial_snapshot)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptLog(f"unreadable initial canvas: {exc}") from exc
    applied = []
    for ev in log.events:
        if ev.kind != "op":
            continue
        if ev.call is None:
            raise CorruptLog(f"event {ev.seq}: op without a call")
        try:
            res = apply_tool(doc, ev.call)
        except CanvasError as exc:
            raise CorruptLog(f"event {ev.seq}: {ev.call.tool} no longer applies ({exc})") from exc
        if verify and res.revision != ev.revision:
            raise CorruptLog(f"event {ev.seq}: replay reached revision {res.revision}, log says {ev.revision}")
        applied.append((res.revision, ev.actor, ev.seq))
    snap = doc.snapshot()
    if verify:
        if [(e.revision, e.actor, e.seq) for e in log.ledger] != applied:
            raise CorruptLog("ledger does not match the applied operations")
        if log.final_canvas is not None and snap.canonical() != CanvasSnapshot.from_json(log.final_canvas).canonical():
            raise CorruptLog("replayed canvas differs from the logged final canvas")
    return snap
