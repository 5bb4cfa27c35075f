"""Per-iteration completion verdict."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from ..canvas.changes import diff
from ..canvas.model import CanvasSnapshot
from ..canvas.tools import ToolCall
from .goals import Plan, describe_unmet, unmet


@dataclass(frozen=True)
class FeedbackDecision:
    is_action_needed: bool
    feedback: str | None = None

    def to_json(self) -> dict:
        return {"is_action_needed": self.is_action_needed, "feedback": self.feedback}


def evaluate_feedback(
    plan: Plan,
    before: CanvasSnapshot,
    after: CanvasSnapshot,
    issued: Iterable[ToolCall],
    failed: Iterable[str] = (),
) -> FeedbackDecision:
    """Done iff every goal predicate holds on ``after``.

    Issued tools that left the canvas unchanged (or raised) are named in the
    feedback; otherwise it lists only the goal items still open.
    """
    issued = list(issued)
    failed = list(dict.fromkeys(failed))
    if issued and not diff(before, after):
        names = ", ".join(dict.fromkeys(c.tool for c in issued))
        return FeedbackDecision(True, f"Canvas unchanged after tool usage: {names}.")
    remaining = unmet(plan.goal, after) if plan.status == "active" else []
    if not remaining:
        return FeedbackDecision(False, None)
    parts = []
    if failed:
        parts.append(f"Failed tools: {', '.join(failed)}.")
    parts.append(f"Remaining: {describe_unmet(plan, remaining, after)}.")
    return FeedbackDecision(True, " ".join(parts))
