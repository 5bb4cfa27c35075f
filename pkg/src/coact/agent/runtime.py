"""The turn loop: plan, then reason/act/attribute/update/feedback for up to 10 iterations.

User activity reaches the runtime through a :class:`UserEventStream`. The
runtime pulls from it at turn start, once inside every act window (after the
first half of the agent's batch has been applied) and at every iteration
boundary. Windows tile the timeline: iteration *i* observes from the end of
iteration *i-1*, so boundary events are attributed in the following window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Mapping, Protocol, Sequence

from ..canvas.changes import Atom, atoms
from ..canvas.model import CanvasDocument, CanvasError, CanvasSnapshot
from ..canvas.tools import ToolCall, ToolResult, apply_tool
from ..events import Timeline
from .attribution import Attribution, attribute_changes, detect_idle_changes
from .feedback import FeedbackDecision, evaluate_feedback
from .goals import Plan, Request, generate_plan, unmet, describe_unmet
from .planning import directed_atoms, update_plan
from .reasoner import Reasoner, ReferenceReasoner

MAX_ITERATIONS = 10
NO_PROGRESS_LIMIT = 2
STOP_REASONS = ("fulfilled", "terminated", "no-action", "no-progress", "max-iterations")


class TurnAlreadyActive(RuntimeError):
    pass


@dataclass(frozen=True)
class UserEvent:
    kind: str  # op | input | abort | focus
    call: ToolCall | None = None
    text: str | None = None
    tags: Mapping[str, Any] = field(default_factory=dict)


@dataclass
class StreamContext:
    phase: str  # turn-start | act | boundary
    turn: int
    iteration: int
    request: Request
    plan: Plan
    snapshot: CanvasSnapshot
    agent_created: tuple[str, ...] = ()
    agent_written: Mapping[Atom, Any] = field(default_factory=dict)
    iteration_written: Mapping[Atom, Any] = field(default_factory=dict)
    quality_violation: bool = False
    pending_calls: tuple[ToolCall, ...] = ()  # agent calls still queued in this act window


class UserEventStream(Protocol):
    def pull(self, ctx: StreamContext) -> Sequence[UserEvent]: ...


class NullStream:
    def pull(self, ctx: StreamContext) -> Sequence[UserEvent]:
        return ()


class ScriptedStream:
    """Replays fixed events keyed by ``(phase, iteration)``; handy in tests."""

    def __init__(self, script: Mapping[tuple[str, int], Sequence[UserEvent]] | None = None,
                 fn: Callable[[StreamContext], Sequence[UserEvent]] | None = None) -> None:
        self.script = dict(script or {})
        self.fn = fn
        self.contexts: list[StreamContext] = []

    def pull(self, ctx: StreamContext) -> Sequence[UserEvent]:
        self.contexts.append(ctx)
        out = list(self.script.pop((ctx.phase, ctx.iteration), ()))
        if self.fn is not None:
            out.extend(self.fn(ctx))
        return out


@dataclass
class IterationRecord:
    index: int
    calls: tuple[ToolCall, ...]
    failed: tuple[str, ...]
    attribution: Attribution
    feedback: FeedbackDecision
    plan_before: Plan
    plan_after: Plan
    message: str
    quality_violation: bool = False
    inputs: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "calls": [c.to_json() for c in self.calls],
            "failed": list(self.failed),
            "attribution": self.attribution.to_json(),
            "feedback": self.feedback.to_json(),
            "plan_before": self.plan_before.to_json(),
            "plan_after": self.plan_after.to_json(),
            "message": self.message,
            "quality_violation": self.quality_violation,
            "inputs": list(self.inputs),
        }


@dataclass
class TurnRecord:
    turn: int
    request: Request
    is_action_needed: bool
    idle_changes: str
    plan_initial: Plan
    plan_final: Plan
    iterations: list[IterationRecord]
    stop_reason: str
    message: str
    start_seq: int
    end_seq: int
    start_tick: int
    end_tick: int
    queued_input: tuple[str, ...] = ()

    @property
    def terminated(self) -> bool:
        return self.stop_reason == "terminated"

    def to_json(self) -> dict:
        return {
            "turn": self.turn,
            "request": self.request.to_json(),
            "is_action_needed": self.is_action_needed,
            "idle_changes": self.idle_changes,
            "plan_initial": self.plan_initial.to_json(),
            "plan_final": self.plan_final.to_json(),
            "iterations": [it.to_json() for it in self.iterations],
            "stop_reason": self.stop_reason,
            "message": self.message,
            "start_seq": self.start_seq,
            "end_seq": self.end_seq,
            "start_tick": self.start_tick,
            "end_tick": self.end_tick,
            "queued_input": list(self.queued_input),
        }


def _section_name(plan: Plan) -> str:
    if plan.goal and plan.goal[0].name:
        return f"'{plan.goal[0].name}'"
    if plan.referenced:
        return f"'{plan.referenced[0][1]}'"
    return "the canvas"


class AgentRuntime:
    """Executes turns against one document, one turn at a time."""

    def __init__(
        self,
        doc: CanvasDocument,
        timeline: Timeline | None = None,
        reasoner: Reasoner | None = None,
        batch_capacity: int | None = None,
        max_iterations: int = MAX_ITERATIONS,
        no_progress_limit: int = NO_PROGRESS_LIMIT,
    ) -> None:
        if not 1 <= max_iterations <= MAX_ITERATIONS:
            raise ValueError("max_iterations must be within 1..10")
        self.doc = doc
        self.timeline = timeline or Timeline()
        self.custom_reasoner = reasoner
        self.batch_capacity = batch_capacity
        self.max_iterations = max_iterations
        self.no_progress_limit = no_progress_limit
        self.turns = 0
        self._active = False
        self._last_snapshot = doc.snapshot()

    # -- event application ----------------------------------------------------
    def apply_op(self, call: ToolCall, actor: str = "user", tags: Mapping[str, Any] | None = None) -> ToolResult | None:
        """Apply an operation outside any turn (idle-period edits); failures are logged, not raised."""
        if self._active:
            raise TurnAlreadyActive("use the event stream while a turn is running")
        return self._apply(call, actor, None, None, dict(tags or {}))

    def _apply(self, call: ToolCall, actor: str, turn: int, iteration: int | None, tags: Mapping[str, Any]) -> ToolResult | None:
        tick = self.timeline.next_tick()
        call = replace(call, actor=actor, tick=tick)
        try:
            res = apply_tool(self.doc, call)
        except CanvasError as exc:
            self.timeline.emit(actor, "op-failed", tick=tick, turn=turn, iteration=iteration, call=call, error=f"{exc.code}: {exc}", tags=tags)
            return None
        self.timeline.emit(actor, "op", tick=tick, turn=turn, iteration=iteration, call=call, changes=res.changes, revision=res.revision, tags=tags)
        return res

    def _deliver(self, stream: UserEventStream, ctx: StreamContext, state: "_TurnState") -> None:
        for ev in stream.pull(ctx):
            tags = dict(ev.tags)
            if ev.kind == "op":
                self._apply(ev.call, "user", ctx.turn, ctx.iteration or None, tags)
            elif ev.kind == "input":
                self.timeline.emit("user", "input", turn=ctx.turn, iteration=ctx.iteration or None, text=ev.text, tags=tags)
                state.inputs.append(ev.text)
            elif ev.kind == "abort":
                self.timeline.emit("user", "abort", turn=ctx.turn, iteration=ctx.iteration or None, tags=tags)
                state.abort = True
            elif ev.kind == "focus":
                self.timeline.emit("user", "focus", turn=ctx.turn, iteration=ctx.iteration or None, tags=tags)
            else:
                raise ValueError(f"unknown user event kind {ev.kind!r}")

    # -- turn loop --------------------------------------------------------------
    def run_turn(
        self,
        request: Request | str,
        stream: UserEventStream | None = None,
        quality_iterations: Iterable[int] = (),
    ) -> TurnRecord:
        if self._active:
            raise TurnAlreadyActive("a turn is already running on this document")
        self._active = True
        try:
            return self._run_turn(Request(request) if isinstance(request, str) else request, stream or NullStream(), set(quality_iterations))
        finally:
            self._active = False

    def _run_turn(self, request: Request, stream: UserEventStream, quality: set[int]) -> TurnRecord:
        self.turns += 1
        turn = self.turns
        tl = self.timeline
        start = tl.emit("user", "request", turn=turn, text=request.text, tags={"selection": list(request.selection)} if request.selection else {})
        idle = detect_idle_changes(self._last_snapshot, self.doc.snapshot())
        state = _TurnState()
        snap = self.doc.snapshot()
        needed, plan = generate_plan(request, snap)
        plan_initial = plan
        reasoner = self.custom_reasoner or ReferenceReasoner(self.batch_capacity)
        protected: set[Atom] = getattr(reasoner, "protected", set())
        protected.clear()

        def ctx(phase: str, i: int, snapshot: CanvasSnapshot, qv: bool = False, pending: Sequence[ToolCall] = ()) -> StreamContext:
            return StreamContext(phase, turn, i, request, plan, snapshot, tuple(state.created), dict(state.written),
                                 dict(state.iter_written), qv, tuple(pending))

        self._deliver(stream, ctx("turn-start", 0, snap), state)

        iterations: list[IterationRecord] = []
        feedback: str | None = None
        empty_streak = 0
        stop = "max-iterations"
        before = self.doc.snapshot()
        for i in range(1, self.max_iterations + 1):
            plan_before = plan
            inputs = tuple(state.inputs)
            state.inputs.clear()
            if plan.status == "active":
                for text in inputs:
                    plan = update_plan(plan, None, text, before=before, after=before)
                    protected.difference_update(directed_atoms(plan, text, before))
            elif inputs:
                state.queued.extend(inputs)
            calls = list(reasoner(plan, feedback, before)) if plan.status == "active" else []
            qv = i in quality and len(calls) > 0
            if qv:
                calls = calls[: len(calls) // 2]  # a degraded batch drops its second half; one call stalls
            half = math.ceil(len(calls) / 2)
            results: list[ToolResult] = []
            failed: list[str] = []
            state.iter_written = {}
            for k, call in enumerate(calls):
                if k == half:
                    self._deliver(stream, ctx("act", i, self.doc.snapshot(), qv, calls[k:]), state)
                if state.abort:
                    break  # termination cancels the rest of the batch
                res = self._apply(call, "agent", turn, i, {})
                if res is None:
                    failed.append(call.tool)
                    continue
                results.append(res)
                state.note_agent(res)
            if half == len(calls):
                self._deliver(stream, ctx("act", i, self.doc.snapshot(), qv), state)
            after = self.doc.snapshot()
            att = attribute_changes([r.changes for r in results], before, after, iteration=i)
            protected.update(att.user_atoms(after))
            plan = update_plan(plan, att, None, before, after)
            fb = evaluate_feedback(plan, before, after, calls, failed)
            iterations.append(IterationRecord(
                index=i,
                calls=tuple(calls),
                failed=tuple(failed),
                attribution=att,
                feedback=fb,
                plan_before=plan_before,
                plan_after=plan,
                message=f"{len(results)} operations on {_section_name(plan)}",
                quality_violation=qv,
                inputs=inputs,
            ))
            feedback = fb.feedback
            empty_streak = 0 if att.agent else empty_streak + 1
            before = after
            if state.abort:
                stop = "terminated"
                break
            if state.inputs and plan.status == "active" and i < self.max_iterations:
                pass  # new input is incorporated next iteration
            elif not fb.is_action_needed:
                stop = "fulfilled" if needed or plan.goal else "no-action"
                break
            elif empty_streak >= self.no_progress_limit:
                stop = "no-progress"
                break
            elif i == self.max_iterations:
                break
            self._deliver(stream, ctx("boundary", i, after, qv), state)
            if state.abort:
                stop = "terminated"
                break

        state.queued.extend(state.inputs)
        if stop == "terminated":
            plan = replace(plan, status="terminated")
        elif stop in ("fulfilled", "no-action") and plan.status == "active":
            plan = replace(plan, status="fulfilled")
        message = self._final_message(stop, plan, iterations)
        end = tl.emit("agent", "complete", turn=turn, text=message, tags={"stop_reason": stop})
        self._last_snapshot = self.doc.snapshot()
        return TurnRecord(
            turn=turn,
            request=request,
            is_action_needed=needed,
            idle_changes=idle.user_summary,
            plan_initial=plan_initial,
            plan_final=plan,
            iterations=iterations,
            stop_reason=stop,
            message=message,
            start_seq=start.seq,
            end_seq=end.seq,
            start_tick=start.tick,
            end_tick=end.tick,
            queued_input=tuple(state.queued),
        )

    def _final_message(self, stop: str, plan: Plan, iterations: list[IterationRecord]) -> str:
        ops = sum(len(it.calls) - len(it.failed) for it in iterations)
        n = len(iterations)
        if stop == "no-action":
            return "No design change was needed."
        if stop == "fulfilled":
            return f"Done: {plan.text} ({ops} operations over {n} iterations)."
        if stop == "terminated":
            return f"Stopped at your request after {n} iterations ({ops} operations)."
        remaining = describe_unmet(plan, unmet(plan.goal, self.doc.snapshot()), self.doc.snapshot())
        why = "no further progress was possible" if stop == "no-progress" else "the iteration limit was reached"
        return f"Stopped because {why}. Remaining: {remaining or 'nothing'}."


@dataclass
class _TurnState:
    inputs: list[str] = field(default_factory=list)
    queued: list[str] = field(default_factory=list)
    abort: bool = False
    created: list[str] = field(default_factory=list)
    written: dict[Atom, Any] = field(default_factory=dict)
    iter_written: dict[Atom, Any] = field(default_factory=dict)

    def note_agent(self, res: ToolResult) -> None:
        self.created.extend(n.id for n in res.changes.created)
        a = atoms(res.changes)
        self.written.update(a)
        self.iter_written.update(a)
