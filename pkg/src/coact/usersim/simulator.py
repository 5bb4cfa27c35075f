"""Simulated user: walks the decision flowchart and emits canvas events through the runtime's stream."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from ..agent.goals import Plan
from ..agent.runtime import StreamContext, TurnRecord, UserEvent
from ..canvas.model import CanvasSnapshot, freeze
from .decision import DecisionTrace, TraceStep, decide, derive_loops, entry_state, sample_factors, sample_trigger, select_code
from .policy import SimPolicy
from .realize import NoEligibleTarget, RealizeContext, USER_AREA, own_work, realize_actions
from .taxonomy import NO_INTERVENTION


def plan_misaligned(plan: Plan, intent: Mapping[str, Any]) -> bool:
    """True while the plan's primary requirement disagrees with the user's private intent."""
    if not intent or plan.status != "active" or not plan.goal:
        return False
    props = dict(plan.goal[0].props)
    return any(props.get(k) != v for k, v in intent.items())


@dataclass
class _Turn:
    trace: DecisionTrace
    mental_model: str = "has"
    level: float = 0.0
    state: str = "O"  # H, O, or done
    switched: bool = False
    steady: bool = False
    intent: Mapping[str, Any] = field(default_factory=dict)


class UserSimulator:
    """Stochastic user driven by a :class:`SimPolicy`.

    One instance lives for a whole session. ``begin_turn`` arms it with the
    turn's private intent, the runtime then calls :meth:`pull` at every
    observation point, and ``end_turn`` closes and returns the decision trace.
    """

    def __init__(self, policy: SimPolicy, seed: int | None = None, switch_pool: Sequence[str] = ()) -> None:
        self.policy = policy
        self.rng = random.Random(policy.seed if seed is None else seed)
        self.switch_pool = tuple(switch_pool)
        self.traces: list[DecisionTrace] = []
        self._counter = 0
        self._turn: _Turn | None = None
        self._intent: Mapping[str, Any] = {}

    # -- helpers ----------------------------------------------------------------
    def new_id(self) -> str:
        self._counter += 1
        return f"u{self._counter}"

    def _sample_level(self) -> float:
        p = self.policy
        u = self.rng.random()
        if u < p.p_much_more:
            return self.rng.uniform(p.theta_high, 1.0)
        if u < p.p_much_more + p.p_moderate:
            return self.rng.uniform(p.theta_low, p.theta_high)
        return self.rng.uniform(0.0, p.theta_low) if p.theta_low > 0 else 0.0

    def _enter(self, t: _Turn, resample: bool) -> None:
        """Points (a) and (b)."""
        if resample:
            t.mental_model = "has" if self.rng.random() < self.policy.p_mental_model else "none"
            t.level = self._sample_level()
        t.trace.add("a", t.mental_model)
        if t.mental_model == "has":
            band = self.policy.band(t.level)
            t.state = entry_state(t.mental_model, band)
            t.trace.add("b", t.state, importance=band)
        else:
            t.state = "O"

    # -- turn lifecycle -----------------------------------------------------------
    def begin_turn(self, intent: Mapping[str, Any] | None = None) -> None:
        self._intent = {k: freeze(v) for k, v in (intent or {}).items()}

    def pull(self, ctx: StreamContext) -> Sequence[UserEvent]:
        if ctx.phase == "turn-start":
            self._turn = _Turn(DecisionTrace(ctx.turn), intent=self._intent)
            self._turn.steady = self.rng.random() < self.policy.p_steady
            self._enter(self._turn, resample=True)
            return ()
        t = self._turn
        if t is None or t.state == "done":
            return ()
        if ctx.phase == "act":
            return self._act(t, ctx)
        if ctx.phase == "boundary":
            self._boundary(t)
        return ()

    def _act(self, t: _Turn, ctx: StreamContext) -> list[UserEvent]:
        rc = RealizeContext(ctx, self.new_id, t.intent, self.switch_pool)
        if t.state == "H":
            return own_work(rc, self.rng)
        events = realize_actions("observational-monitoring", rc, self.rng)
        trigger = sample_trigger(self.policy, self.rng, misaligned=plan_misaligned(ctx.plan, t.intent),
                                 quality_violation=ctx.quality_violation)
        if trigger is None:
            t.trace.add("c", "none")
            return events
        t.trace.add("c", trigger)
        # the attention marker records what the user noticed, even if they let it pass
        events = [UserEvent(e.kind, e.call, e.text, dict(e.tags, trigger=trigger)) for e in events]
        factors = sample_factors(self.policy, self.rng, t.mental_model, self.policy.band(t.level))
        category, step = decide(factors, trigger, self.policy, self.rng)
        if category == NO_INTERVENTION:
            t.trace.steps.append(step)
            return events
        tried: list[str] = []
        while True:
            code = select_code(category, trigger, factors, self.rng, self.policy, exclude=tried)
            if code is None:
                inputs = dict(step.inputs, why="no-target")
                t.trace.steps.append(TraceStep("d", NO_INTERVENTION, inputs))
                return events
            try:
                acted = realize_actions(code, rc, self.rng, trigger)
            except NoEligibleTarget:
                tried.append(code)
                continue
            break
        t.trace.steps.append(TraceStep("d", category, dict(step.inputs, code=code)))
        if category == "T":
            t.state = "done"
        if code == "switching-tasks":
            t.switched = True
        return events + acted

    def _boundary(self, t: _Turn) -> None:
        t.trace.add("e", "no")
        if t.switched:
            t.switched = False
            t.trace.add("f", "yes")
            self._enter(t, resample=True)
            return
        t.trace.add("f", "no")
        if not t.steady:
            t.level = max(0.0, t.level - self.policy.importance_decay)
            if t.level > 0 and self.rng.random() < self.policy.p_own_task_done:
                t.level = 0.0  # own work finished: nothing competes with the agent any more
        if t.mental_model == "has":
            band = self.policy.band(t.level)
            t.state = entry_state(t.mental_model, band)
            t.trace.add("b", t.state, importance=band)
        else:
            self._enter(t, resample=True)

    def end_turn(self, record: TurnRecord | None = None) -> DecisionTrace:
        t = self._turn
        if t is None:
            raise RuntimeError("end_turn called without an active turn")
        if not t.trace.ended:
            t.trace.add("e", "yes")
        t.trace.loops = derive_loops(t.trace.steps)
        self.traces.append(t.trace)
        self._turn = None
        return t.trace

    # -- between turns -------------------------------------------------------------
    def idle_events(self, snapshot: CanvasSnapshot) -> list[UserEvent]:
        """Own work done while no agent turn runs (seen by the next turn as idle changes)."""
        if USER_AREA not in snapshot.nodes or self.rng.random() >= self.policy.p_idle_edit:
            return []
        return [UserEvent(e.kind, e.call, e.text, {"idle": True}) for e in own_work(_IdleView(self.new_id), self.rng)]


@dataclass
class _IdleView:
    new_id: Any
