"""Decision points of the co-creation flowchart, traces, and edge-by-edge validation.

Points: (a) mental model? (b) own task more important? (c) trigger?
(d) enabling factors -> C/D/T/no intervention, (e) agent finished?
(f) agent task changed? Loops: g full delegation (H back to b), h continuous
observation (O without trigger back to b), i intervention (C/D/no intervention
back to b), j task redirection (f = yes back to a).
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .policy import SimPolicy
from .taxonomy import (
    ALIGNED_EXPECTATION,
    CATEGORIES,
    CODES_BY_CATEGORY,
    EXPECTATION,
    MODALITY,
    NO_INTERVENTION,
    TRIGGER_ALLOWED,
    TRIGGER_PRIORITY,
    EnablingFactors,
    check_pair,
)

POINTS = ("a", "b", "c", "d", "e", "f")
START = "start"
END = "end"


@dataclass(frozen=True)
class TraceStep:
    point: str
    outcome: str
    inputs: Mapping[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict:
        out: dict[str, Any] = {"point": self.point, "outcome": self.outcome}
        if self.inputs:
            out["inputs"] = dict(sorted(self.inputs.items()))
        return out

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "TraceStep":
        return cls(data["point"], data["outcome"], dict(data.get("inputs", {})))


@dataclass
class DecisionTrace:
    turn: int
    steps: list[TraceStep] = field(default_factory=list)
    loops: list[str] = field(default_factory=list)  # in order of occurrence

    def add(self, point: str, outcome: str, **inputs: Any) -> TraceStep:
        step = TraceStep(point, outcome, inputs)
        self.steps.append(step)
        return step

    @property
    def loop_set(self) -> frozenset[str]:
        return frozenset(self.loops)

    @property
    def ended(self) -> bool:
        return bool(self.steps) and (
            (self.steps[-1].point == "e" and self.steps[-1].outcome == "yes")
            or (self.steps[-1].point == "d" and self.steps[-1].outcome == "T")
        )

    def to_json(self) -> dict:
        return {"turn": self.turn, "steps": [s.to_json() for s in self.steps], "loops": list(self.loops)}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "DecisionTrace":
        return cls(int(data["turn"]), [TraceStep.from_json(s) for s in data.get("steps", ())], list(data.get("loops", ())))


# -- reference transition table -------------------------------------------------

TRIGGER_OUTCOMES = frozenset(TRIGGER_ALLOWED) | {"none"}


def _next_points(point: str, outcome: str) -> frozenset[str]:
    if point == START:
        return frozenset({"a"})
    if point == "a":
        return frozenset({"b"}) if outcome == "has" else frozenset({"c"})
    if point == "b":
        return frozenset({"e"}) if outcome == "H" else frozenset({"c"})
    if point == "c":
        return frozenset({"e"}) if outcome == "none" else frozenset({"d"})
    if point == "d":
        return frozenset({END}) if outcome == "T" else frozenset({"e"})
    if point == "e":
        return frozenset({END}) if outcome == "yes" else frozenset({"f"})
    if point == "f":
        return frozenset({"a"}) if outcome == "yes" else frozenset({"a", "b"})
    return frozenset()


VALID_OUTCOMES = {
    "a": frozenset({"has", "none"}),
    "b": frozenset({"H", "O"}),
    "c": TRIGGER_OUTCOMES,
    "d": frozenset({"C", "D", "T", NO_INTERVENTION}),
    "e": frozenset({"yes", "no"}),
    "f": frozenset({"yes", "no"}),
}


class TraceError(ValueError):
    pass


def derive_loops(steps: Iterable[TraceStep]) -> list[str]:
    """Loop labels implied by a step sequence (one per return through e/f)."""
    out = []
    mode = None  # what the user did since the last return: H, O, or an intervention outcome
    for s in steps:
        if s.point == "b":
            mode = s.outcome
        elif s.point == "a" and s.outcome == "none":
            mode = "O"
        elif s.point == "d":
            mode = s.outcome
        elif s.point == "f":
            if s.outcome == "yes":
                out.append("j")
            elif mode == "H":
                out.append("g")
            elif mode == "O":
                out.append("h")
            elif mode in ("C", "D", NO_INTERVENTION):
                out.append("i")
            mode = None
    return out


def validate_trace(trace: DecisionTrace) -> None:
    """Raise :class:`TraceError` unless every transition is a flowchart edge.

    Also checks that a trace whose mental model is absent never intervenes,
    that ``f = no`` returns to ``a`` only without a mental model, and that the
    recorded loop labels are exactly those the transitions imply.
    """
    prev_point, prev_outcome = START, ""
    has_model: bool | None = None
    last_trigger = None
    for idx, s in enumerate(trace.steps):
        if s.point not in VALID_OUTCOMES or s.outcome not in VALID_OUTCOMES[s.point]:
            raise TraceError(f"step {idx}: invalid outcome {s.outcome!r} at point {s.point!r}")
        allowed = _next_points(prev_point, prev_outcome)
        if s.point not in allowed:
            raise TraceError(f"step {idx}: {prev_point}={prev_outcome} cannot lead to {s.point}")
        if prev_point == "f" and prev_outcome == "no" and s.point == "a" and has_model:
            raise TraceError(f"step {idx}: with a mental model, f=no returns to b")
        if prev_point == "f" and prev_outcome == "no" and s.point == "b" and not has_model:
            raise TraceError(f"step {idx}: without a mental model, f=no returns to a")
        if s.point == "a":
            has_model = s.outcome == "has"
        if s.point == "c":
            last_trigger = None if s.outcome == "none" else s.outcome
        if s.point == "d" and s.outcome in ("C", "D", "T"):
            trig = s.inputs.get("trigger", last_trigger)
            if trig is not None and s.outcome not in TRIGGER_ALLOWED[trig]:
                raise TraceError(f"step {idx}: trigger {trig} cannot lead to {s.outcome}")
            if not has_model:
                raise TraceError(f"step {idx}: intervention without a mental model")
            factors = s.inputs.get("factors")
            if factors is not None and s.outcome not in EnablingFactors(**factors).compatible():
                raise TraceError(f"step {idx}: factors {factors} incompatible with {s.outcome}")
        prev_point, prev_outcome = s.point, s.outcome
    if trace.steps and END not in _next_points(prev_point, prev_outcome):
        raise TraceError(f"trace ends at {prev_point}={prev_outcome}, which is not a terminal edge")
    if derive_loops(trace.steps) != list(trace.loops):
        raise TraceError(f"loop labels {trace.loops} do not match transitions {derive_loops(trace.steps)}")


# -- stochastic decisions --------------------------------------------------------

def sample_trigger(policy: SimPolicy, rng: random.Random, *, misaligned: bool = False, quality_violation: bool = False) -> str | None:
    """At most one trigger per boundary.

    A single uniform draw walks the eligible triggers in priority order,
    so each fires with its own hazard unless the hazards sum past 1, in which
    case lower-priority ones are crowded out. Misalignment needs a plan that
    diverges from the user's intent, quality drop a degraded batch.
    """
    u = rng.random()
    acc = 0.0
    for t in TRIGGER_PRIORITY:
        if t == "misaligned-interpretation" and not misaligned:
            continue
        if t == "quality-drop" and not quality_violation:
            continue
        acc += policy.hazard(t)
        if u < acc:
            return t
    return None


def sample_factors(policy: SimPolicy, rng: random.Random, mental_model: str, importance: str) -> EnablingFactors:
    weights = policy.modality.get(importance, {})
    ws = [max(0.0, float(weights.get(m, 0.0))) for m in MODALITY]
    modality = rng.choices(MODALITY, weights=ws)[0] if sum(ws) > 0 else MODALITY[2]
    aligned = ALIGNED_EXPECTATION[modality]
    if rng.random() < policy.expectation_alignment:
        expectation = aligned
    else:
        expectation = rng.choice([e for e in EXPECTATION if e != aligned])
    return EnablingFactors(mental_model, importance, modality, expectation)


def decide(factors: EnablingFactors, trigger: str | None, policy: SimPolicy, rng: random.Random) -> tuple[str, TraceStep]:
    """Category chosen at point (d) for an observing user, or the (c) outcome when no trigger fired.

    Returns ``(next state, trace step)`` where next state is one of C/D/T, the
    no-intervention marker, or O when no trigger fired.
    """
    if trigger is None:
        return "O", TraceStep("c", "none")
    allowed = TRIGGER_ALLOWED[trigger] & factors.compatible()
    if not allowed:
        return NO_INTERVENTION, TraceStep("d", NO_INTERVENTION, {"trigger": trigger, "factors": factors.to_json(), "why": "incompatible"})
    if factors.importance == "moderate" and rng.random() < policy.p_no_intervention:
        return NO_INTERVENTION, TraceStep("d", NO_INTERVENTION, {"trigger": trigger, "factors": factors.to_json(), "why": "burdensome"})
    cat = sorted(allowed, key=CATEGORIES.index)[0] if len(allowed) == 1 else rng.choice(sorted(allowed, key=CATEGORIES.index))
    return cat, TraceStep("d", cat, {"trigger": trigger, "factors": factors.to_json()})


def entry_state(mental_model: str, band: str) -> str:
    """Points (a) and (b): without a mental model the user observes; otherwise importance decides."""
    if mental_model == "none":
        return "O"
    return "H" if band == "much-more" else "O"


CODE_WEIGHTS: dict[tuple[str, str], dict[str, float]] = {
    ("idea-spark", "C"): {c: 1.0 for c in CODES_BY_CATEGORY["C"]},
    ("early-outcome-visibility", "C"): {"intermediate-result-appropriation": 1.0, "artifact-takeover": 1.0},
    ("fine-grained-detailing", "C"): {"in-situ-co-editing": 1.0, "demonstration-based-steering": 1.0},
    ("misaligned-interpretation", "C"): {"demonstration-based-steering": 2.0, "in-situ-co-editing": 1.0},
    ("misaligned-interpretation", "D"): {"instruction-based-steering": 1.0},
    ("quality-drop", "C"): {"opportunistic-takeover": 1.0, "in-situ-co-editing": 1.0, "demonstration-based-steering": 1.0},
    ("quality-drop", "D"): {"instruction-based-steering": 1.0},
    ("emerging-new-task", "D"): {"switching-tasks": 1.0},
}


def code_weights(category: str, trigger: str, policy: SimPolicy | None = None) -> dict[str, float]:
    check_pair(trigger, category)
    if category == "T":
        return {"execution-termination": 1.0}
    base = CODE_WEIGHTS[(trigger, category)]
    mult = policy.code_weights if policy is not None else {}
    return {c: w * float(mult.get(c, 1.0)) for c, w in base.items() if w * float(mult.get(c, 1.0)) > 0}


def select_code(category: str, trigger: str, factors: EnablingFactors | None, rng: random.Random, policy: SimPolicy | None = None,
                exclude: Iterable[str] = ()) -> str | None:
    """Draw a code of ``category`` with trigger-informed weights (``None`` once all are excluded)."""
    weights = {c: w for c, w in code_weights(category, trigger, policy).items() if c not in set(exclude)}
    if not weights:
        return None
    codes = sorted(weights)
    return rng.choices(codes, weights=[weights[c] for c in codes])[0]
