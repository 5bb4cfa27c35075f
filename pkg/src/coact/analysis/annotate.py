"""Turn annotation: which action categories, codes, triggers and loops a turn exhibits.

Two coders are provided. The rule-based coder reads only canvas operations and
signals (where they land, what they touch, whether the agent wrote it first).
The tag coder reads the ground-truth labels the simulator attaches to its own
events. On simulated logs the two should agree; disagreements are reported
with their cause.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..canvas.changes import atoms
from ..events import ActionEvent, LedgerEntry
from ..session.log import SessionLog
from ..usersim.decision import DecisionTrace
from ..usersim.taxonomy import CATEGORIES, CODES, LOOPS
from .segment import TurnSpan, segment_turns

USER_AREA = "user_area"
SWITCH_PREFIX = "new task:"
INTERVENTION_CATEGORIES = frozenset("CDT")


class LedgerGap(ValueError):
    """The ledger does not account for every canvas revision in a turn."""


@dataclass(frozen=True)
class TurnAnnotation:
    turn: int
    categories: frozenset[str]
    codes: frozenset[str] = frozenset()
    loops: frozenset[str] = frozenset()
    triggers: frozenset[str] = frozenset()
    confidence: str = "rules"  # rules | tags | inferred
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.categories or not self.categories <= set(CATEGORIES):
            raise ValueError(f"turn {self.turn}: categories must be a non-empty subset of {CATEGORIES}")
        if not self.loops <= set(LOOPS):
            raise ValueError(f"turn {self.turn}: unknown loop labels {sorted(self.loops - set(LOOPS))}")
        projected = {CODES[c] for c in self.codes}
        if not projected <= self.categories or not self.categories - projected <= {"H", "O"}:
            raise ValueError(f"turn {self.turn}: categories {sorted(self.categories)} do not follow from codes")

    @property
    def combination(self) -> str:
        return combination_label(self.categories)

    def to_json(self) -> dict:
        return {
            "turn": self.turn,
            "categories": sorted(self.categories, key=CATEGORIES.index),
            "codes": sorted(self.codes),
            "loops": sorted(self.loops),
            "triggers": sorted(self.triggers),
            "confidence": self.confidence,
            "notes": list(self.notes),
        }


COMBINATION_ORDER = ("O", "C", "D", "H", "T")


def combination_label(categories: Iterable[str]) -> str:
    cats = set(categories)
    return "+".join(f"({c})" for c in COMBINATION_ORDER if c in cats)


# -- ledger coverage ---------------------------------------------------------------

def check_ledger(turn: TurnSpan, ledger: Sequence[LedgerEntry]) -> None:
    by_seq = {e.seq: e for e in ledger}
    for ev in turn.events:
        if ev.kind != "op":
            continue
        entry = by_seq.get(ev.seq)
        if entry is None or entry.revision != ev.revision or entry.actor != ev.actor:
            raise LedgerGap(f"turn {turn.turn}: no ledger entry for op event {ev.seq} (revision {ev.revision})")


def check_ledger_contiguous(ledger: Sequence[LedgerEntry]) -> None:
    revs = [e.revision for e in ledger]
    for a, b in zip(revs, revs[1:]):
        if b != a + 1:
            raise LedgerGap(f"ledger jumps from revision {a} to {b}")


# -- user-area tracking --------------------------------------------------------------

class AreaTracker:
    """Follows which nodes live inside the user's own work area as ops stream by."""

    def __init__(self, members: Iterable[str] = (USER_AREA,)) -> None:
        self.members = set(members)

    @classmethod
    def from_canvas(cls, canvas: dict) -> "AreaTracker":
        parents = {n["id"]: n.get("parent") for n in canvas.get("nodes", ())}
        members = {USER_AREA}
        changed = True
        while changed:
            changed = False
            for nid, pid in parents.items():
                if pid in members and nid not in members:
                    members.add(nid)
                    changed = True
        return cls(members)

    def __contains__(self, nid: object) -> bool:
        return nid in self.members

    def observe(self, ev: ActionEvent) -> None:
        if ev.kind != "op" or ev.changes is None:
            return
        pending = list(ev.changes.created)
        grew = True
        while grew:  # a created subtree may list children before their parent
            grew = False
            for node in pending:
                if node.parent in self.members and node.id not in self.members:
                    self.members.add(node.id)
                    grew = True
        for mv in ev.changes.moved:
            if mv.after_parent in self.members:
                self.members.add(mv.node_id)
            else:
                self.members.discard(mv.node_id)
        for nid in ev.changes.deleted:
            self.members.discard(nid)


# -- rule-based coder ------------------------------------------------------------------

def _window_loop(events: Sequence[ActionEvent], codes: dict[int, str]) -> str:
    """Loop label for the return that follows an act window, judged from what the user did in it."""
    window_codes = {codes[e.seq] for e in events if e.seq in codes}
    if "switching-tasks" in window_codes:
        return "j"
    if any(CODES[c] in INTERVENTION_CATEGORIES for c in window_codes):
        return "i"
    if any(e.kind == "focus" and e.tags.get("trigger") for e in events):
        return "i"  # something was noticed but deliberately let pass
    if any(e.kind == "focus" for e in events):
        return "h"
    return "g"


def rule_codes(turn: TurnSpan, area: AreaTracker) -> dict[int, str]:
    """Action code per user event (by sequence number), from operations and signals alone."""
    out: dict[int, str] = {}
    agent_written: set = set()
    clone_roots: dict[str, int] = {}  # node in a cloned subtree -> seq of the clone event
    user_made: set[str] = set()
    for ev in turn.events:
        if ev.actor == "agent":
            if ev.kind == "op" and ev.changes is not None:
                agent_written.update(atoms(ev.changes))
            area.observe(ev)
            continue
        if ev.kind == "focus":
            out[ev.seq] = "observational-monitoring"
        elif ev.kind == "abort":
            out[ev.seq] = "execution-termination"
        elif ev.kind == "input":
            text = (ev.text or "").strip().lower()
            out[ev.seq] = "switching-tasks" if text.startswith(SWITCH_PREFIX) else "instruction-based-steering"
        elif ev.kind == "op" and ev.changes is not None:
            cs = ev.changes
            created = cs.created
            ids = {n.id for n in created}
            root = next((n for n in created if n.parent not in ids), None)
            if ev.call is not None and ev.call.tool == "clone_node" and root is not None:
                if root.parent in area:
                    out[ev.seq] = "intermediate-result-appropriation"
                    clone_roots.update((n.id, ev.seq) for n in created)
                else:
                    out[ev.seq] = "opportunistic-takeover"
                    user_made.update(n.id for n in created)
            elif root is not None:
                if root.parent in area:
                    out[ev.seq] = "full-delegation"
                else:
                    out[ev.seq] = "opportunistic-takeover"
                    user_made.update(n.id for n in created)
            else:
                touched = cs.touched_nodes()
                cloned = sorted({clone_roots[n] for n in touched if n in clone_roots})
                if cloned:
                    out[ev.seq] = "artifact-takeover"
                    for seq in cloned:
                        out[seq] = "artifact-takeover"
                elif touched & user_made:
                    out[ev.seq] = "opportunistic-takeover"
                elif set(atoms(cs)) & agent_written:
                    out[ev.seq] = "demonstration-based-steering"
                elif touched and all(n in area for n in touched):
                    out[ev.seq] = "full-delegation"
                else:
                    out[ev.seq] = "in-situ-co-editing"
        area.observe(ev)
    return out


def _loops(turn: TurnSpan, codes: dict[int, str]) -> frozenset[str]:
    n = turn.iterations
    loops = set()
    for i in range(1, n):
        window = [e for e in turn.user_events if e.iteration == i]
        loops.add(_window_loop(window, codes))
    return frozenset(loops)


def annotate_turn(turn: TurnSpan, ledger: Sequence[LedgerEntry], area: AreaTracker | None = None) -> TurnAnnotation:
    """Rule-based annotation of one turn.

    H when the user created their own work in their area or paid no attention
    to the agent at all; O when attention markers are present; C/D/T from the
    operations and signals the user sent while the agent was active.
    """
    check_ledger(turn, ledger)
    area = area if area is not None else AreaTracker()
    codes = rule_codes(turn, area)
    code_set = frozenset(codes.values())
    cats = {CODES[c] for c in code_set}
    focus = any(e.kind == "focus" for e in turn.user_events)
    if not focus:
        cats.add("H")
    triggers = frozenset(e.tags["trigger"] for e in turn.user_events if e.tags.get("trigger"))
    tagged = any(e.tags.get("code") for e in turn.user_events)
    notes = () if tagged or focus else ("hands-off inferred from absent attention markers",)
    return TurnAnnotation(
        turn=turn.turn,
        categories=frozenset(cats),
        codes=code_set,
        loops=_loops(turn, codes),
        triggers=triggers,
        confidence="rules" if tagged or focus else "inferred",
        notes=notes,
    )


def tag_annotation(turn: TurnSpan, trace: DecisionTrace | None = None) -> TurnAnnotation:
    """Ground truth from the simulator's own labels (and its decision trace for loops)."""
    codes = frozenset(e.tags["code"] for e in turn.user_events if e.tags.get("code"))
    cats = {CODES[c] for c in codes} or {"H"}
    return TurnAnnotation(
        turn=turn.turn,
        categories=frozenset(cats),
        codes=codes,
        loops=trace.loop_set if trace is not None else frozenset(),
        triggers=frozenset(e.tags["trigger"] for e in turn.user_events if e.tags.get("trigger")),
        confidence="tags",
    )


def annotate_log(log: SessionLog) -> list[TurnAnnotation]:
    check_ledger_contiguous(log.ledger)
    area = AreaTracker.from_canvas(log.initial_canvas)
    out = []
    for turn in segment_turns(log):
        for ev in turn.idle_before:
            area.observe(ev)
        out.append(annotate_turn(turn, log.ledger, area))
    return out


@dataclass
class Agreement:
    turns: int = 0
    agreed: int = 0
    disagreements: list[dict] = field(default_factory=list)

    @property
    def rate(self) -> float:
        return self.agreed / self.turns if self.turns else 1.0


def agreement(logs: Iterable[SessionLog]) -> Agreement:
    """Compare rule-based annotations with ground-truth tags turn by turn."""
    result = Agreement()
    for log in logs:
        traces = {t.turn: t for t in log.traces}
        ruled = annotate_log(log)
        for turn, ann in zip(segment_turns(log), ruled):
            truth = tag_annotation(turn, traces.get(turn.turn))
            result.turns += 1
            causes = []
            if ann.categories != truth.categories:
                causes.append(f"categories {sorted(ann.categories)} vs {sorted(truth.categories)}")
            if ann.codes != truth.codes:
                causes.append(f"codes {sorted(ann.codes ^ truth.codes)} differ")
            if traces and ann.loops != truth.loops:
                causes.append(f"loops {sorted(ann.loops)} vs {sorted(truth.loops)}")
            if causes:
                result.disagreements.append({"seed": log.seed, "turn": turn.turn, "causes": causes})
            else:
                result.agreed += 1
    return result
