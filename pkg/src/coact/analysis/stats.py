"""Turn-level distribution statistics and tolerance checks against a reference."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

from ..usersim.taxonomy import CATEGORIES, LOOPS
from .annotate import TurnAnnotation, combination_label

if TYPE_CHECKING:
    from .reference import ReferenceStats


class EmptyCorpus(ValueError):
    pass


def _pct(n: int, total: int) -> float:
    return 100.0 * n / total


@dataclass(frozen=True)
class DistributionReport:
    total: int
    presence: dict[str, float]  # category -> % of turns containing it
    combinations: dict[str, int]  # combination label -> turn count
    loop_share: dict[str, float]  # loop label -> % of turns exhibiting it; empty for bare category sets

    def combination_pct(self, label: str) -> float:
        return _pct(self.combinations.get(label, 0), self.total)

    def ranked_combinations(self) -> list[tuple[str, int]]:
        return sorted(self.combinations.items(), key=lambda kv: (-kv[1], kv[0]))

    def to_json(self) -> dict:
        return {
            "total_turns": self.total,
            "presence_pct": {c: round(self.presence[c], 4) for c in CATEGORIES},
            "combinations": [
                {"combination": k, "count": v, "pct": round(self.combination_pct(k), 4)} for k, v in self.ranked_combinations()
            ],
            "loop_share_pct": {k: round(v, 4) for k, v in sorted(self.loop_share.items())},
        }


def distribution(turns: Iterable[TurnAnnotation | frozenset[str] | set[str]]) -> DistributionReport:
    """Presence %, exact-set combination counts, and loop shares over a corpus of turns.

    Accepts annotations or bare category sets (which carry no loop information).
    """
    cat_sets: list[frozenset[str]] = []
    loop_counts: Counter[str] = Counter()
    annotated = False
    for t in turns:
        if isinstance(t, TurnAnnotation):
            annotated = True
            cat_sets.append(t.categories)
            loop_counts.update(t.loops)
        else:
            cat_sets.append(frozenset(t))
    if not cat_sets:
        raise EmptyCorpus("distribution needs at least one turn")
    total = len(cat_sets)
    presence = {c: _pct(sum(c in s for s in cat_sets), total) for c in CATEGORIES}
    combos = Counter(combination_label(s) for s in cat_sets)
    loops = {k: _pct(loop_counts[k], total) for k in LOOPS} if annotated else {}
    return DistributionReport(total, presence, dict(combos), loops)


@dataclass(frozen=True)
class Verdict:
    statistic: str
    observed: float
    reference: float
    delta: float  # absolute, percentage points
    passed: bool

    def to_json(self) -> dict:
        return {"statistic": self.statistic, "observed": round(self.observed, 4), "reference": self.reference,
                "delta_pp": round(self.delta, 4), "passed": self.passed}


def compare(report: DistributionReport, reference: "ReferenceStats", tolerance: float, top_k: int = 4,
            include_loops: bool = True) -> list[Verdict]:
    """One verdict per category presence, per top-k reference combination, and for the observation-loop share."""
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    out = []

    def add(name: str, obs: float, ref: float) -> None:
        d = abs(obs - ref)
        # compare at the reference's two-decimal precision so a tolerance of 0 tolerates float noise
        out.append(Verdict(name, obs, ref, d, round(d, 2) <= tolerance))

    for c in CATEGORIES:
        add(f"presence:{c}", report.presence[c], reference.presence[c])
    for label, _count in reference.top_combinations(top_k):
        add(f"combination:{label}", report.combination_pct(label), reference.combination_pct(label))
    if include_loops and reference.loop_h_share is not None and report.loop_share:
        add("loop:h", report.loop_share.get("h", 0.0), reference.loop_h_share)
    return out


def all_pass(verdicts: Iterable[Verdict]) -> bool:
    return all(v.passed for v in verdicts)
