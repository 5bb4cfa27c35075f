"""Fit simulator policies to reference statistics by random search followed by coordinate descent."""
from __future__ import annotations

import copy
import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from ..session.config import BatchSpec
from ..session.orchestrator import run_batch
from ..usersim.policy import PolicyError, SimPolicy
from ..usersim.taxonomy import CATEGORIES
from .annotate import annotate_log
from .reference import ReferenceStats
from .stats import DistributionReport, distribution


class SearchSpaceEmpty(ValueError):
    pass


# Dotted policy paths and their search ranges.
DEFAULT_SPACE: dict[str, tuple[float, float]] = {
    "p_mental_model": (0.5, 1.0),
    "p_much_more": (0.3, 0.9),
    "p_moderate": (0.0, 0.6),
    "importance_decay": (0.0, 0.5),
    "p_steady": (0.0, 0.9),
    "p_own_task_done": (0.0, 0.6),
    "theta_high": (0.4, 0.9),
    "theta_low": (0.05, 0.4),
    "p_no_intervention": (0.0, 0.8),
    "expectation_alignment": (0.5, 1.0),
    "hazards.idea-spark": (0.0, 0.5),
    "hazards.early-outcome-visibility": (0.0, 0.5),
    "hazards.fine-grained-detailing": (0.0, 0.5),
    "hazards.misaligned-interpretation": (0.0, 1.0),
    "hazards.quality-drop": (0.0, 1.0),
    "hazards.emerging-new-task": (0.0, 0.6),
    "modality.moderate.verbal": (0.0, 3.0),
    "modality.moderate.uncertain": (0.0, 1.0),
    "modality.no-user-task.direct": (0.0, 3.0),
    "modality.no-user-task.uncertain": (0.0, 1.0),
}


def set_path(policy: SimPolicy, values: Mapping[str, float]) -> SimPolicy:
    """Copy of ``policy`` with dotted-path parameters replaced; raises PolicyError if invalid."""
    data = copy.deepcopy(policy.to_dict())
    for path, value in values.items():
        parts = path.split(".")
        node: Any = data
        for p in parts[:-1]:
            if p not in node:
                raise PolicyError(f"unknown parameter path {path!r}")
            node = node[p]
        if parts[-1] not in node:
            raise PolicyError(f"unknown parameter path {path!r}")
        node[parts[-1]] = float(value)
    return SimPolicy.from_dict(data)


def get_path(policy: SimPolicy, path: str) -> float:
    node: Any = policy.to_dict()
    for p in path.split("."):
        node = node[p]
    return float(node)


@dataclass(frozen=True)
class FitScore:
    distance: float
    presence_l1: float
    combination_l1: float
    loop_delta: float
    report: DistributionReport

    def to_json(self) -> dict:
        return {"distance": round(self.distance, 4), "presence_l1": round(self.presence_l1, 4),
                "combination_l1": round(self.combination_l1, 4), "loop_delta": round(self.loop_delta, 4)}


def score(report: DistributionReport, reference: ReferenceStats, top_k: int = 4, loop_weight: float = 1.0) -> FitScore:
    """L1 over category presence, plus L1 over the reference's top-k combinations, plus the loop-h gap."""
    presence = sum(abs(report.presence[c] - reference.presence[c]) for c in CATEGORIES)
    combos = sum(abs(report.combination_pct(lbl) - reference.combination_pct(lbl)) for lbl, _ in reference.top_combinations(top_k))
    loop = 0.0
    if reference.loop_h_share is not None and report.loop_share:
        loop = abs(report.loop_share.get("h", 0.0) - reference.loop_h_share)
    return FitScore(presence + combos + loop_weight * loop, presence, combos, loop, report)


def simulate_report(policy: SimPolicy, spec: BatchSpec) -> DistributionReport:
    logs = run_batch(spec.configs(policy))
    return distribution([a for log in logs for a in annotate_log(log)])


@dataclass
class CalibrationResult:
    policy: SimPolicy
    score: FitScore | None
    evaluations: int
    history: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "policy": self.policy.to_dict(),
            "score": self.score.to_json() if self.score else None,
            "report": self.score.report.to_json() if self.score else None,
            "evaluations": self.evaluations,
        }


def _check_space(space: Mapping[str, tuple[float, float]], policy: SimPolicy) -> dict[str, tuple[float, float]]:
    dims = {}
    for path, (lo, hi) in space.items():
        if lo > hi or not (math.isfinite(lo) and math.isfinite(hi)):
            continue
        try:
            get_path(policy, path)
        except KeyError:
            raise SearchSpaceEmpty(f"unknown parameter path {path!r}") from None
        dims[path] = (float(lo), float(hi))
    if not dims:
        raise SearchSpaceEmpty("search space has no usable dimension")
    return dims


def calibrate(
    reference: ReferenceStats,
    space: Mapping[str, tuple[float, float]] | None = None,
    budget: int = 200,
    seed: int = 0,
    initial: SimPolicy | None = None,
    spec: BatchSpec | None = None,
    top_k: int = 4,
    progress: Callable[[int, FitScore], None] | None = None,
) -> CalibrationResult:
    """Search for the policy whose simulated statistics are closest to ``reference``.

    ``budget`` counts policy evaluations (each one simulates the whole batch in
    ``spec``). Every candidate sees the same batch seed, so differences between
    candidates are not drowned by sampling noise. Half of the budget tries random
    perturbations of the incumbent; the rest walks one coordinate at a time,
    halving the step whenever a full sweep fails to improve.
    """
    initial = initial or SimPolicy()
    if budget <= 0:
        return CalibrationResult(initial, None, 0)
    dims = _check_space(space if space is not None else DEFAULT_SPACE, initial)
    spec = spec or BatchSpec()
    rng = random.Random(seed)
    history: list[dict] = []

    def evaluate(policy: SimPolicy) -> FitScore | None:
        fit = score(simulate_report(policy, spec), reference, top_k)
        history.append({"evaluation": len(history) + 1, **fit.to_json()})
        if progress is not None:
            progress(len(history), fit)
        return fit

    best, best_fit = initial, evaluate(initial)
    used = 1
    paths = sorted(dims)

    def clip(path: str, value: float) -> float:
        lo, hi = dims[path]
        return min(hi, max(lo, value))

    # local random search: perturb about half the coordinates of the incumbent
    n_random = (budget - 1) // 2
    while used < 1 + n_random:
        values = {p: clip(p, get_path(best, p) + rng.gauss(0.0, 0.15 * (dims[p][1] - dims[p][0])))
                  for p in paths if rng.random() < 0.5}
        used += 1
        try:
            cand = set_path(best, values)
        except PolicyError:
            continue
        fit = evaluate(cand)
        if fit.distance < best_fit.distance:
            best, best_fit = cand, fit
    # coordinate descent with a shrinking step
    step = 0.2
    improved = False
    k = 0
    while used < budget:
        path = paths[k % len(paths)]
        lo, hi = dims[path]
        current = get_path(best, path)
        direction = rng.choice((-1, 1))
        value = clip(path, current + direction * step * (hi - lo))
        if value == current:
            value = clip(path, current - direction * step * (hi - lo))
        used += 1
        try:
            cand = set_path(best, {path: value})
        except PolicyError:
            cand = None
        if cand is not None:
            fit = evaluate(cand)
            if fit.distance < best_fit.distance:
                best, best_fit, improved = cand, fit, True
        k += 1
        if k % len(paths) == 0:
            if not improved:
                step = max(step / 2, 1 / 64)
            improved = False
    return CalibrationResult(best, best_fit, used, history)
