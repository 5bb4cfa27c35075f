"""Stochastic parameters of the simulated user, loadable from TOML or JSON."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import tomli

from .taxonomy import CODES, IMPORTANCE, MODALITY, TRIGGERS

PRESETS = ("calibrated", "delegator", "interventionist")


class PolicyError(ValueError):
    pass


def _uniform_modality() -> dict[str, dict[str, float]]:
    return {band: {m: 1.0 for m in MODALITY} for band in IMPORTANCE}


@dataclass(frozen=True)
class SimPolicy:
    """Parameters of the decision model.

    Importance of the user's own task is a level in [0, 1]: at or above
    ``theta_high`` it is "much more important", at or above ``theta_low``
    "moderately more / similar", below that "no user task". The level is drawn
    at turn start and drops by ``importance_decay`` at every iteration boundary,
    except in turns (probability ``p_steady``) where it holds for the whole turn.
    At each boundary the user may also finish their own task
    (``p_own_task_done``), which drops the level to zero.
    """

    hazards: Mapping[str, float] = field(default_factory=lambda: {t: 0.0 for t in TRIGGERS})
    p_mental_model: float = 1.0
    p_much_more: float = 0.0
    p_moderate: float = 0.0
    theta_high: float = 2 / 3
    theta_low: float = 1 / 3
    importance_decay: float = 0.0
    p_steady: float = 0.0
    p_own_task_done: float = 0.0
    modality: Mapping[str, Mapping[str, float]] = field(default_factory=_uniform_modality)
    expectation_alignment: float = 1.0
    p_no_intervention: float = 0.0
    code_weights: Mapping[str, float] = field(default_factory=dict)
    p_idle_edit: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("p_mental_model", "p_much_more", "p_moderate", "theta_high", "theta_low",
                     "importance_decay", "p_steady", "p_own_task_done", "expectation_alignment", "p_no_intervention", "p_idle_edit"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not 0 <= v <= 1:
                raise PolicyError(f"{name} must be a probability in [0, 1], got {v!r}")
        if self.p_much_more + self.p_moderate > 1 + 1e-9:
            raise PolicyError("p_much_more + p_moderate must not exceed 1")
        if self.theta_low > self.theta_high:
            raise PolicyError("theta_low must not exceed theta_high")
        unknown = set(self.hazards) - set(TRIGGERS)
        if unknown:
            raise PolicyError(f"unknown trigger(s) in hazards: {sorted(unknown)}")
        for t, h in self.hazards.items():
            if not isinstance(h, (int, float)) or h < 0:
                raise PolicyError(f"hazard for {t} must be >= 0")
        for band, weights in self.modality.items():
            if band not in IMPORTANCE or set(weights) - set(MODALITY):
                raise PolicyError(f"bad modality table entry {band!r}")
            if any(w < 0 for w in weights.values()):
                raise PolicyError("modality weights must be >= 0")
        for code, w in self.code_weights.items():
            if code not in CODES or w < 0:
                raise PolicyError(f"bad code weight {code!r}={w!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise PolicyError("seed must be a 64-bit unsigned integer")

    def hazard(self, trigger: str) -> float:
        return float(self.hazards.get(trigger, 0.0))

    def band(self, level: float) -> str:
        if level >= self.theta_high:
            return "much-more"
        if level >= self.theta_low:
            return "moderate"
        return "no-user-task"

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["hazards"] = {t: float(self.hazard(t)) for t in TRIGGERS}
        d["modality"] = {b: {m: float(self.modality.get(b, {}).get(m, 0.0)) for m in MODALITY} for b in IMPORTANCE}
        d["code_weights"] = dict(sorted(self.code_weights.items()))
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SimPolicy":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise PolicyError(f"unknown policy field(s): {sorted(unknown)}")
        kw = dict(data)
        if "hazards" in kw:
            kw["hazards"] = {t: float(kw["hazards"].get(t, 0.0)) for t in TRIGGERS} | {k: v for k, v in kw["hazards"].items() if k not in TRIGGERS}
        if "modality" in kw:
            base = _uniform_modality()
            for band, weights in kw["modality"].items():
                base.setdefault(band, {}).update({k: float(v) for k, v in weights.items()})
            kw["modality"] = base
        for k in ("p_mental_model", "p_much_more", "p_moderate", "theta_high", "theta_low", "importance_decay", "p_steady", "p_own_task_done",
                  "expectation_alignment", "p_no_intervention", "p_idle_edit"):
            if k in kw and isinstance(kw[k], int):
                kw[k] = float(kw[k])
        return cls(**kw)

    def with_updates(self, **kw: Any) -> "SimPolicy":
        return replace(self, **kw)


def zero_policy(seed: int = 0) -> SimPolicy:
    """No triggers, always a mental model, never hands-off: a pure observer."""
    return SimPolicy(seed=seed)


def load_config_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        return json.loads(text)
    return tomli.loads(text)


def preset_path(name: str) -> Path:
    if name not in PRESETS:
        raise PolicyError(f"unknown preset {name!r}; choose from {PRESETS}")
    return Path(str(resources.files("coact.usersim") / "presets" / f"{name}.toml"))


def load_policy(source: str | Path | Mapping[str, Any]) -> SimPolicy:
    """Policy from a mapping, a TOML/JSON file, or a preset name."""
    if isinstance(source, Mapping):
        data = source
    else:
        p = Path(source)
        data = load_config_file(preset_path(str(source)) if str(source) in PRESETS and not p.exists() else p)
    return SimPolicy.from_dict(data.get("policy", data))
