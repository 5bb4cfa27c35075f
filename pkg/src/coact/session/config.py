"""Session configuration: task script, user policy, budgets, and quality-drop schedule."""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from ..agent.goals import COLORS
from ..agent.runtime import MAX_ITERATIONS
from ..canvas.model import canonical_json
from ..usersim.policy import PRESETS, PolicyError, SimPolicy, load_config_file, preset_path

RECENT = "$recent"
LANDING = "landing"
USER_AREA = "user_area"

_LABELS = ("features", "pricing", "team", "testimonials", "faq", "contact")
_BUTTONS = ("Get started", "Sign up", "Learn more", "Buy now", "Contact us")
_HEADINGS = ("Welcome", "Our product", "Why us", "Pricing plans", "Meet the team")

# Multi-step requests dominate: single-property edits rarely need an agent.
FORM_WEIGHTS = {
    "columns": 3.0, "section": 2.0, "icons": 2.0, "card": 2.0, "button": 1.0, "heading": 0.5,
    "larger": 0.5, "dark": 1.0, "recolor": 0.5, "arrange": 0.5, "spacing": 0.5,
}

DEFAULT_SWITCH_POOL = (
    f"add a card in frame {LANDING}",
    f"add a heading 'New idea' in frame {LANDING}",
    f"add 3 icons in frame {LANDING}",
)


class ConfigInvalid(ValueError):
    pass


@dataclass(frozen=True)
class ScriptItem:
    """One scripted request plus the user's private intent for it (never shown to the agent)."""

    text: str
    selection: tuple[str, ...] = ()
    intent: Mapping[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict:
        out: dict[str, Any] = {"text": self.text}
        if self.selection:
            out["selection"] = list(self.selection)
        if self.intent:
            out["intent"] = dict(sorted(self.intent.items()))
        return out

    @classmethod
    def from_json(cls, data: Mapping[str, Any] | str) -> "ScriptItem":
        if isinstance(data, str):
            return cls(data)
        if "text" not in data or not isinstance(data["text"], str):
            raise ConfigInvalid("script items need a text field")
        return cls(data["text"], tuple(data.get("selection", ())), dict(data.get("intent", {})))


@dataclass(frozen=True)
class SessionConfig:
    script: tuple[ScriptItem, ...]
    policy: SimPolicy
    turn_budget: int
    seed: int
    quality_schedule: tuple[int, ...] = ()
    batch_capacity: int | None = None
    switch_pool: tuple[str, ...] = DEFAULT_SWITCH_POOL
    policy_ref: str = "inline"

    def __post_init__(self) -> None:
        if not isinstance(self.turn_budget, int) or self.turn_budget < 1:
            raise ConfigInvalid("turn budget must be >= 1")
        if any(not isinstance(i, int) or not 1 <= i <= MAX_ITERATIONS for i in self.quality_schedule):
            raise ConfigInvalid(f"quality schedule indices must lie in 1..{MAX_ITERATIONS}")
        if self.batch_capacity is not None and self.batch_capacity < 1:
            raise ConfigInvalid("batch capacity must be >= 1")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigInvalid("seed must be a 64-bit unsigned integer")

    def to_json(self) -> dict:
        return {
            "script": [s.to_json() for s in self.script],
            "policy": self.policy.to_dict(),
            "policy_ref": self.policy_ref,
            "turn_budget": self.turn_budget,
            "seed": self.seed,
            "quality_schedule": list(self.quality_schedule),
            "batch_capacity": self.batch_capacity,
            "switch_pool": list(self.switch_pool),
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "SessionConfig":
        try:
            return cls(
                script=tuple(ScriptItem.from_json(s) for s in data["script"]),
                policy=SimPolicy.from_dict(data["policy"]),
                turn_budget=int(data["turn_budget"]),
                seed=int(data["seed"]),
                quality_schedule=tuple(data.get("quality_schedule", ())),
                batch_capacity=data.get("batch_capacity"),
                switch_pool=tuple(data.get("switch_pool", DEFAULT_SWITCH_POOL)),
                policy_ref=data.get("policy_ref", "inline"),
            )
        except (KeyError, TypeError, PolicyError) as exc:
            raise ConfigInvalid(f"bad session config: {exc}") from exc

    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.to_json()).encode()).hexdigest()


def random_request(rng: random.Random) -> tuple[str, dict[str, Any]]:
    """A request drawn from the supported vocabulary, with the intent fixture it could carry."""
    forms, weights = zip(*FORM_WEIGHTS.items())
    form = rng.choices(forms, weights=weights)[0]
    spacing = {"item_spacing": rng.choice((24, 32))}
    if form == "columns":
        return f"create a {rng.randint(2, 4)}-column {rng.choice(_LABELS)} in frame {LANDING}", spacing
    if form == "section":
        return f"add a {rng.choice(_LABELS)} section in frame {LANDING}", spacing
    if form == "button":
        return f"add a button '{rng.choice(_BUTTONS)}' in frame {LANDING}", {"fill": COLORS[rng.choice(("green", "orange", "purple"))]}
    if form == "heading":
        return f"add a heading '{rng.choice(_HEADINGS)}' in frame {LANDING}", {"font_size": rng.choice((40, 48))}
    if form == "icons":
        return f"add {rng.randint(2, 5)} icons in frame {LANDING}", spacing
    if form == "card":
        return f"add a card in frame {LANDING}", spacing
    if form == "larger":
        return f"make {RECENT} larger", {}
    if form == "dark":
        return f"apply a dark theme to {RECENT}", {}
    if form == "recolor":
        return f"recolor {RECENT} to {rng.choice(sorted(COLORS))}", {}
    if form == "arrange":
        return f"arrange {RECENT} {rng.choice(('vertically', 'horizontally'))}", {}
    return f"set spacing of {RECENT} to {rng.choice((8, 12, 20))}", {}


def generate_script(rng: random.Random, n: int, intent_rate: float = 0.0) -> tuple[ScriptItem, ...]:
    out = []
    for _ in range(n):
        text, intent = random_request(rng)
        keep = intent if intent and rng.random() < intent_rate else {}
        out.append(ScriptItem(text, intent=keep))
    return tuple(out)


@dataclass(frozen=True)
class BatchSpec:
    """How many sessions to generate and how each one's script is drawn."""

    sessions: int = 10
    requests_min: int = 18
    requests_max: int = 25
    turn_budget: int = 33
    batch_capacity: int | None = 2
    quality_schedule: tuple[int, ...] = ()
    intent_rate: float = 0.3
    seed: int = 0
    script: tuple[ScriptItem, ...] = ()

    def __post_init__(self) -> None:
        if self.sessions < 1:
            raise ConfigInvalid("sessions must be >= 1")
        if not 1 <= self.requests_min <= self.requests_max:
            raise ConfigInvalid("need 1 <= requests_min <= requests_max")
        if not 0 <= self.intent_rate <= 1:
            raise ConfigInvalid("intent_rate must lie in [0, 1]")

    def session_seed(self, index: int) -> int:
        digest = hashlib.sha256(f"{self.seed}:{index}".encode()).digest()
        return int.from_bytes(digest[:8], "big")

    def session_config(self, index: int, policy: SimPolicy, policy_ref: str = "inline") -> SessionConfig:
        seed = self.session_seed(index)
        if self.script:
            script = self.script
        else:
            rng = random.Random(seed)
            script = generate_script(rng, rng.randint(self.requests_min, self.requests_max), self.intent_rate)
        return SessionConfig(
            script=script,
            policy=policy,
            turn_budget=self.turn_budget,
            seed=seed,
            quality_schedule=self.quality_schedule,
            batch_capacity=self.batch_capacity,
            policy_ref=policy_ref,
        )

    def configs(self, policy: SimPolicy, policy_ref: str = "inline") -> list[SessionConfig]:
        return [self.session_config(i, policy, policy_ref) for i in range(self.sessions)]


_BATCH_KEYS = {f for f in BatchSpec.__dataclass_fields__}


def batch_from_mapping(data: Mapping[str, Any], seed: int | None = None) -> BatchSpec:
    unknown = set(data) - _BATCH_KEYS
    if unknown:
        raise ConfigInvalid(f"unknown session field(s): {sorted(unknown)}")
    kw = dict(data)
    if "quality_schedule" in kw:
        kw["quality_schedule"] = tuple(kw["quality_schedule"])
    if "script" in kw:
        kw["script"] = tuple(ScriptItem.from_json(s) for s in kw["script"])
    if seed is not None:
        kw["seed"] = seed
    try:
        spec = BatchSpec(**kw)
    except TypeError as exc:
        raise ConfigInvalid(str(exc)) from exc
    for i in spec.quality_schedule:
        if not isinstance(i, int) or not 1 <= i <= MAX_ITERATIONS:
            raise ConfigInvalid(f"quality schedule indices must lie in 1..{MAX_ITERATIONS}")
    return spec


def load_batch(source: str | Path | Mapping[str, Any], seed: int | None = None) -> tuple[BatchSpec, SimPolicy, str]:
    """Read a ``[session]`` + ``[policy]`` config (path, preset name, or mapping)."""
    if isinstance(source, Mapping):
        data, ref = source, "inline"
    else:
        path = Path(source)
        if not path.exists() and str(source) in PRESETS:
            ref = str(source)
            path = preset_path(ref)
        else:
            ref = path.name
        if not path.exists():
            raise FileNotFoundError(f"config file {str(source)!r} not found")
        try:
            data = load_config_file(path)
        except ValueError as exc:  # json and toml decode errors subclass ValueError
            raise ConfigInvalid(f"cannot parse {path}: {exc}") from exc
    try:
        policy = SimPolicy.from_dict(data.get("policy", {}))
    except (PolicyError, TypeError) as exc:
        raise ConfigInvalid(f"bad policy: {exc}") from exc
    return batch_from_mapping(data.get("session", {}), seed), policy, ref


def resolve_request(text: str, recent: str | None) -> str:
    return text.replace(RECENT, recent or LANDING)


def resolve_selection(selection: Sequence[str], recent: str | None) -> tuple[str, ...]:
    return tuple(recent or LANDING if s == RECENT else s for s in selection)
