"""Action categories, codes, triggers and enabling factors, with their compatibility tables."""
from __future__ import annotations

from dataclasses import dataclass

CATEGORIES = ("H", "O", "T", "D", "C")
CATEGORY_NAMES = {
    "H": "hands-off",
    "O": "observational",
    "T": "terminating",
    "D": "directive",
    "C": "concurrent",
}
NO_INTERVENTION = "NI"

CODES: dict[str, str] = {
    "full-delegation": "H",
    "observational-monitoring": "O",
    "execution-termination": "T",
    "instruction-based-steering": "D",
    "switching-tasks": "D",
    "intermediate-result-appropriation": "C",
    "artifact-takeover": "C",
    "in-situ-co-editing": "C",
    "opportunistic-takeover": "C",
    "demonstration-based-steering": "C",
}
CODES_BY_CATEGORY: dict[str, tuple[str, ...]] = {c: tuple(k for k, v in CODES.items() if v == c) for c in CATEGORIES}

TRIGGERS = (
    "idea-spark",
    "early-outcome-visibility",
    "fine-grained-detailing",
    "misaligned-interpretation",
    "quality-drop",
    "emerging-new-task",
)
# Tie-break order when several triggers are eligible at once.
TRIGGER_PRIORITY = (
    "misaligned-interpretation",
    "quality-drop",
    "emerging-new-task",
    "fine-grained-detailing",
    "early-outcome-visibility",
    "idea-spark",
)
TRIGGER_ALLOWED: dict[str, frozenset[str]] = {
    "idea-spark": frozenset("C"),
    "early-outcome-visibility": frozenset("C"),
    "fine-grained-detailing": frozenset("C"),
    "misaligned-interpretation": frozenset("CDT"),
    "quality-drop": frozenset("CDT"),
    "emerging-new-task": frozenset("DT"),
}

MENTAL_MODEL = ("has", "none")
IMPORTANCE = ("much-more", "moderate", "no-user-task")
MODALITY = ("verbal", "direct", "uncertain")
EXPECTATION = ("direct-collab", "verbal-understood", "incapable")

# Factor value -> categories it is compatible with. Modality and expectation
# only discriminate among interventions; under O/H they mean "no intervention".
FACTOR_COMPAT: dict[str, dict[str, frozenset[str]]] = {
    "mental_model": {"has": frozenset("CDTOH"), "none": frozenset("O")},
    "importance": {"much-more": frozenset("H"), "moderate": frozenset("DTO"), "no-user-task": frozenset("CTO")},
    "modality": {"verbal": frozenset("D"), "direct": frozenset("C"), "uncertain": frozenset("T")},
    "expectation": {"direct-collab": frozenset("C"), "verbal-understood": frozenset("D"), "incapable": frozenset("T")},
}
ALIGNED_EXPECTATION = {"verbal": "verbal-understood", "direct": "direct-collab", "uncertain": "incapable"}

LOOPS = ("g", "h", "i", "j")
LOOP_NAMES = {
    "g": "full-delegation",
    "h": "continuous-observation",
    "i": "intervention",
    "j": "task-redirection",
}


class IncompatiblePair(ValueError):
    """A (trigger, category) pair outside the trigger's allowed set."""


@dataclass(frozen=True)
class ActionCategory:
    category: str
    code: str

    def __post_init__(self) -> None:
        if CODES.get(self.code) != self.category:
            raise ValueError(f"code {self.code!r} does not belong to category {self.category!r}")


@dataclass(frozen=True)
class EnablingFactors:
    mental_model: str = "has"
    importance: str = "moderate"
    modality: str = "verbal"
    expectation: str = "verbal-understood"

    def __post_init__(self) -> None:
        for name, values in (("mental_model", MENTAL_MODEL), ("importance", IMPORTANCE), ("modality", MODALITY), ("expectation", EXPECTATION)):
            if getattr(self, name) not in values:
                raise ValueError(f"{name} must be one of {values}")

    def compatible(self) -> frozenset[str]:
        out = frozenset(CATEGORIES)
        for name, table in FACTOR_COMPAT.items():
            out &= table[getattr(self, name)]
        return out

    def to_json(self) -> dict:
        return {"mental_model": self.mental_model, "importance": self.importance, "modality": self.modality, "expectation": self.expectation}


def category_of(code: str) -> str:
    return CODES[code]


def check_pair(trigger: str, category: str) -> None:
    if category not in TRIGGER_ALLOWED[trigger]:
        raise IncompatiblePair(f"trigger {trigger} cannot lead to category {category}")
