"""Reference turn-level statistics, bundled verbatim, plus a corpus that reproduces them."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Any, Mapping

from ..usersim.taxonomy import CATEGORIES

if TYPE_CHECKING:
    from .stats import DistributionReport


def _parse_label(label: str) -> frozenset[str]:
    cats = frozenset(part.strip("()") for part in label.split("+"))
    if not cats or not cats <= set(CATEGORIES):
        raise ValueError(f"bad combination label {label!r}")
    return cats


@dataclass(frozen=True)
class ReferenceStats:
    """Stored as given; nothing here is recomputed from the counts."""

    presence: Mapping[str, float]
    combinations: tuple[tuple[str, int], ...]
    total_turns: int
    loop_h_share: float | None = None
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def combination_pct(self, label: str) -> float:
        count = dict(self.combinations).get(label, 0)
        return round(100.0 * count / self.total_turns, 2)

    def top_combinations(self, k: int = 4) -> list[tuple[str, int]]:
        return sorted(self.combinations, key=lambda kv: -kv[1])[:k]

    def corpus(self) -> list[frozenset[str]]:
        """One category set per turn, in table order, rebuilt from the combination counts."""
        out: list[frozenset[str]] = []
        for label, count in self.combinations:
            out.extend([_parse_label(label)] * count)
        return out

    @classmethod
    def from_report(cls, report: "DistributionReport") -> "ReferenceStats":
        """Reference statistics taken from a simulated corpus (for self-consistency checks)."""
        presence = {c: round(report.presence[c], 2) for c in CATEGORIES}
        return cls(presence, tuple(report.ranked_combinations()), report.total, report.loop_share.get("h"),
                   {"source": "simulated"})

    def to_json(self) -> dict:
        return {
            "presence_pct": dict(self.presence),
            "combinations": [list(c) for c in self.combinations],
            "total_turns": self.total_turns,
            "loop_h_share_pct": self.loop_h_share,
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "ReferenceStats":
        try:
            presence = {c: float(data["presence_pct"][c]) for c in CATEGORIES}
            combos = tuple((str(label), int(n)) for label, n in data["combinations"])
            for label, _ in combos:
                _parse_label(label)
            return cls(presence, combos, int(data["total_turns"]), data.get("loop_h_share_pct"), dict(data.get("metadata", {})))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed reference statistics: {exc}") from exc


def load_reference(path: str | Path | None = None) -> ReferenceStats:
    """The bundled fixture, or a JSON file with the same layout."""
    if path is None:
        text = (resources.files("coact") / "data" / "reference.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return ReferenceStats.from_json(json.loads(text))
