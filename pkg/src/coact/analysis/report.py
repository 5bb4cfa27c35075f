"""Render distribution reports as a text table, a JSON document, or an SVG bar chart."""
from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

from ..usersim.taxonomy import CATEGORIES, CATEGORY_NAMES
from .reference import ReferenceStats
from .stats import DistributionReport, Verdict

REPORT_SCHEMA = "coact.distribution/1"


def render_table(report: DistributionReport, verdicts: Sequence[Verdict] = (), reference: ReferenceStats | None = None) -> str:
    lines = [f"turns: {report.total}", "", f"{'category':<16}{'% of turns':>12}" + (f"{'reference':>12}" if reference else "")]
    for c in CATEGORIES:
        row = f"{c + ' ' + CATEGORY_NAMES[c]:<16}{report.presence[c]:>12.2f}"
        if reference:
            row += f"{reference.presence[c]:>12.2f}"
        lines.append(row)
    lines += ["", f"{'combination':<24}{'count':>7}{'%':>9}"]
    for label, count in report.ranked_combinations():
        lines.append(f"{label:<24}{count:>7}{report.combination_pct(label):>9.2f}")
    if report.loop_share:
        lines += ["", "loop share (% of turns): " + "  ".join(f"{k} {v:.2f}" for k, v in sorted(report.loop_share.items()))]
    if verdicts:
        lines += ["", f"{'statistic':<32}{'observed':>10}{'reference':>11}{'delta pp':>10}  verdict"]
        for v in verdicts:
            lines.append(f"{v.statistic:<32}{v.observed:>10.2f}{v.reference:>11.2f}{v.delta:>10.2f}  {'pass' if v.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


def report_json(report: DistributionReport, verdicts: Sequence[Verdict] = (), tolerance: float | None = None) -> dict:
    out = {"schema": REPORT_SCHEMA, **report.to_json()}
    if verdicts:
        out["tolerance_pp"] = tolerance
        out["verdicts"] = [v.to_json() for v in verdicts]
        out["all_passed"] = all(v.passed for v in verdicts)
    return out


def validate_report_json(doc: dict) -> None:
    """Raise ValueError unless ``doc`` has the shape :func:`report_json` produces."""
    if doc.get("schema") != REPORT_SCHEMA:
        raise ValueError("unknown report schema")
    if not isinstance(doc.get("total_turns"), int) or doc["total_turns"] < 1:
        raise ValueError("total_turns must be a positive integer")
    pres = doc.get("presence_pct")
    if not isinstance(pres, dict) or set(pres) != set(CATEGORIES) or not all(0 <= v <= 100 for v in pres.values()):
        raise ValueError("presence_pct must map every category to a percentage")
    combos = doc.get("combinations")
    if not isinstance(combos, list) or sum(c["count"] for c in combos) != doc["total_turns"]:
        raise ValueError("combination counts must sum to total_turns")
    for v in doc.get("verdicts", ()):
        if not {"statistic", "observed", "reference", "delta_pp", "passed"} <= set(v):
            raise ValueError("verdict entries are incomplete")


def render_svg(report: DistributionReport, reference: ReferenceStats | None = None) -> str:
    """Grouped bars of category presence; reference bars sit beside observed ones when given."""
    width, height, pad, base = 520, 300, 40, 250
    group = (width - 2 * pad) / len(CATEGORIES)
    bar = group / (3 if reference else 2)
    scale = (base - pad) / 100.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<line x1="{pad}" y1="{base}" x2="{width - pad}" y2="{base}" stroke="black"/>',
    ]
    for i, c in enumerate(CATEGORIES):
        x = pad + i * group + bar / 2
        bars = [(report.presence[c], "#4a78c2")]
        if reference:
            bars.append((reference.presence[c], "#c9a13b"))
        for j, (value, color) in enumerate(bars):
            h = value * scale
            parts.append(f'<rect x="{x + j * bar:.1f}" y="{base - h:.1f}" width="{bar:.1f}" height="{h:.1f}" fill="{color}">'
                         f'<title>{escape(c)} {value:.2f}%</title></rect>')
        parts.append(f'<text x="{x + bar * len(bars) / 2:.1f}" y="{base + 16}" text-anchor="middle" font-size="12">{escape(c)}</text>')
    parts.append(f'<text x="{pad}" y="20" font-size="12">% of turns per category ({report.total} turns)</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
