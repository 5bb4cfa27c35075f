"""The canonical session log and its JSON Lines encoding (optionally gzip-compressed)."""
from __future__ import annotations

import glob as globmod
import gzip
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from ..canvas.model import CanvasSnapshot, canonical_json
from ..events import ActionEvent, LedgerEntry
from ..usersim.decision import DecisionTrace

LOG_VERSION = 1


class CorruptLog(ValueError):
    pass


@dataclass
class SessionLog:
    seed: int
    config_hash: str
    config: dict
    initial_canvas: dict
    events: list[ActionEvent] = field(default_factory=list)
    turns: list[dict] = field(default_factory=list)
    traces: list[DecisionTrace] = field(default_factory=list)
    ledger: list[LedgerEntry] = field(default_factory=list)
    final_canvas: dict | None = None

    @property
    def initial_snapshot(self) -> CanvasSnapshot:
        return CanvasSnapshot.from_json(self.initial_canvas)

    def lines(self) -> Iterator[str]:
        yield canonical_json({
            "type": "header",
            "version": LOG_VERSION,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "config": self.config,
            "initial_canvas": self.initial_canvas,
        })
        for ev in self.events:
            yield canonical_json({"type": "event", **ev.to_json()})
        for t in self.turns:
            yield canonical_json({"type": "turn", **t})
        for tr in self.traces:
            yield canonical_json({"type": "trace", **tr.to_json()})
        yield canonical_json({"type": "ledger", "entries": [[e.revision, e.actor, e.seq] for e in self.ledger]})
        if self.final_canvas is not None:
            yield canonical_json({"type": "final", "canvas": self.final_canvas})

    def dumps(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "SessionLog":
        log: SessionLog | None = None
        for no, raw in enumerate(lines, 1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                rec = json.loads(raw)
                kind = rec.pop("type")
            except (ValueError, KeyError, AttributeError) as exc:
                raise CorruptLog(f"line {no}: not a log record ({exc})") from exc
            try:
                if kind == "header":
                    if log is not None:
                        raise CorruptLog(f"line {no}: second header")
                    if rec.get("version") != LOG_VERSION:
                        raise CorruptLog(f"line {no}: unsupported log version {rec.get('version')!r}")
                    log = cls(int(rec["seed"]), rec["config_hash"], rec["config"], rec["initial_canvas"])
                    continue
                if log is None:
                    raise CorruptLog(f"line {no}: record before header")
                if kind == "event":
                    log.events.append(ActionEvent.from_json(rec))
                elif kind == "turn":
                    log.turns.append(rec)
                elif kind == "trace":
                    log.traces.append(DecisionTrace.from_json(rec))
                elif kind == "ledger":
                    log.ledger = [LedgerEntry(int(r), a, int(s)) for r, a, s in rec["entries"]]
                elif kind == "final":
                    log.final_canvas = rec["canvas"]
                else:
                    raise CorruptLog(f"line {no}: unknown record type {kind!r}")
            except CorruptLog:
                raise
            except (KeyError, TypeError, ValueError) as exc:
                raise CorruptLog(f"line {no}: malformed {kind} record ({exc})") from exc
        if log is None:
            raise CorruptLog("log has no header")
        order = [(e.tick, e.seq) for e in log.events]
        if order != sorted(order) or len({s for _, s in order}) != len(order):
            raise CorruptLog("events are not strictly ordered by (tick, seq)")
        return log

    @classmethod
    def loads(cls, text: str) -> "SessionLog":
        return cls.from_lines(text.splitlines())


def _open(path: Path, mode: str):
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def write_log(log: SessionLog, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".gz":
        # fixed mtime keeps compressed output byte-identical across runs
        with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0, filename="") as gz:
            gz.write(log.dumps().encode("utf-8"))
    else:
        path.write_text(log.dumps(), encoding="utf-8")
    return path


def read_log(path: str | Path) -> SessionLog:
    path = Path(path)
    try:
        with _open(path, "r") as fh:
            return SessionLog.from_lines(fh)
    except (OSError, EOFError, UnicodeDecodeError) as exc:
        raise CorruptLog(f"{path}: {exc}") from exc


def expand_logs(patterns: Iterable[str]) -> list[Path]:
    """Paths matching any of ``patterns`` (directories expand to their logs), sorted and de-duplicated."""
    out: set[Path] = set()
    for pat in patterns:
        p = Path(pat)
        if p.is_dir():
            out.update(q for q in p.rglob("*") if q.name.endswith((".jsonl", ".jsonl.gz")))
        else:
            out.update(Path(m) for m in globmod.glob(pat, recursive=True) if Path(m).is_file())
    return sorted(out)

