"""Append-only provenance ledger of per-step research records (JSON lines)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

ROLES = ("lead-investigator", "method-builder", "experimentalist", "critical-reviewer")
PHASES = ("explore", "execute", "express")
FIELDS = (
    "step_id",
    "actor_role",
    "phase",
    "attempted",
    "found",
    "evidence",
    "limitations",
    "next_handoff",
    "timestamp",
)


class TraceError(ValueError):
    """A record violates the ledger schema or ordering."""


@dataclass(frozen=True)
class TraceRecord:
    step_id: int
    actor_role: str
    phase: str
    attempted: str
    found: str
    evidence: tuple[str, ...] = ()
    limitations: str = ""
    next_handoff: str = ""
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def to_json(self) -> str:
        data = asdict(self)
        data["evidence"] = list(self.evidence)
        return json.dumps(data, sort_keys=True)

    @classmethod
    def from_mapping(cls, data: dict) -> TraceRecord:
        if not isinstance(data, dict):
            raise TraceError(f"record must be an object, got {type(data).__name__}")
        unknown = set(data) - set(FIELDS)
        missing = set(FIELDS) - set(data)
        if unknown:
            raise TraceError(f"unknown record fields {sorted(unknown)}")
        if missing:
            raise TraceError(f"missing record fields {sorted(missing)}")
        evidence = data["evidence"]
        if not isinstance(evidence, list):
            raise TraceError("evidence must be a list of paths")
        return cls(**{**data, "evidence": tuple(evidence)})


def validate_record(record: TraceRecord, previous_step: int = 0, root: Path | None = None) -> None:
    """Raise :class:`TraceError` unless ``record`` may follow ``previous_step``.

    Evidence paths are resolved against ``root`` and must exist.
    """
    if type(record.step_id) is not int or record.step_id < 1:
        raise TraceError(f"step_id must be a positive integer, got {record.step_id!r}")
    if record.step_id <= previous_step:
        raise TraceError(f"step_id {record.step_id} does not follow {previous_step}")
    if record.actor_role not in ROLES:
        raise TraceError(f"actor_role {record.actor_role!r} is not one of {ROLES}")
    if record.phase not in PHASES:
        raise TraceError(f"phase {record.phase!r} is not one of {PHASES}")
    for name in ("attempted", "found", "limitations", "next_handoff", "timestamp"):
        if not isinstance(getattr(record, name), str):
            raise TraceError(f"{name} must be text")
    if not record.attempted.strip():
        raise TraceError("attempted must not be empty")
    try:
        datetime.fromisoformat(record.timestamp)
    except ValueError:
        raise TraceError(f"timestamp {record.timestamp!r} is not ISO 8601") from None
    for path in record.evidence:
        if not isinstance(path, str) or not path:
            raise TraceError(f"evidence entry {path!r} is not a path")
        resolved = (root / path) if root is not None else Path(path)
        if not resolved.exists():
            raise TraceError(f"evidence {path!r} does not exist")


class TraceLedger:
    """JSON-lines ledger file; records can only be appended.

    Evidence paths are stored relative to ``root`` (the run directory).
    """

    def __init__(self, path: str | Path, root: str | Path | None = None):
        self.path = Path(path)
        self.root = Path(root) if root is not None else self.path.parent
        self._last_step = 0
        if self.path.exists():
            records = read_ledger(self.path, self.root)
            self._last_step = records[-1].step_id if records else 0

    @property
    def last_step(self) -> int:
        return self._last_step

    def append(self, record: TraceRecord) -> TraceLedger:
        validate_record(record, self._last_step, self.root)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(record.to_json() + "\n")
        self._last_step = record.step_id
        return self

    def record(
        self,
        actor_role: str,
        phase: str,
        attempted: str,
        found: str,
        evidence: Iterable[str] = (),
        limitations: str = "",
        next_handoff: str = "",
    ) -> TraceRecord:
        """Append the next step and return it."""
        rec = TraceRecord(
            step_id=self._last_step + 1,
            actor_role=actor_role,
            phase=phase,
            attempted=attempted,
            found=found,
            evidence=tuple(evidence),
            limitations=limitations,
            next_handoff=next_handoff,
        )
        self.append(rec)
        return rec


def append_trace(ledger: TraceLedger, record: TraceRecord) -> TraceLedger:
    return ledger.append(record)


def read_ledger(path: str | Path, root: str | Path | None = None) -> list[TraceRecord]:
    """Parse and validate every line of a ledger."""
    path = Path(path)
    root = Path(root) if root is not None else path.parent
    records = []
    previous = 0
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceError(f"{path}:{lineno}: not JSON ({exc.msg})") from None
        try:
            rec = TraceRecord.from_mapping(data)
            validate_record(rec, previous, root)
        except (TraceError, TypeError) as exc:
            raise TraceError(f"{path}:{lineno}: {exc}") from None
        records.append(rec)
        previous = rec.step_id
    return records


def replay(run_dir: str | Path, ledger_name: str = "trace.jsonl") -> dict:
    """Artifact inventory reconstructed from a run's ledger."""
    run_dir = Path(run_dir)
    records = read_ledger(run_dir / ledger_name, run_dir)
    inventory: dict[str, list[int]] = {}
    for rec in records:
        for path in rec.evidence:
            inventory.setdefault(path, []).append(rec.step_id)
    return {
        "steps": len(records),
        "roles": sorted({r.actor_role for r in records}),
        "phases": sorted({r.phase for r in records}),
        "artifacts": {k: inventory[k] for k in sorted(inventory)},
    }
