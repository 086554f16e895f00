"""Durable storage for a recruitment ledger: newline-delimited JSON events.

One event per line, seq strictly increasing from 1. A sidecar meta file
(``<log>.meta.json``) records the digest of the plan the log was opened
against, so a plan and a log that were not created together are refused.
Writers take a nonblocking advisory lock on the log file; every mutation is
flushed and fsynced before it is acknowledged.
"""

from __future__ import annotations

import fcntl
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .errors import DigestMismatchError, LockHeldError, ReplayError
from .ledger import (
    AdmissionDecision,
    CandidateSite,
    LedgerEvent,
    RecruitmentLedger,
    WithdrawnEvent,
    event_from_dict,
    event_to_dict,
    replay,
    utc_now_iso,
)
from .plan import QuotaPlan

LOG_SCHEMA_VERSION = 1


def meta_path_for(log_path: str | Path) -> Path:
    return Path(str(log_path) + ".meta.json")


def read_events(path: str | Path) -> list[LedgerEvent]:
    """Parse every event line; malformed lines raise ReplayError with the index."""
    path = Path(path)
    events: list[LedgerEvent] = []
    if not path.exists():
        return events
    with path.open(encoding="utf-8") as fh:
        for index, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ReplayError(f"event {index}: invalid JSON ({exc})", index) from None
            events.append(event_from_dict(doc, index))
    return events


@dataclass
class LedgerFile:
    """Single-writer handle pairing a live ledger with its backing log file.

    Mutations append the event line, flush, and fsync before returning, so
    anything acknowledged survives a crash; on reopen the state is whatever
    replay(log) yields.
    """

    path: Path
    plan: QuotaPlan
    ledger: RecruitmentLedger
    _fh: object = None
    _locked: bool = False

    def admit(self, site: CandidateSite) -> AdmissionDecision:
        before = self.ledger.last_seq
        decision = self.ledger.admit(site)
        if self.ledger.last_seq != before:
            self._append(self.ledger.events[-1])
        return decision

    def what_if(self, site: CandidateSite) -> AdmissionDecision:
        return self.ledger.what_if(site)

    def withdraw(self, site_id: str) -> WithdrawnEvent:
        event = self.ledger.withdraw(site_id)
        self._append(event)
        return event

    def _append(self, event: LedgerEvent) -> None:
        line = json.dumps(event_to_dict(event), separators=(",", ":"), ensure_ascii=False)
        self._fh.write(line + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self) -> None:
        if self._fh is not None:
            if self._locked:
                fcntl.flock(self._fh.fileno(), fcntl.LOCK_UN)
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "LedgerFile":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def open_ledger(
    plan: QuotaPlan,
    log_path: str | Path,
    clock: Callable[[], str] = utc_now_iso,
) -> LedgerFile:
    """Open (or create) an event log for this plan and replay it.

    Raises DigestMismatchError when the log was recorded against a different
    plan, LockHeldError when another writer holds the log, and ReplayError
    when the log is corrupt.
    """
    log_path = Path(log_path)
    meta_path = meta_path_for(log_path)
    plan_digest = plan.digest()

    if log_path.exists():
        if not meta_path.exists():
            if log_path.stat().st_size > 0:
                raise DigestMismatchError(
                    f"{log_path} has no recorded plan digest ({meta_path.name} "
                    "missing); cannot verify it belongs to this plan"
                )
            _write_meta(meta_path, plan_digest)
        else:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            recorded = meta.get("plan_digest")
            if recorded != plan_digest:
                raise DigestMismatchError(
                    f"event log {log_path} was recorded against plan digest "
                    f"{recorded!r}, not {plan_digest!r}"
                )
    else:
        log_path.parent.mkdir(parents=True, exist_ok=True)
        log_path.touch()
        _write_meta(meta_path, plan_digest)

    fh = log_path.open("a", encoding="utf-8")
    try:
        fcntl.flock(fh.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
    except OSError:
        fh.close()
        raise LockHeldError(
            f"another process holds the write lock on {log_path}"
        ) from None

    try:
        events = read_events(log_path)
        ledger = replay(events, plan, clock=clock)
    except Exception:
        fcntl.flock(fh.fileno(), fcntl.LOCK_UN)
        fh.close()
        raise
    return LedgerFile(path=log_path, plan=plan, ledger=ledger, _fh=fh, _locked=True)


def replay_file(plan: QuotaPlan, log_path: str | Path) -> RecruitmentLedger:
    """Read-only replay: no lock, no side effects on the files."""
    log_path = Path(log_path)
    meta_path = meta_path_for(log_path)
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        recorded = meta.get("plan_digest")
        if recorded != plan.digest():
            raise DigestMismatchError(
                f"event log {log_path} was recorded against plan digest "
                f"{recorded!r}, not {plan.digest()!r}"
            )
    elif log_path.exists() and log_path.stat().st_size > 0:
        raise DigestMismatchError(
            f"{log_path} has no recorded plan digest; cannot verify it "
            "belongs to this plan"
        )
    return replay(read_events(log_path), plan)


def _write_meta(meta_path: Path, plan_digest: str) -> None:
    meta = {
        "schema_version": LOG_SCHEMA_VERSION,
        "plan_digest": plan_digest,
        "created": utc_now_iso(),
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
