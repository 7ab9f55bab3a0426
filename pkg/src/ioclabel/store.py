"""Session persistence: append-only event logs plus atomic state snapshots.

One JSON-lines file per session holds the full event history; replaying it
rebuilds the session exactly. A snapshot JSON file is refreshed after every
append so humans and dashboards can inspect state without replaying.
"""
from __future__ import annotations

import json
import logging
import os
import time
from pathlib import Path

from .annotation import (
    AnnotationMode,
    AnnotationSession,
    DisputeRecord,
    ReportDoc,
)
from .extract import IndicatorType, UniqueIndicator
from .labeling import Label
from .voting import FinalLabel

log = logging.getLogger(__name__)


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


class SessionStore:
    """Filesystem layout: <root>/<session_id>.jsonl and <session_id>.json."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _events_path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.jsonl"

    def _snapshot_path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.json"

    def exists(self, session_id: str) -> bool:
        return self._events_path(session_id).exists()

    def list_sessions(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.jsonl"))

    def append(self, session_id: str, event: dict) -> None:
        line = json.dumps(event, sort_keys=True) + "\n"
        with open(self._events_path(session_id), "a", encoding="utf-8") as fh:
            fh.write(line)

    def read_events(self, session_id: str) -> list[dict]:
        path = self._events_path(session_id)
        if not path.exists():
            raise FileNotFoundError(f"no session {session_id!r} under {self.root}")
        events = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    events.append(json.loads(line))
        return events

    def write_snapshot(self, session: AnnotationSession) -> None:
        snapshot = {
            "session_id": session.session_id,
            "mode": session.mode.value,
            "state": session.state.value,
            "analysts": session.analysts,
            "senior_id": session.senior_id,
            "assignments": {rid: list(pair) for rid, pair in sorted(session.assignments.items())},
            "reports": sorted(session.docs),
            "disputes": None
            if session.disputes is None
            else [
                {
                    "report_id": d.report_id,
                    "type": d.itype.value,
                    "value": d.value,
                    "labels_seen": {src: lab.value for src, lab in d.labels_seen},
                }
                for d in session.disputes
            ],
        }
        data = (json.dumps(snapshot, sort_keys=True, indent=2) + "\n").encode("utf-8")
        _atomic_write(self._snapshot_path(session.session_id), data)


class SessionManager:
    """Owns live sessions, stamps event times, and keeps the store in sync.

    A None store keeps everything in memory, which is what unit tests use.
    """

    def __init__(self, store: SessionStore | None = None, clock=time.time):
        self.store = store
        self.clock = clock
        self._sessions: dict[str, AnnotationSession] = {}

    def _persist(self, session: AnnotationSession, event: dict | None) -> None:
        if self.store is None or event is None or not event:
            return
        self.store.append(session.session_id, event)
        self.store.write_snapshot(session)

    def create_session(
        self,
        session_id: str,
        mode: AnnotationMode,
        reports: list[ReportDoc],
        indicators: dict[str, list[UniqueIndicator]],
        machine_results: dict[str, list[FinalLabel]],
        analysts: list[str],
    ) -> AnnotationSession:
        if session_id in self._sessions or (self.store and self.store.exists(session_id)):
            raise ValueError(f"session {session_id!r} already exists")
        session, event = AnnotationSession.create(
            session_id, mode, reports, indicators, machine_results, analysts, ts=self.clock()
        )
        self._sessions[session_id] = session
        self._persist(session, event)
        return session

    def get(self, session_id: str) -> AnnotationSession:
        if session_id in self._sessions:
            return self._sessions[session_id]
        if self.store is None:
            raise KeyError(f"unknown session {session_id!r}")
        session = AnnotationSession()
        for event in self.store.read_events(session_id):
            session.apply(event)
        self._sessions[session_id] = session
        return session

    def view_report(self, session_id: str, analyst: str, report_id: str) -> None:
        session = self.get(session_id)
        event = session.view_report(analyst, report_id, ts=self.clock())
        self._persist(session, event)

    def record_label(
        self,
        session_id: str,
        analyst: str,
        report_id: str,
        itype: IndicatorType,
        value: str,
        label: Label,
        comment: str | None = None,
    ) -> None:
        session = self.get(session_id)
        event = session.record_label(
            analyst, report_id, itype, value, label, ts=self.clock(), comment=comment
        )
        self._persist(session, event)

    def detect_disputes(self, session_id: str) -> list[DisputeRecord]:
        session = self.get(session_id)
        disputes, event = session.detect_disputes(ts=self.clock())
        self._persist(session, event)
        return disputes

    def escalate(self, session_id: str, senior: str) -> None:
        session = self.get(session_id)
        event = session.escalate(senior, ts=self.clock())
        self._persist(session, event)

    def finalize(self, session_id: str) -> None:
        session = self.get(session_id)
        event = session.finalize(ts=self.clock())
        self._persist(session, event)

    def export_fragment(self, session_id: str) -> dict:
        return self.get(session_id).export_fragment()
