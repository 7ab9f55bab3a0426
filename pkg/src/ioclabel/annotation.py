"""Human-review annotation sessions: dual-pass labeling, dispute detection,
senior escalation, consensus finalization, and gold dataset export.

Sessions are event-sourced: every mutation is described by a JSON-friendly
event, state is rebuilt by replaying events, and all timestamps come from the
events themselves, so a replayed session exports byte-identical output.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations

from .extract import IndicatorType, Span, UniqueIndicator
from .labeling import Label
from .metrics import GOLD_SCHEMA_VERSION
from .voting import FinalLabel

log = logging.getLogger(__name__)

MACHINE_SOURCE = "machine"


class AnnotationMode(str, Enum):
    BLIND = "blind"  # analysts never see machine labels or justifications
    GUIDED = "guided"  # analysts see machine labels and validate them


class SessionState(str, Enum):
    OPEN = "Open"
    AWAITING_SENIOR = "AwaitingSenior"
    FINALIZED = "Finalized"


class AnnotationError(Exception):
    pass


class InsufficientAnalysts(AnnotationError):
    pass


class NotAssigned(AnnotationError):
    pass


class SessionFinalized(AnnotationError):
    pass


class NoDisputes(AnnotationError):
    pass


class UnknownIndicator(AnnotationError):
    pass


class IncompleteLabeling(AnnotationError):
    def __init__(self, missing: list[tuple]):
        self.missing = missing
        preview = ", ".join(str(m) for m in missing[:5])
        suffix = "..." if len(missing) > 5 else ""
        super().__init__(f"{len(missing)} keys still unlabeled: {preview}{suffix}")


@dataclass(frozen=True)
class ReportDoc:
    report_id: str
    source_name: str
    text: str


@dataclass(frozen=True)
class IndicatorRef:
    """One unique indicator of a report, with its occurrence spans."""

    value: str
    itype: IndicatorType
    occurrences: tuple[Span, ...]


@dataclass(frozen=True)
class MachineLabel:
    label: Label
    justifications: tuple[str, ...]


@dataclass
class LabelEntry:
    label: Label
    comments: list[str] = field(default_factory=list)
    ts: float = 0.0


@dataclass(frozen=True)
class DisputeRecord:
    report_id: str
    itype: IndicatorType
    value: str
    labels_seen: tuple[tuple[str, Label], ...]  # (source, label), source-sorted


LabelKey = tuple[str, IndicatorType, str]  # (report_id, type, value)


def _doc_sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def assign_reports(
    reports: list[tuple[str, int]], analysts: list[str]
) -> dict[str, tuple[str, str]]:
    """Two analysts per report, greedily balancing indicator load.

    Heaviest reports are placed first; each goes to the pair with the least
    combined load, breaking ties by combined report count, then by how often
    the pair was used, then by pair order.
    """
    if len(analysts) < 2:
        raise InsufficientAnalysts("need at least two analysts")
    pairs = list(combinations(analysts, 2))
    load = {a: 0 for a in analysts}
    report_count = {a: 0 for a in analysts}
    pair_use = {p: 0 for p in pairs}

    assignments: dict[str, tuple[str, str]] = {}
    for report_id, weight in sorted(reports, key=lambda r: (-r[1], r[0])):
        best = min(
            range(len(pairs)),
            key=lambda i: (
                load[pairs[i][0]] + load[pairs[i][1]],
                report_count[pairs[i][0]] + report_count[pairs[i][1]],
                pair_use[pairs[i]],
                i,
            ),
        )
        a, b = pairs[best]
        assignments[report_id] = (a, b)
        load[a] += weight
        load[b] += weight
        report_count[a] += 1
        report_count[b] += 1
        pair_use[pairs[best]] += 1
    return assignments


class AnnotationSession:
    """Event-sourced annotation state machine.

    Mutating operations validate, build an event, apply it, and return it;
    apply() is also the replay entry point and never validates.
    """

    def __init__(self) -> None:
        self.session_id = ""
        self.mode = AnnotationMode.BLIND
        self.state = SessionState.OPEN
        self.analysts: list[str] = []
        self.docs: dict[str, ReportDoc] = {}
        self.indicators: dict[str, list[IndicatorRef]] = {}
        self.machine_labels: dict[LabelKey, MachineLabel] = {}
        self.assignments: dict[str, tuple[str, str]] = {}
        self.analyst_labels: dict[tuple[str, IndicatorType, str, str], LabelEntry] = {}
        self.first_view: dict[tuple[str, str], float] = {}
        self.last_label: dict[tuple[str, str], float] = {}
        self.senior_id: str | None = None
        self.disputes: list[DisputeRecord] | None = None

    # ----- Construction -----

    @classmethod
    def create(
        cls,
        session_id: str,
        mode: AnnotationMode,
        reports: list[ReportDoc],
        indicators: dict[str, list[UniqueIndicator]],
        machine_results: dict[str, list[FinalLabel]],
        analysts: list[str],
        ts: float,
    ) -> tuple["AnnotationSession", dict]:
        if len(analysts) < 2:
            raise InsufficientAnalysts("need at least two analysts")
        missing_machine = [doc.report_id for doc in reports if doc.report_id not in machine_results]
        if missing_machine:
            raise AnnotationError(f"machine labels missing for reports: {missing_machine}")

        weights = [(doc.report_id, len(indicators.get(doc.report_id, []))) for doc in reports]
        assignments = assign_reports(weights, analysts)

        event = {
            "event": "created",
            "session_id": session_id,
            "mode": mode.value,
            "analysts": list(analysts),
            "reports": [
                {
                    "report_id": doc.report_id,
                    "source_name": doc.source_name,
                    "text": doc.text,
                    "indicators": [
                        {
                            "value": u.value,
                            "type": u.itype.value,
                            "occurrences": [[s.start, s.end] for s in (o.span for o in u.occurrences)],
                        }
                        for u in indicators.get(doc.report_id, [])
                    ],
                }
                for doc in reports
            ],
            "machine": {
                report_id: [
                    {
                        "value": f.value,
                        "type": f.itype.value,
                        "label": f.label.value,
                        "justifications": list(f.justifications),
                    }
                    for f in finals
                ]
                for report_id, finals in machine_results.items()
            },
            "assignments": {rid: list(pair) for rid, pair in assignments.items()},
            "ts": ts,
        }
        session = cls()
        session.apply(event)
        return session, event

    # ----- Event application (replay path) -----

    def apply(self, event: dict) -> None:
        kind = event["event"]
        if kind == "created":
            self._apply_created(event)
        elif kind == "viewed":
            key = (event["report_id"], event["analyst_id"])
            self.first_view.setdefault(key, event["ts"])
        elif kind == "labeled":
            self._apply_labeled(event)
        elif kind == "disputes_checked":
            self.disputes = self._compute_disputes()
            if any(self.disputes):
                self.state = SessionState.AWAITING_SENIOR
        elif kind == "escalated":
            self.senior_id = event["senior_id"]
        elif kind == "finalized":
            self.state = SessionState.FINALIZED
        else:
            raise ValueError(f"unknown event kind {kind!r}")

    def _apply_created(self, event: dict) -> None:
        self.session_id = event["session_id"]
        self.mode = AnnotationMode(event["mode"])
        self.analysts = list(event["analysts"])
        for entry in event["reports"]:
            report_id = entry["report_id"]
            self.docs[report_id] = ReportDoc(report_id, entry["source_name"], entry["text"])
            self.indicators[report_id] = [
                IndicatorRef(
                    value=ind["value"],
                    itype=IndicatorType(ind["type"]),
                    occurrences=tuple(Span(s, e) for s, e in ind["occurrences"]),
                )
                for ind in entry["indicators"]
            ]
        for report_id, finals in event["machine"].items():
            for f in finals:
                key = (report_id, IndicatorType(f["type"]), f["value"])
                self.machine_labels[key] = MachineLabel(
                    Label(f["label"]), tuple(f["justifications"])
                )
        self.assignments = {rid: (pair[0], pair[1]) for rid, pair in event["assignments"].items()}

    def _apply_labeled(self, event: dict) -> None:
        report_id = event["report_id"]
        analyst = event["analyst_id"]
        key = (report_id, IndicatorType(event["type"]), event["value"], analyst)
        entry = self.analyst_labels.get(key)
        if entry is None:
            entry = LabelEntry(Label(event["label"]))
            self.analyst_labels[key] = entry
        entry.label = Label(event["label"])
        entry.ts = event["ts"]
        comment = event.get("comment") or ""
        if comment:
            entry.comments.append(comment)
        view_key = (report_id, analyst)
        self.first_view.setdefault(view_key, event["ts"])
        self.last_label[view_key] = event["ts"]

    # ----- Queries -----

    def indicator_keys(self, report_id: str) -> list[tuple[IndicatorType, str]]:
        return [(ref.itype, ref.value) for ref in self.indicators.get(report_id, [])]

    def juniors_for(self, report_id: str) -> tuple[str, str]:
        try:
            return self.assignments[report_id]
        except KeyError:
            raise NotAssigned(f"unknown report {report_id!r}") from None

    def analyst_label(self, report_id: str, itype: IndicatorType, value: str, analyst: str) -> LabelEntry | None:
        return self.analyst_labels.get((report_id, itype, value, analyst))

    @property
    def disputed_reports(self) -> set[str]:
        if not self.disputes:
            return set()
        return {d.report_id for d in self.disputes}

    def report_timings(self) -> dict[tuple[str, str], float]:
        """Seconds from first view to last label per (report, analyst)."""
        timings = {}
        for key, last in self.last_label.items():
            first = self.first_view.get(key, last)
            timings[key] = max(0.0, last - first)
        return timings

    # ----- Mutations -----

    def _reject_if_finalized(self) -> None:
        if self.state is SessionState.FINALIZED:
            raise SessionFinalized("session is finalized")

    def _can_label(self, analyst: str, report_id: str) -> None:
        if report_id not in self.docs:
            raise NotAssigned(f"unknown report {report_id!r}")
        if self.state is SessionState.OPEN:
            if analyst not in self.assignments[report_id]:
                raise NotAssigned(f"{analyst} is not assigned to {report_id}")
            return
        # AwaitingSenior: only the escalated senior may touch disputed reports.
        if analyst != self.senior_id:
            raise NotAssigned("junior labeling is closed while awaiting the senior")
        if report_id not in self.disputed_reports:
            raise NotAssigned(f"{report_id} is not disputed")

    def view_report(self, analyst: str, report_id: str, ts: float) -> dict | None:
        """Record the first time an analyst sees a report. Returns the event,
        or None when a first view is already on file."""
        self._reject_if_finalized()
        if report_id not in self.docs:
            raise NotAssigned(f"unknown report {report_id!r}")
        allowed = analyst in self.assignments[report_id] or (
            analyst == self.senior_id and report_id in self.disputed_reports
        )
        if not allowed:
            raise NotAssigned(f"{analyst} is not assigned to {report_id}")
        if (report_id, analyst) in self.first_view:
            return None
        event = {"event": "viewed", "report_id": report_id, "analyst_id": analyst, "ts": ts}
        self.apply(event)
        return event

    def record_label(
        self,
        analyst: str,
        report_id: str,
        itype: IndicatorType,
        value: str,
        label: Label,
        ts: float,
        comment: str | None = None,
    ) -> dict:
        self._reject_if_finalized()
        self._can_label(analyst, report_id)
        if (itype, value) not in set(self.indicator_keys(report_id)):
            raise UnknownIndicator(f"{itype.value}:{value} is not an indicator of {report_id}")
        event = {
            "event": "labeled",
            "report_id": report_id,
            "type": itype.value,
            "value": value,
            "analyst_id": analyst,
            "label": label.value,
            "comment": comment or "",
            "ts": ts,
        }
        self.apply(event)
        return event

    def _junior_missing_keys(self) -> list[tuple]:
        missing = []
        for report_id, refs in self.indicators.items():
            a, b = self.assignments[report_id]
            for ref in refs:
                for analyst in (a, b):
                    if (report_id, ref.itype, ref.value, analyst) not in self.analyst_labels:
                        missing.append((report_id, ref.itype.value, ref.value, analyst))
        return missing

    def _compute_disputes(self) -> list[DisputeRecord]:
        disputes = []
        for report_id in sorted(self.indicators):
            a, b = self.assignments[report_id]
            for ref in sorted(self.indicators[report_id], key=lambda r: (r.itype.value, r.value)):
                seen: list[tuple[str, Label]] = []
                for analyst in (a, b):
                    entry = self.analyst_labels.get((report_id, ref.itype, ref.value, analyst))
                    if entry is not None:
                        seen.append((f"analyst:{analyst}", entry.label))
                machine = self.machine_labels.get((report_id, ref.itype, ref.value))
                if machine is not None:
                    seen.append((MACHINE_SOURCE, machine.label))
                if len({label for _, label in seen}) > 1:
                    disputes.append(
                        DisputeRecord(
                            report_id, ref.itype, ref.value, tuple(sorted(seen))
                        )
                    )
        return disputes

    def detect_disputes(self, ts: float) -> tuple[list[DisputeRecord], dict]:
        """Compare junior and machine labels once both juniors are done."""
        self._reject_if_finalized()
        if self.state is not SessionState.OPEN:
            return list(self.disputes or []), {}
        missing = self._junior_missing_keys()
        if missing:
            raise IncompleteLabeling(missing)
        event = {"event": "disputes_checked", "ts": ts}
        self.apply(event)
        return list(self.disputes or []), event

    def escalate(self, senior: str, ts: float) -> dict:
        """Assign every disputed report to the senior for full re-labeling."""
        self._reject_if_finalized()
        if self.state is not SessionState.AWAITING_SENIOR or not self.disputes:
            raise NoDisputes("nothing to escalate")
        event = {"event": "escalated", "senior_id": senior, "ts": ts}
        self.apply(event)
        return event

    def _senior_missing_keys(self) -> list[tuple]:
        missing = []
        if self.senior_id is None:
            for report_id in sorted(self.disputed_reports):
                for ref in self.indicators[report_id]:
                    missing.append((report_id, ref.itype.value, ref.value, "<senior>"))
            return missing
        for report_id in sorted(self.disputed_reports):
            for ref in self.indicators[report_id]:
                if (report_id, ref.itype, ref.value, self.senior_id) not in self.analyst_labels:
                    missing.append((report_id, ref.itype.value, ref.value, self.senior_id))
        return missing

    def finalize(self, ts: float) -> dict:
        """Close the session; afterwards export_fragment() serves the labels."""
        self._reject_if_finalized()
        if self.disputes is None:
            missing = self._junior_missing_keys()
            if missing:
                raise IncompleteLabeling(missing)
            self.disputes = self._compute_disputes()
            if self.disputes:
                self.state = SessionState.AWAITING_SENIOR
        if self.state is SessionState.AWAITING_SENIOR:
            missing = self._senior_missing_keys()
            if missing:
                raise IncompleteLabeling(missing)
        event = {"event": "finalized", "ts": ts}
        self.apply(event)
        return event

    # ----- Export -----

    def _final_label(self, report_id: str, ref: IndicatorRef) -> tuple[Label, str]:
        if report_id in self.disputed_reports:
            entry = self.analyst_labels[(report_id, ref.itype, ref.value, self.senior_id)]
            return entry.label, "Senior"
        a, _b = self.assignments[report_id]
        entry = self.analyst_labels[(report_id, ref.itype, ref.value, a)]
        return entry.label, "Consensus"

    def export_fragment(self) -> dict:
        """The session's reports in the gold dataset format (version 1)."""
        if self.state is not SessionState.FINALIZED:
            raise AnnotationError("session is not finalized")
        reports = []
        for report_id in sorted(self.docs):
            doc = self.docs[report_id]
            indicators = []
            for ref in sorted(self.indicators[report_id], key=lambda r: (r.itype.value, r.value)):
                label, provenance = self._final_label(report_id, ref)
                justifications = []
                machine = self.machine_labels.get((report_id, ref.itype, ref.value))
                if machine is not None:
                    justifications.extend(machine.justifications)
                for analyst in (*self.assignments[report_id], self.senior_id):
                    if analyst is None:
                        continue
                    entry = self.analyst_labels.get((report_id, ref.itype, ref.value, analyst))
                    if entry:
                        justifications.extend(f"{analyst}: {c}" for c in entry.comments)
                indicators.append(
                    {
                        "value": ref.value,
                        "type": ref.itype.value,
                        "label": label.value,
                        "occurrences": [[s.start, s.end] for s in sorted(ref.occurrences)],
                        "justifications": justifications,
                        "provenance": provenance,
                    }
                )
            reports.append(
                {
                    "report_id": report_id,
                    "source_name": doc.source_name,
                    "sha256_of_text": _doc_sha256(doc.text),
                    "indicators": indicators,
                }
            )
        return {"version": GOLD_SCHEMA_VERSION, "reports": reports}


def export_dataset(sessions: list[AnnotationSession]) -> dict:
    """Merge finalized sessions into one gold dataset document."""
    reports = []
    for session in sessions:
        reports.extend(session.export_fragment()["reports"])
    reports.sort(key=lambda r: r["report_id"])
    return {"version": GOLD_SCHEMA_VERSION, "reports": reports}


def dataset_bytes(doc: dict) -> bytes:
    """Stable serialization used everywhere the dataset is written."""
    return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode("utf-8")
