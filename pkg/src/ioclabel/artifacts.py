"""JSON artifact formats passed between pipeline stages.

Every artifact is written as key-sorted, two-space-indented JSON with a
trailing newline so file diffs and golden tests stay stable.
"""
from __future__ import annotations

import json
import logging
import os
from pathlib import Path

from .baselines import BaselineVerdict, Verdict
from .extract import IndicatorOccurrence, IndicatorType, Span
from .labeling import Label, LabelRecord, LabelSource, ParseIssue, IssueKind
from .voting import CoverageStats, FinalLabel

log = logging.getLogger(__name__)


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_artifact(path: str | Path, doc: dict) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(dumps(doc), encoding="utf-8")
    os.replace(tmp, path)


def read_artifact(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# ----- occurrences -----


def occurrences_doc(report_id: str, occurrences: list[IndicatorOccurrence]) -> dict:
    return {
        "report_id": report_id,
        "occurrences": [
            {
                "raw": o.raw,
                "value": o.value,
                "type": o.itype.value,
                "span": [o.span.start, o.span.end],
                "report_id": o.report_id,
            }
            for o in occurrences
        ],
    }


def occurrences_from_doc(doc: dict) -> list[IndicatorOccurrence]:
    return [
        IndicatorOccurrence(
            raw=o["raw"],
            value=o["value"],
            itype=IndicatorType(o["type"]),
            span=Span(o["span"][0], o["span"][1]),
            report_id=o.get("report_id", doc.get("report_id", "")),
        )
        for o in doc["occurrences"]
    ]


# ----- label records -----


def records_doc(report_id: str, records: list[LabelRecord], issues: list[ParseIssue]) -> dict:
    return {
        "report_id": report_id,
        "records": [
            {
                "value": r.value,
                "type": r.itype.value,
                "label": r.label.value,
                "justification": r.justification,
                "source": str(r.source),
                "report_id": r.report_id,
                "segment_index": r.segment_index,
            }
            for r in records
        ],
        "issues": [
            {
                "kind": i.kind.value,
                "value": i.value,
                "line_no": i.line_no,
                "detail": i.detail,
            }
            for i in issues
        ],
    }


def _source_from_str(text: str) -> LabelSource:
    kind, _, ident = text.partition(":")
    return LabelSource(kind=kind, ident=ident)


def records_from_doc(doc: dict) -> tuple[list[LabelRecord], list[ParseIssue]]:
    records = [
        LabelRecord(
            value=r["value"],
            itype=IndicatorType(r["type"]),
            label=Label(r["label"]),
            justification=r["justification"],
            source=_source_from_str(r["source"]),
            report_id=r.get("report_id", doc.get("report_id", "")),
            segment_index=r.get("segment_index"),
        )
        for r in doc["records"]
    ]
    issues = [
        ParseIssue(
            kind=IssueKind(i["kind"]),
            value=i.get("value"),
            line_no=i.get("line_no"),
            detail=i.get("detail", ""),
        )
        for i in doc.get("issues", [])
    ]
    return records, issues


# ----- consolidated finals -----


def finals_doc(report_id: str, finals: list[FinalLabel], coverage: CoverageStats) -> dict:
    return {
        "report_id": report_id,
        "finals": [
            {
                "value": f.value,
                "type": f.itype.value,
                "label": f.label.value,
                "ioc_votes": f.ioc_votes,
                "total_votes": f.total_votes,
                "justifications": list(f.justifications),
                "report_id": f.report_id,
            }
            for f in finals
        ],
        "coverage": {
            "labeled": coverage.labeled,
            "unlabeled": coverage.unlabeled,
            "unlabeled_values": [[v, t.value] for v, t in coverage.unlabeled_values],
        },
    }


def finals_from_doc(doc: dict) -> list[FinalLabel]:
    return [
        FinalLabel(
            value=f["value"],
            itype=IndicatorType(f["type"]),
            label=Label(f["label"]),
            ioc_votes=f["ioc_votes"],
            total_votes=f["total_votes"],
            justifications=tuple(f["justifications"]),
            report_id=f.get("report_id", doc.get("report_id", "")),
        )
        for f in doc["finals"]
    ]


# ----- baseline verdicts -----


def verdicts_doc(
    method: str,
    verdicts: list[BaselineVerdict],
    not_in_report: list[tuple[str, IndicatorType]] = (),
) -> dict:
    return {
        "method": method,
        "verdicts": [
            {
                "value": v.value,
                "type": v.itype.value,
                "verdict": v.verdict.value,
                "report_id": v.report_id,
            }
            for v in verdicts
        ],
        "not_in_report": [[value, itype.value] for value, itype in not_in_report],
    }


def verdicts_from_doc(doc: dict) -> tuple[list[BaselineVerdict], list[tuple[str, IndicatorType]]]:
    verdicts = [
        BaselineVerdict(
            value=v["value"],
            itype=IndicatorType(v["type"]),
            verdict=Verdict(v["verdict"]),
            method=doc["method"],
            report_id=v.get("report_id"),
        )
        for v in doc["verdicts"]
    ]
    extras = [(value, IndicatorType(t)) for value, t in doc.get("not_in_report", [])]
    return verdicts, extras
