"""Scoring against gold labels: per-type and micro-averaged P/R/F1 plus coverage.

Conventions: abstentions and missing predictions count as NonIoC in the
confusion matrix but are tracked as unlabeled; IoC predictions for keys the
gold set never saw count as false positives; exchange entries that never
appeared in a report are forced false positives.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .baselines import BaselineVerdict, Verdict
from .extract import FAMILIES, IndicatorType
from .labeling import Label
from .voting import FinalLabel

log = logging.getLogger(__name__)

GOLD_SCHEMA_VERSION = "1"

_WIRE_TYPES = {t.value for t in IndicatorType}
_WIRE_LABELS = {l.value for l in Label}
_PROVENANCES = {"Consensus", "Senior"}


class SchemaError(Exception):
    """A gold dataset file violates the interchange schema."""


class DuplicatePrediction(Exception):
    """Two predictions share the same (report, type, value) key."""


@dataclass(frozen=True)
class GoldLabel:
    value: str
    itype: IndicatorType
    label: Label
    report_id: str


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    labeled: int = 0
    unlabeled: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def add(self, other: "Counts") -> None:
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        self.tn += other.tn
        self.labeled += other.labeled
        self.unlabeled += other.unlabeled

    def as_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "precision": round(self.precision, 4),
            "recall": round(self.recall, 4),
            "f1": round(self.f1, 4),
            "labeled": self.labeled,
            "unlabeled": self.unlabeled,
        }


@dataclass
class MetricsReport:
    per_family: dict[str, Counts] = field(
        default_factory=lambda: {family: Counts() for family in FAMILIES}
    )

    @property
    def total(self) -> Counts:
        total = Counts()
        for counts in self.per_family.values():
            total.add(counts)
        return total

    def as_dict(self) -> dict:
        return {
            "per_type": {family: c.as_dict() for family, c in self.per_family.items()},
            "total": self.total.as_dict(),
        }

    def as_text(self) -> str:
        header = f"{'type':<8}{'tp':>6}{'fp':>6}{'fn':>6}{'tn':>6}{'precision':>11}{'recall':>9}{'f1':>9}"
        rows = [header]
        for name in (*FAMILIES, "total"):
            c = self.per_family[name] if name in self.per_family else self.total
            rows.append(
                f"{name:<8}{c.tp:>6}{c.fp:>6}{c.fn:>6}{c.tn:>6}"
                f"{c.precision:>11.4f}{c.recall:>9.4f}{c.f1:>9.4f}"
            )
        return "\n".join(rows)


Prediction = BaselineVerdict | FinalLabel


def _prediction_fields(pred: Prediction) -> tuple[str | None, IndicatorType, str, Verdict]:
    if isinstance(pred, FinalLabel):
        verdict = Verdict.IOC if pred.label is Label.IOC else Verdict.NON_IOC
        return pred.report_id, pred.itype, pred.value, verdict
    return pred.report_id, pred.itype, pred.value, pred.verdict


def score(
    predicted: Iterable[Prediction],
    gold: Iterable[GoldLabel],
    extras_not_in_report: Iterable[tuple[str, IndicatorType]] = (),
) -> MetricsReport:
    """Score predictions against gold labels under the fixed conventions."""
    by_key: dict[tuple[str | None, IndicatorType, str], Verdict] = {}
    for pred in predicted:
        report_id, itype, value, verdict = _prediction_fields(pred)
        key = (report_id, itype, value)
        if key in by_key:
            raise DuplicatePrediction(f"duplicate prediction for {key}")
        by_key[key] = verdict

    report = MetricsReport()
    gold_keys = set()
    for entry in gold:
        key = (entry.report_id, entry.itype, entry.value)
        if key in gold_keys:
            raise SchemaError(f"gold set repeats {key}")
        gold_keys.add(key)
        counts = report.per_family[entry.itype.family]
        verdict = by_key.pop(key, None)
        predicted_ioc = verdict is Verdict.IOC
        if verdict in (Verdict.IOC, Verdict.NON_IOC):
            counts.labeled += 1
        else:
            counts.unlabeled += 1
        if entry.label is Label.IOC:
            if predicted_ioc:
                counts.tp += 1
            else:
                counts.fn += 1
        else:
            if predicted_ioc:
                counts.fp += 1
            else:
                counts.tn += 1

    # Predictions for keys outside the gold set: IoC counts against precision,
    # abstentions and NonIoC are ignored.
    for (_, itype, _), verdict in by_key.items():
        if verdict is Verdict.IOC:
            report.per_family[itype.family].fp += 1

    for _value, itype in extras_not_in_report:
        report.per_family[itype.family].fp += 1
    return report


# --------- Gold dataset I/O ---------


@dataclass
class GoldTallies:
    """Instance and unique-label counts per family, for dataset cross-checks."""

    instances: dict[str, int]
    unique: dict[str, dict[str, int]]

    @property
    def total_instances(self) -> int:
        return sum(self.instances.values())

    @property
    def total_unique(self) -> int:
        return sum(sum(v.values()) for v in self.unique.values())

    def unique_with_label(self, label: Label) -> int:
        return sum(v[label.value] for v in self.unique.values())


def _require(condition: bool, where: str, message: str) -> None:
    if not condition:
        raise SchemaError(f"{where}: {message}")


def parse_gold(doc: object, where: str = "dataset") -> tuple[list[GoldLabel], GoldTallies]:
    """Validate a gold dataset document and return labels plus tallies."""
    _require(isinstance(doc, dict), where, "top level must be an object")
    _require(doc.get("version") == GOLD_SCHEMA_VERSION, where, "version must be '1'")
    reports = doc.get("reports")
    _require(isinstance(reports, list), where, "reports must be a list")

    labels: list[GoldLabel] = []
    seen: set[tuple[str, IndicatorType, str]] = set()
    instances = {family: 0 for family in FAMILIES}
    unique = {family: {"IoC": 0, "nonIoC": 0} for family in FAMILIES}

    for r_index, report in enumerate(reports):
        rwhere = f"{where}.reports[{r_index}]"
        _require(isinstance(report, dict), rwhere, "report must be an object")
        for field_name in ("report_id", "source_name", "sha256_of_text", "indicators"):
            _require(field_name in report, rwhere, f"missing field {field_name!r}")
        report_id = report["report_id"]
        _require(isinstance(report_id, str) and report_id != "", rwhere, "report_id must be a non-empty string")
        indicators = report["indicators"]
        _require(isinstance(indicators, list), rwhere, "indicators must be a list")
        for i_index, ind in enumerate(indicators):
            iwhere = f"{rwhere}.indicators[{i_index}]"
            _require(isinstance(ind, dict), iwhere, "indicator must be an object")
            _require(ind.get("type") in _WIRE_TYPES, iwhere, f"bad type {ind.get('type')!r}")
            _require(ind.get("label") in _WIRE_LABELS, iwhere, f"bad label {ind.get('label')!r}")
            _require(isinstance(ind.get("value"), str) and ind["value"] != "", iwhere, "bad value")
            occurrences = ind.get("occurrences")
            _require(isinstance(occurrences, list) and occurrences, iwhere, "occurrences must be a non-empty list")
            for span in occurrences:
                _require(
                    isinstance(span, list) and len(span) == 2 and all(isinstance(x, int) for x in span)
                    and 0 <= span[0] < span[1],
                    iwhere,
                    f"bad occurrence span {span!r}",
                )
            _require(ind.get("provenance") in _PROVENANCES, iwhere, f"bad provenance {ind.get('provenance')!r}")
            _require(isinstance(ind.get("justifications"), list), iwhere, "justifications must be a list")

            itype = IndicatorType(ind["type"])
            key = (report_id, itype, ind["value"])
            _require(key not in seen, iwhere, "duplicate (report, type, value)")
            seen.add(key)
            labels.append(GoldLabel(ind["value"], itype, Label(ind["label"]), report_id))
            instances[itype.family] += len(occurrences)
            unique[itype.family][ind["label"]] += 1

    return labels, GoldTallies(instances, unique)


def load_gold(path: str | Path) -> tuple[list[GoldLabel], GoldTallies]:
    """Read and validate a gold dataset file."""
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        raise SchemaError(f"{path}: empty file")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    return parse_gold(doc, where=str(path))
