"""Prompt construction, response parsing, and per-report label dispatch."""
from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .backends import BackendUnavailable, CompletionBackend, wire_type_for
from .extract import (
    FAMILIES,
    IndicatorOccurrence,
    IndicatorType,
    refang,
)
from .segment import Segment, occurrences_in

log = logging.getLogger(__name__)


class Label(str, Enum):
    IOC = "IoC"
    NON_IOC = "nonIoC"


_LABEL_TOKENS = {"ioc": Label.IOC, "nonioc": Label.NON_IOC}


@dataclass(frozen=True)
class LabelSource:
    """Where a judgment came from: the model, an analyst, or a baseline."""

    kind: str  # "llm" | "analyst" | "baseline"
    ident: str

    def __str__(self) -> str:
        return f"{self.kind}:{self.ident}"

    @classmethod
    def llm(cls, model_id: str) -> "LabelSource":
        return cls("llm", model_id)

    @classmethod
    def analyst(cls, analyst_id: str) -> "LabelSource":
        return cls("analyst", analyst_id)

    @classmethod
    def baseline(cls, name: str) -> "LabelSource":
        return cls("baseline", name)


@dataclass(frozen=True)
class LabelRecord:
    value: str
    itype: IndicatorType
    label: Label
    justification: str
    source: LabelSource
    report_id: str
    segment_index: int | None = None

    def __post_init__(self) -> None:
        if self.source.kind == "llm" and not self.justification:
            raise ValueError("model records require a justification")
        if (self.source.kind == "llm") != (self.segment_index is not None):
            raise ValueError("segment_index is set exactly for model records")


class IssueKind(str, Enum):
    UNKNOWN_VALUE = "UnknownValue"
    MALFORMED = "Malformed"
    MISSING = "Missing"
    DUPLICATE = "Duplicate"


@dataclass(frozen=True)
class ParseIssue:
    kind: IssueKind
    value: str | None = None
    line_no: int | None = None
    detail: str = ""


# --------- Prompt templates ---------

SECTION_COUNT = 8

_PLACEHOLDER_RE = re.compile(r"\{(segment_text|indicator_list)\}")


@dataclass(frozen=True)
class PromptTemplate:
    """An ordered-section prompt for one indicator family.

    blocks[0:8] are the technique sections (role, input definition, task
    definition, term definitions, common-mistake references, justification
    task, thoroughness reminder, output format); the remaining blocks carry
    the {segment_text} and {indicator_list} placeholders.
    """

    family: str
    blocks: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown indicator family {self.family!r}")
        if len(self.blocks) <= SECTION_COUNT:
            raise ValueError("template needs 8 sections plus data blocks")
        if any(not b.strip() for b in self.blocks):
            raise ValueError("template blocks must be non-empty")
        text = self.text
        for placeholder in ("{segment_text}", "{indicator_list}"):
            if text.count(placeholder) != 1:
                raise ValueError(f"template must contain {placeholder} exactly once")

    @property
    def sections(self) -> tuple[str, ...]:
        return self.blocks[:SECTION_COUNT]

    @property
    def text(self) -> str:
        return "\n\n".join(self.blocks)


def parse_template(family: str, text: str) -> PromptTemplate:
    blocks = tuple(b.strip("\n") for b in re.split(r"\n{2,}", text.strip("\n")) if b.strip())
    return PromptTemplate(family, blocks)


def load_template(family: str, path: str | Path | None = None) -> PromptTemplate:
    """Load a template file; None loads the bundled default for the family."""
    if path is None:
        source = resources.files("ioclabel.data").joinpath(f"prompts/{family}.txt")
        text = source.read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_template(family, text)


def default_templates() -> dict[str, PromptTemplate]:
    return {family: load_template(family) for family in FAMILIES}


def build_prompt(template: PromptTemplate, seg: Segment, values: list[str]) -> str:
    """Render the prompt for one segment and its indicator values.

    Substitution is a single pass, so report text containing something that
    looks like a placeholder is never re-expanded.
    """
    haystack = refang(seg.text).lower()
    for value in values:
        if value.lower() not in haystack:
            raise ValueError(f"indicator {value!r} does not occur in the segment")
    replacements = {
        "segment_text": seg.text,
        "indicator_list": "\n".join(values),
    }
    return _PLACEHOLDER_RE.sub(lambda m: replacements[m.group(1)], template.text)


# --------- Response parsing ---------


@dataclass(frozen=True)
class RecordContext:
    """Metadata attached to every record parsed from one backend response."""

    family: str
    report_id: str
    segment_index: int
    model_id: str


def parse_response(
    raw: str, expected: list[str], context: RecordContext
) -> tuple[list[LabelRecord], list[ParseIssue]]:
    """Parse "value,label,justification" lines against the expected values.

    Splits each line at the first two commas, so justifications may contain
    commas. Every expected value ends up either in a record or in a Missing
    issue; unknown, malformed, and duplicate lines become issues.
    """
    expected_set = set(expected)
    seen: dict[str, LabelRecord] = {}
    issues: list[ParseIssue] = []
    source = LabelSource.llm(context.model_id)

    for line_no, line in enumerate(raw.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",", 2)
        if len(parts) < 3:
            issues.append(
                ParseIssue(IssueKind.MALFORMED, line_no=line_no, detail="expected two commas")
            )
            continue
        value, label_token, justification = (p.strip() for p in parts)
        label = _LABEL_TOKENS.get(label_token.lower())
        if label is None:
            issues.append(
                ParseIssue(
                    IssueKind.MALFORMED,
                    value=value,
                    line_no=line_no,
                    detail=f"unknown label {label_token!r}",
                )
            )
            continue
        if not justification:
            issues.append(
                ParseIssue(IssueKind.MALFORMED, value=value, line_no=line_no, detail="empty justification")
            )
            continue
        if value not in expected_set:
            issues.append(ParseIssue(IssueKind.UNKNOWN_VALUE, value=value, line_no=line_no))
            continue
        if value in seen:
            issues.append(ParseIssue(IssueKind.DUPLICATE, value=value, line_no=line_no))
            continue
        seen[value] = LabelRecord(
            value=value,
            itype=IndicatorType(wire_type_for(context.family, value)),
            label=label,
            justification=justification,
            source=source,
            report_id=context.report_id,
            segment_index=context.segment_index,
        )

    for value in expected:
        if value not in seen:
            issues.append(ParseIssue(IssueKind.MISSING, value=value))
    return list(seen.values()), issues


# --------- Dispatch ---------


def label_segment(
    backend: CompletionBackend,
    template: PromptTemplate,
    seg: Segment,
    values: list[str],
    retry_limit: int = 0,
) -> tuple[list[LabelRecord], list[ParseIssue]]:
    """One backend call for (segment, family), with transport retries."""
    prompt = build_prompt(template, seg, values)
    attempts = retry_limit + 1
    for attempt in range(attempts):
        try:
            raw = backend.complete(prompt)
            break
        except BackendUnavailable:
            if attempt + 1 == attempts:
                raise
            log.debug("backend attempt %d failed, retrying", attempt + 1)
    context = RecordContext(template.family, seg.report_id, seg.index, backend.model_id)
    return parse_response(raw, values, context)


def _segment_values(
    seg: Segment, occurrences: list[IndicatorOccurrence], family: str
) -> list[str]:
    values: list[str] = []
    for occ in occurrences_in(seg, occurrences):
        if occ.itype.family == family and occ.value not in values:
            values.append(occ.value)
    return values


def label_report(
    backend: CompletionBackend,
    templates: dict[str, PromptTemplate],
    segments: list[Segment],
    occurrences: list[IndicatorOccurrence],
    max_concurrent: int = 1,
    retry_limit: int = 0,
) -> tuple[list[LabelRecord], list[ParseIssue]]:
    """Label every (family, segment) pair that has indicators of that family.

    Output is keyed and sorted by (value, type, segment index), so dispatch
    order and concurrency never change the result. A segment whose backend
    calls keep failing degrades to Missing issues instead of aborting.
    """
    tasks: list[tuple[Segment, str, list[str]]] = []
    for seg in segments:
        for family in FAMILIES:
            values = _segment_values(seg, occurrences, family)
            if values:
                tasks.append((seg, family, values))

    def run(task: tuple[Segment, str, list[str]]):
        seg, family, values = task
        try:
            return label_segment(backend, templates[family], seg, values, retry_limit)
        except BackendUnavailable as exc:
            issues = [
                ParseIssue(IssueKind.MISSING, value=v, detail=f"backend unavailable: {exc}")
                for v in values
            ]
            return [], issues

    records: list[LabelRecord] = []
    issues: list[ParseIssue] = []
    if max_concurrent <= 1:
        results = map(run, tasks)
    else:
        with ThreadPoolExecutor(max_workers=max_concurrent) as pool:
            results = list(pool.map(run, tasks))
    for recs, probs in results:
        records.extend(recs)
        issues.extend(probs)

    records.sort(key=lambda r: (r.value, r.itype.value, r.segment_index))
    issues.sort(key=lambda i: (i.kind.value, i.value or "", i.line_no or 0))
    return records, issues
