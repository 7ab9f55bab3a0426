"""Indicator-of-compromise labeling: extraction, windowed LLM labeling with
vote consolidation, baseline methods, scoring, and human-review sessions."""
from __future__ import annotations

from .backends import (
    BackendConfig,
    BackendUnavailable,
    FaultInjectingBackend,
    HttpCompletionBackend,
    MockCompletionBackend,
)
from .baselines import (
    BaselineVerdict,
    ReputationRecord,
    Verdict,
    exchange_compare,
    reputation_label,
    whitelist_filter,
)
from .extract import (
    IndicatorOccurrence,
    IndicatorType,
    RejectReason,
    Span,
    UniqueIndicator,
    dedupe,
    extract_candidates,
    extract_validated,
    load_tld_set,
    refang,
    validate,
)
from .labeling import (
    Label,
    LabelRecord,
    LabelSource,
    ParseIssue,
    PromptTemplate,
    build_prompt,
    label_report,
    load_template,
    parse_response,
)
from .metrics import GoldLabel, MetricsReport, load_gold, parse_gold, score
from .segment import Segment, SegmentationConfig, segment
from .voting import CoverageStats, FinalLabel, VoteThresholds, consolidate

__version__ = "0.1.0"

__all__ = [
    "BackendConfig",
    "BackendUnavailable",
    "BaselineVerdict",
    "CoverageStats",
    "FaultInjectingBackend",
    "FinalLabel",
    "GoldLabel",
    "HttpCompletionBackend",
    "IndicatorOccurrence",
    "IndicatorType",
    "Label",
    "LabelRecord",
    "LabelSource",
    "MetricsReport",
    "MockCompletionBackend",
    "ParseIssue",
    "PromptTemplate",
    "RejectReason",
    "ReputationRecord",
    "Segment",
    "SegmentationConfig",
    "Span",
    "UniqueIndicator",
    "Verdict",
    "VoteThresholds",
    "build_prompt",
    "consolidate",
    "dedupe",
    "exchange_compare",
    "extract_candidates",
    "extract_validated",
    "label_report",
    "load_gold",
    "load_template",
    "load_tld_set",
    "parse_gold",
    "parse_response",
    "refang",
    "reputation_label",
    "score",
    "segment",
    "validate",
    "whitelist_filter",
    "__version__",
]
