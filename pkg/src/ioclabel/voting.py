"""Per-indicator vote consolidation across overlapping segments."""
from __future__ import annotations

from dataclasses import dataclass, field

from .extract import FAMILIES, IndicatorType, UniqueIndicator
from .labeling import Label, LabelRecord

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class VoteThresholds:
    """Minimum IoC-vote ratio per indicator family; ratio >= threshold wins IoC."""

    by_family: dict[str, float] = field(
        default_factory=lambda: {family: DEFAULT_THRESHOLD for family in FAMILIES}
    )

    def __post_init__(self) -> None:
        for family in FAMILIES:
            if family not in self.by_family:
                raise ValueError(f"missing threshold for {family}")
            ratio = self.by_family[family]
            if not 0.0 <= ratio <= 1.0:
                raise ValueError(f"threshold for {family} must be in [0, 1]")

    @classmethod
    def uniform(cls, ratio: float) -> "VoteThresholds":
        return cls({family: ratio for family in FAMILIES})

    def get(self, itype: IndicatorType) -> float:
        return self.by_family[itype.family]


@dataclass(frozen=True)
class FinalLabel:
    value: str
    itype: IndicatorType
    label: Label
    ioc_votes: int
    total_votes: int
    justifications: tuple[str, ...]
    report_id: str

    def __post_init__(self) -> None:
        if not 0 < self.total_votes or not 0 <= self.ioc_votes <= self.total_votes:
            raise ValueError("vote counts out of range")


@dataclass(frozen=True)
class CoverageStats:
    labeled: int
    unlabeled: int
    unlabeled_values: tuple[tuple[str, IndicatorType], ...]


def consolidate(
    records: list[LabelRecord],
    unique_indicators: list[UniqueIndicator],
    thresholds: VoteThresholds | None = None,
) -> tuple[list[FinalLabel], CoverageStats]:
    """Merge per-segment records into one verdict per unique indicator.

    Indicators with no record at all are reported in unlabeled_values rather
    than being guessed. Justifications keep record order.
    """
    thresholds = thresholds or VoteThresholds()
    by_key: dict[tuple[str, IndicatorType], list[LabelRecord]] = {}
    for record in records:
        by_key.setdefault((record.value, record.itype), []).append(record)

    finals: list[FinalLabel] = []
    unlabeled: list[tuple[str, IndicatorType]] = []
    for unique in unique_indicators:
        votes = by_key.get((unique.value, unique.itype))
        if not votes:
            unlabeled.append((unique.value, unique.itype))
            continue
        ioc_votes = sum(1 for r in votes if r.label is Label.IOC)
        total = len(votes)
        label = Label.IOC if ioc_votes / total >= thresholds.get(unique.itype) else Label.NON_IOC
        finals.append(
            FinalLabel(
                value=unique.value,
                itype=unique.itype,
                label=label,
                ioc_votes=ioc_votes,
                total_votes=total,
                justifications=tuple(r.justification for r in votes),
                report_id=unique.report_id,
            )
        )
    stats = CoverageStats(len(finals), len(unlabeled), tuple(unlabeled))
    return finals, stats
