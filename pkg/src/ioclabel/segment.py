"""Overlapping whitespace-aligned report windows.

Each window end is snapped to the nearest ASCII whitespace within a fixed
slack; the next window starts exactly overlap bytes earlier, so the realized
overlap never drifts from nominal and short occurrences always land fully
inside at least one window.
"""
from __future__ import annotations

from dataclasses import dataclass

from .extract import IndicatorOccurrence, Span

SNAP_SLACK = 256

_ASCII_WS = frozenset(b" \t\n\r\f\v")


@dataclass(frozen=True)
class SegmentationConfig:
    window_size: int = 8000
    overlap_fraction: float = 0.5

    def __post_init__(self) -> None:
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")
        if not 0 < self.overlap_fraction < 1:
            raise ValueError("overlap_fraction must be in (0, 1)")

    @property
    def stride(self) -> int:
        return max(1, round(self.window_size * (1 - self.overlap_fraction)))

    @property
    def overlap_bytes(self) -> int:
        return self.window_size - self.stride


@dataclass(frozen=True)
class Segment:
    report_id: str
    index: int
    span: Span
    text: str


def _char_boundary(data: bytes, pos: int) -> int:
    # 0b10xxxxxx bytes are UTF-8 continuations; never cut through them.
    while pos < len(data) and (data[pos] & 0xC0) == 0x80:
        pos += 1
    return pos


def _snap(data: bytes, nominal: int, slack: int, lo: int) -> int:
    """Nearest whitespace byte within +-slack of nominal, earlier on tie."""
    best = -1
    best_dist = slack + 1
    start = max(lo, nominal - slack)
    stop = min(len(data) - 1, nominal + slack)
    for pos in range(start, stop + 1):
        if data[pos] in _ASCII_WS:
            dist = abs(pos - nominal)
            if dist < best_dist:
                best = pos
                best_dist = dist
    if best >= 0:
        return best
    return _char_boundary(data, nominal)


def segment(text: str, config: SegmentationConfig, report_id: str = "") -> list[Segment]:
    """Split text into overlapping windows with byte-offset spans."""
    data = text.encode("utf-8")
    n = len(data)
    window = config.window_size
    overlap = config.overlap_bytes
    slack = min(SNAP_SLACK, config.stride - 1)

    segments: list[Segment] = []
    start = 0
    while True:
        index = len(segments)
        nominal_end = start + window
        if nominal_end >= n - slack:
            # End of text is within snap reach: close out here so a short
            # tail never becomes its own segment.
            segments.append(
                Segment(report_id, index, Span(start, n), data[start:n].decode("utf-8"))
            )
            return segments
        end = _snap(data, nominal_end, slack, lo=start + 1)
        segments.append(
            Segment(report_id, index, Span(start, end), data[start:end].decode("utf-8"))
        )
        start = _char_boundary(data, end - overlap)


def occurrences_in(
    seg: Segment, occurrences: list[IndicatorOccurrence]
) -> list[IndicatorOccurrence]:
    """Occurrences whose span lies fully inside the segment, order preserved."""
    return [
        occ
        for occ in occurrences
        if occ.span.start >= seg.span.start and occ.span.end <= seg.span.end
    ]
