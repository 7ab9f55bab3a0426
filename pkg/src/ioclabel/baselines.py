"""Automated ground-truth labeling baselines.

Three methods: whitelist + corpus-frequency filtering (labels everything),
reputation-threshold labeling (abstains outside the database), and
threat-exchange comparison (flags exchange entries missing from the report).
"""
from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

import httpx

from .extract import IndicatorOccurrence, IndicatorType, UniqueIndicator

log = logging.getLogger(__name__)


class Verdict(str, Enum):
    IOC = "IoC"
    NON_IOC = "nonIoC"
    UNLABELED = "Unlabeled"


@dataclass(frozen=True)
class ReputationRecord:
    value: str
    itype: IndicatorType
    in_database: bool
    malicious_vendor_count: int = 0


@dataclass(frozen=True)
class BaselineVerdict:
    value: str
    itype: IndicatorType
    verdict: Verdict
    method: str
    report_id: str | None = None


class ReputationSourceUnavailable(Exception):
    """The live reputation source could not be reached."""


# --------- Whitelist + frequency ---------


def whitelist_filter(
    unique_indicators: list[UniqueIndicator],
    whitelist: set[str],
    corpus_frequency: dict[str, int],
    freq_threshold: int,
) -> list[BaselineVerdict]:
    """Whitelisted or frequent values are NonIoC, everything else IoC.

    This method never abstains: every input indicator gets a verdict.
    """
    verdicts = []
    for unique in unique_indicators:
        benign = unique.value in whitelist or corpus_frequency.get(unique.value, 0) >= freq_threshold
        verdicts.append(
            BaselineVerdict(
                value=unique.value,
                itype=unique.itype,
                verdict=Verdict.NON_IOC if benign else Verdict.IOC,
                method="whitelist",
                report_id=unique.report_id,
            )
        )
    return verdicts


def compute_corpus_frequency(
    corpus: Iterable[tuple[str, list[UniqueIndicator]]],
) -> dict[str, int]:
    """Number of corpus reports each indicator value appears in."""
    counts: dict[str, int] = {}
    for _report_id, uniques in corpus:
        for value in {u.value for u in uniques}:
            counts[value] = counts.get(value, 0) + 1
    return counts


def load_whitelist(path: str | Path) -> set[str]:
    values = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            values.add(line)
    return values


# --------- Reputation thresholds ---------


def reputation_label(
    unique_indicators: list[UniqueIndicator],
    reputation: dict[tuple[str, IndicatorType], ReputationRecord],
    threshold: int,
) -> list[BaselineVerdict]:
    """IoC when at least `threshold` vendors flag the value; unlabeled when unknown."""
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    verdicts = []
    for unique in unique_indicators:
        record = reputation.get((unique.value, unique.itype))
        if record is None or not record.in_database:
            verdict = Verdict.UNLABELED
        elif record.malicious_vendor_count >= threshold:
            verdict = Verdict.IOC
        else:
            verdict = Verdict.NON_IOC
        verdicts.append(
            BaselineVerdict(
                value=unique.value,
                itype=unique.itype,
                verdict=verdict,
                method=f"reputation-threshold-{threshold}",
                report_id=unique.report_id,
            )
        )
    return verdicts


def load_reputation_file(path: str | Path) -> dict[tuple[str, IndicatorType], ReputationRecord]:
    entries = json.loads(Path(path).read_text(encoding="utf-8"))
    records = {}
    for entry in entries:
        record = ReputationRecord(
            value=entry["value"],
            itype=IndicatorType(entry["type"]),
            in_database=bool(entry["in_database"]),
            malicious_vendor_count=int(entry.get("malicious_vendor_count", 0)),
        )
        records[(record.value, record.itype)] = record
    return records


class LiveReputationClient:
    """Minimal HTTP reputation lookup with a fixed request rate.

    Endpoint layout: GET {base_url}/{kind}/{value} returning JSON with a
    malicious-vendor count; 404 means not in the database.
    """

    _PATH_BY_FAMILY = {"ip4": "ip_addresses", "domain": "domains", "url": "urls", "hash": "files"}

    def __init__(
        self,
        base_url: str,
        api_key_env_name: str = "IOCLABEL_REPUTATION_KEY",
        min_interval: float = 15.0,
        transport: httpx.BaseTransport | None = None,
    ):
        headers = {}
        api_key = os.environ.get(api_key_env_name, "")
        if api_key:
            headers["x-apikey"] = api_key
        self._base_url = base_url.rstrip("/")
        self._client = httpx.Client(headers=headers, transport=transport, timeout=30.0)
        self._min_interval = min_interval
        self._lock = threading.Lock()
        self._last_request = 0.0

    def _throttle(self) -> None:
        with self._lock:
            wait = self._last_request + self._min_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last_request = time.monotonic()

    def lookup(self, value: str, itype: IndicatorType) -> ReputationRecord:
        self._throttle()
        path = self._PATH_BY_FAMILY[itype.family]
        try:
            response = self._client.get(f"{self._base_url}/{path}/{value}")
        except httpx.HTTPError as exc:
            raise ReputationSourceUnavailable(str(exc)) from exc
        if response.status_code == 404:
            return ReputationRecord(value, itype, in_database=False)
        if response.status_code != 200:
            raise ReputationSourceUnavailable(f"HTTP {response.status_code}")
        try:
            count = int(response.json()["malicious_vendor_count"])
        except (KeyError, ValueError) as exc:
            raise ReputationSourceUnavailable(f"malformed response: {exc}") from exc
        return ReputationRecord(value, itype, in_database=True, malicious_vendor_count=count)

    def close(self) -> None:
        self._client.close()


# --------- Threat-exchange comparison ---------


def exchange_compare(
    report_occurrences: list[IndicatorOccurrence],
    exchange_entries: list[tuple[str, IndicatorType]],
    report_id: str | None = None,
) -> tuple[list[BaselineVerdict], list[tuple[str, IndicatorType]]]:
    """Exchange entries found in the report become IoC verdicts; report
    indicators the exchange never listed stay Unlabeled; exchange entries
    absent from the report are returned separately (they count as false
    positives downstream)."""
    present = {(occ.value, occ.itype) for occ in report_occurrences}
    if report_id is None and report_occurrences:
        report_id = report_occurrences[0].report_id

    verdicts: list[BaselineVerdict] = []
    matched: set[tuple[str, IndicatorType]] = set()
    not_in_report: list[tuple[str, IndicatorType]] = []
    for value, itype in exchange_entries:
        if (value, itype) in present:
            matched.add((value, itype))
            verdicts.append(BaselineVerdict(value, itype, Verdict.IOC, "exchange", report_id))
        else:
            not_in_report.append((value, itype))

    seen: set[tuple[str, IndicatorType]] = set()
    for occ in report_occurrences:
        key = (occ.value, occ.itype)
        if key in matched or key in seen:
            continue
        seen.add(key)
        verdicts.append(BaselineVerdict(occ.value, occ.itype, Verdict.UNLABELED, "exchange", report_id))
    return verdicts, not_in_report


def load_exchange_file(path: str | Path) -> list[tuple[str, IndicatorType]]:
    entries = json.loads(Path(path).read_text(encoding="utf-8"))
    return [(e["value"], IndicatorType(e["type"])) for e in entries]
