"""High-recall indicator extraction, refang normalization, validation, dedup.

Candidates are surfaced aggressively (loose octets, unknown TLDs, odd schemes
all match) and precision is restored by validate() and downstream labeling.
All spans are byte offsets into the UTF-8 encoding of the report text.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import NamedTuple

log = logging.getLogger(__name__)


class IndicatorType(str, Enum):
    IP4 = "ip4"
    DOMAIN = "domain"
    URL = "url"
    HASH_MD5 = "hash-md5"
    HASH_SHA1 = "hash-sha1"
    HASH_SHA256 = "hash-sha256"

    @property
    def family(self) -> str:
        """Coarse type used for prompts, thresholds, and per-type metrics."""
        if self.value.startswith("hash-"):
            return "hash"
        return self.value


FAMILIES = ("ip4", "domain", "url", "hash")

# Hash subtype is decided by hex length alone.
_HASH_TYPE_BY_LEN = {
    32: IndicatorType.HASH_MD5,
    40: IndicatorType.HASH_SHA1,
    64: IndicatorType.HASH_SHA256,
}


def hash_type_for(value: str) -> IndicatorType:
    try:
        return _HASH_TYPE_BY_LEN[len(value)]
    except KeyError:
        raise ValueError(f"no hash type with hex length {len(value)}") from None


class Span(NamedTuple):
    start: int
    end: int


@dataclass(frozen=True)
class IndicatorOccurrence:
    """One match of a candidate indicator in a report."""

    raw: str
    value: str
    itype: IndicatorType
    span: Span
    report_id: str


@dataclass
class UniqueIndicator:
    """All occurrences of one (value, type) within a report."""

    value: str
    itype: IndicatorType
    occurrences: list[IndicatorOccurrence] = field(default_factory=list)

    @property
    def report_id(self) -> str:
        return self.occurrences[0].report_id


# --------- Refang ---------

_RE_HXXP = re.compile("hxxp", re.IGNORECASE)

# Applied in this order on every pass.
_REFANG_LITERALS = (
    ("[.]", "."),
    ("(.)", "."),
    ("{.}", "."),
    ("[:]", ":"),
    ("[@]", "@"),
    ("[://]", "://"),
)


def _refang_once(s: str) -> str:
    s = _RE_HXXP.sub("http", s)
    for token, repl in _REFANG_LITERALS:
        s = s.replace(token, repl)
    return s


def refang(raw: str) -> str:
    """Rewrite defanged forms (hxxp, [.], [:], [@], [://]) to armed ones.

    Runs the rewrite table to a fixed point so the result is idempotent even
    for nested defang tokens such as "[[.]]".
    """
    current = raw
    while True:
        rewritten = _refang_once(current)
        if rewritten == current:
            return current
        current = rewritten


# --------- Candidate patterns ---------

_DOT = r"(?:\[\.\]|\(\.\)|\{\.\}|\.)"
_LABEL = r"[A-Za-z0-9](?:[A-Za-z0-9-]{0,61}[A-Za-z0-9])?"
_TLD_SHAPED = r"(?:xn--[A-Za-z0-9-]{1,59}|[A-Za-z]{2,63})"

_IP4_RE = re.compile(
    rf"(?<![\w.-])\d{{1,3}}(?:{_DOT}\d{{1,3}}){{3}}(?!\.?\d)"
)

_DOMAIN_RE = re.compile(
    rf"(?<![\w.-])(?:{_LABEL}{_DOT})+{_TLD_SHAPED}(?![\w-])"
)

_HASH_RE = re.compile(
    r"(?<![0-9a-fA-F])(?:[0-9a-fA-F]{64}|[0-9a-fA-F]{40}|[0-9a-fA-F]{32})(?![0-9a-fA-F])"
)

_URL_RE = re.compile(
    rf"(?<![\w.-])"
    rf"(?:h(?:xx|\.\.)ps?|https?|ftps?)"
    rf"(?:\[://\]|\[:\]//|://)"
    rf"[A-Za-z0-9-]{{1,63}}(?:{_DOT}[A-Za-z0-9-]{{1,63}})+"
    rf"(?:(?::|\[:\])\d{{1,5}})?"
    rf"(?:[/?#][^\s<>\"'`]*)?",
    re.IGNORECASE,
)

# Sentence punctuation stripped from the tail of URL matches.
_TRAILING_JUNK = ".,;:!?'\""
_CLOSERS = {")": "(", "]": "[", "}": "{"}


def _trim_url_tail(match_text: str) -> str:
    while match_text:
        last = match_text[-1]
        if last in _TRAILING_JUNK:
            match_text = match_text[:-1]
            continue
        if last in _CLOSERS and match_text.count(_CLOSERS[last]) < match_text.count(last):
            match_text = match_text[:-1]
            continue
        break
    return match_text


class _ByteIndex:
    """Char-offset to byte-offset conversion for one text."""

    def __init__(self, text: str) -> None:
        self._identity = text.isascii()
        if not self._identity:
            offsets = [0]
            total = 0
            for ch in text:
                total += len(ch.encode("utf-8"))
                offsets.append(total)
            self._offsets = offsets

    def to_bytes(self, char_offset: int) -> int:
        if self._identity:
            return char_offset
        return self._offsets[char_offset]


def _normalize(raw: str, itype: IndicatorType) -> str:
    armed = refang(raw)
    if itype is IndicatorType.IP4:
        return armed
    if itype is IndicatorType.URL:
        return _normalize_url(armed)
    # Domains and hashes are case-insensitive.
    return armed.lower()


def _normalize_url(armed: str) -> str:
    """Lowercase scheme and host, keep path/query case as written."""
    sep = armed.find("://")
    if sep < 0:
        return armed
    scheme = armed[:sep].lower()
    rest = armed[sep + 3 :]
    cut = len(rest)
    for stop in "/?#":
        pos = rest.find(stop)
        if pos >= 0:
            cut = min(cut, pos)
    return f"{scheme}://{rest[:cut].lower()}{rest[cut:]}"


def extract_candidates(text: str, report_id: str) -> list[IndicatorOccurrence]:
    """Return every indicator-shaped candidate in the text, recall-first.

    Matches of different types may overlap (a URL also yields its embedded
    domain or IP); matches of one type never overlap each other. No
    validation happens here.
    """
    if not text:
        return []
    index = _ByteIndex(text)
    found: list[IndicatorOccurrence] = []

    def add(raw: str, char_start: int, itype: IndicatorType) -> None:
        value = _normalize(raw, itype)
        if itype.family == "hash":
            itype = _HASH_TYPE_BY_LEN[len(value)]
        span = Span(index.to_bytes(char_start), index.to_bytes(char_start + len(raw)))
        found.append(IndicatorOccurrence(raw, value, itype, span, report_id))

    for m in _URL_RE.finditer(text):
        raw = _trim_url_tail(m.group())
        if raw:
            add(raw, m.start(), IndicatorType.URL)
    for m in _DOMAIN_RE.finditer(text):
        add(m.group(), m.start(), IndicatorType.DOMAIN)
    for m in _IP4_RE.finditer(text):
        add(m.group(), m.start(), IndicatorType.IP4)
    for m in _HASH_RE.finditer(text):
        add(m.group(), m.start(), IndicatorType.HASH_SHA256)  # re-typed by length in add()

    found.sort(key=lambda o: (o.span.start, o.itype.value))
    return found


# --------- Validation ---------


class RejectReason(str, Enum):
    BAD_OCTET = "BadOctet"
    UNKNOWN_TLD = "UnknownTld"
    BAD_SCHEME = "BadScheme"
    BAD_HEX_LENGTH = "BadHexLength"


@dataclass(frozen=True)
class Validation:
    accepted: bool
    reason: RejectReason | None = None


_ACCEPT = Validation(True)

_HOST_LABEL_RE = re.compile(r"^[a-z0-9](?:[a-z0-9-]{0,61}[a-z0-9])?$")
_HEX_RE = re.compile(r"^[0-9a-f]+$")

VALID_URL_SCHEMES = frozenset({"http", "https", "ftp"})


def _check_ip4(value: str) -> Validation:
    parts = value.split(".")
    if len(parts) != 4 or any(not p.isdigit() or not 0 <= int(p) <= 255 for p in parts):
        return Validation(False, RejectReason.BAD_OCTET)
    return _ACCEPT


def _check_domain(value: str, tld_set: frozenset[str] | set[str]) -> Validation:
    labels = value.split(".")
    if len(labels) < 2 or not all(_HOST_LABEL_RE.match(l) for l in labels):
        return Validation(False, RejectReason.UNKNOWN_TLD)
    if labels[-1] not in tld_set:
        return Validation(False, RejectReason.UNKNOWN_TLD)
    return _ACCEPT


def validate(candidate: IndicatorOccurrence, tld_set: frozenset[str] | set[str]) -> Validation:
    """Accept or reject one candidate with a machine-readable reason."""
    value = candidate.value
    if candidate.itype is IndicatorType.IP4:
        return _check_ip4(value)

    if candidate.itype is IndicatorType.DOMAIN:
        return _check_domain(value, tld_set)

    if candidate.itype is IndicatorType.URL:
        sep = value.find("://")
        scheme = value[:sep] if sep >= 0 else ""
        if scheme not in VALID_URL_SCHEMES:
            return Validation(False, RejectReason.BAD_SCHEME)
        host = value[sep + 3 :]
        for stop in "/?#":
            pos = host.find(stop)
            if pos >= 0:
                host = host[:pos]
        host = host.rsplit(":", 1)[0] if re.search(r":\d{1,5}$", host) else host
        if re.fullmatch(r"[\d.]+", host):
            return _check_ip4(host)
        return _check_domain(host, tld_set)

    # Hashes: charset plus one of the three lengths.
    if len(value) not in _HASH_TYPE_BY_LEN or not _HEX_RE.match(value):
        return Validation(False, RejectReason.BAD_HEX_LENGTH)
    return _ACCEPT


def dedupe(occurrences: list[IndicatorOccurrence]) -> list[UniqueIndicator]:
    """Group occurrences by (value, type), ordered by first appearance."""
    groups: dict[tuple[str, IndicatorType], UniqueIndicator] = {}
    for occ in occurrences:
        key = (occ.value, occ.itype)
        if key not in groups:
            groups[key] = UniqueIndicator(occ.value, occ.itype)
        groups[key].occurrences.append(occ)
    uniques = list(groups.values())
    for u in uniques:
        u.occurrences.sort(key=lambda o: o.span.start)
    return uniques


def extract_validated(
    text: str, report_id: str, tld_set: frozenset[str] | set[str]
) -> list[IndicatorOccurrence]:
    """extract_candidates filtered through validate(); the usual entry point."""
    return [
        occ
        for occ in extract_candidates(text, report_id)
        if validate(occ, tld_set).accepted
    ]


def load_tld_set(path: str | Path | None = None) -> frozenset[str]:
    """Read a TLD file (one per line, '#' comments). None loads the bundled snapshot."""
    if path is None:
        source = resources.files("ioclabel.data").joinpath("tlds.txt")
        content = source.read_text(encoding="utf-8")
    else:
        content = Path(path).read_text(encoding="utf-8")
    tlds = set()
    for line in content.splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            tlds.add(line)
    if not tlds:
        log.warning("TLD source %s is empty; every domain will be rejected", path or "<bundled>")
    return frozenset(tlds)
