"""Automated labeling baselines: whitelist, reputation thresholds, exchange."""
from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ioclabel.baselines import (
    ReputationRecord,
    Verdict,
    compute_corpus_frequency,
    exchange_compare,
    load_exchange_file,
    load_reputation_file,
    load_whitelist,
    reputation_label,
    whitelist_filter,
)
from ioclabel.extract import IndicatorOccurrence, IndicatorType, Span, UniqueIndicator

FIXTURES = Path(__file__).parent / "fixtures"


def unique(value: str, itype: IndicatorType = IndicatorType.DOMAIN) -> UniqueIndicator:
    occ = IndicatorOccurrence(value, value, itype, Span(0, len(value)), "r")
    return UniqueIndicator(value, itype, [occ])


# --------- whitelist + frequency ---------


def test_whitelisted_value_is_non_ioc():
    verdicts = whitelist_filter([unique("github.com")], {"github.com"}, {}, 10)
    assert verdicts[0].verdict is Verdict.NON_IOC
    assert verdicts[0].method == "whitelist"
    assert verdicts[0].report_id == "r"


def test_unseen_value_defaults_to_ioc():
    verdicts = whitelist_filter([unique("strange-host.net")], set(), {"strange-host.net": 1}, 10)
    assert verdicts[0].verdict is Verdict.IOC


def test_frequent_value_crosses_threshold_to_non_ioc():
    # Appears in 12 of 50 reports with a report-count threshold of 10.
    verdicts = whitelist_filter([unique("common-cdn.net")], set(), {"common-cdn.net": 12}, 10)
    assert verdicts[0].verdict is Verdict.NON_IOC


def test_whitelist_method_never_abstains():
    uniques = [unique(f"host-{i}.net") for i in range(25)]
    verdicts = whitelist_filter(uniques, {"host-3.net"}, {"host-7.net": 99}, 10)
    assert len(verdicts) == len(uniques)
    assert all(v.verdict in (Verdict.IOC, Verdict.NON_IOC) for v in verdicts)


def test_corpus_frequency_counts_reports_not_occurrences():
    corpus = [
        ("r1", [unique("a.com"), unique("a.com")]),
        ("r2", [unique("a.com"), unique("b.net")]),
        ("r3", []),
    ]
    assert compute_corpus_frequency(corpus) == {"a.com": 2, "b.net": 1}


def test_load_whitelist_normalizes_and_skips_comments(tmp_path):
    path = tmp_path / "wl.txt"
    path.write_text("# comment\nGitHub.com\n\n  google.com  \n", encoding="utf-8")
    assert load_whitelist(path) == {"github.com", "google.com"}


def test_bundled_whitelist_covers_benign_corpus_hosts():
    whitelist = load_whitelist(FIXTURES / "whitelist.txt")
    assert {"github.com", "microsoft.com", "docs.python.org"} <= whitelist


# --------- reputation thresholds ---------


def rep(value: str, in_db: bool, count: int = 0) -> ReputationRecord:
    return ReputationRecord(value, IndicatorType.DOMAIN, in_db, count)


REPUTATION_CASES = [
    ("in-db-zero-vendors", rep("a.com", True, 0), 1, Verdict.NON_IOC),
    ("below-threshold", rep("a.com", True, 3), 5, Verdict.NON_IOC),
    ("at-threshold", rep("a.com", True, 5), 5, Verdict.IOC),
    ("above-threshold", rep("a.com", True, 9), 5, Verdict.IOC),
    ("not-in-database", rep("a.com", False), 1, Verdict.UNLABELED),
]


@pytest.mark.parametrize(
    "record, threshold, expected",
    [(r, t, e) for _, r, t, e in REPUTATION_CASES],
    ids=[i for i, _, _, _ in REPUTATION_CASES],
)
def test_reputation_verdicts(record, threshold, expected):
    table = {(record.value, record.itype): record}
    verdicts = reputation_label([unique(record.value)], table, threshold)
    assert verdicts[0].verdict is expected
    assert verdicts[0].method == f"reputation-threshold-{threshold}"


def test_value_absent_from_table_is_unlabeled():
    verdicts = reputation_label([unique("missing.net")], {}, 1)
    assert verdicts[0].verdict is Verdict.UNLABELED


def test_reputation_threshold_must_be_positive():
    with pytest.raises(ValueError):
        reputation_label([unique("a.com")], {}, 0)


@given(
    counts=st.lists(st.integers(0, 20), min_size=1, max_size=30),
    low=st.integers(1, 20),
    high=st.integers(1, 20),
)
@settings(max_examples=1000)
def test_raising_vendor_threshold_only_shrinks_ioc_set(counts, low, high):
    low, high = min(low, high), max(low, high)
    table = {}
    uniques = []
    for i, count in enumerate(counts):
        record = ReputationRecord(f"h{i}.com", IndicatorType.DOMAIN, True, count)
        table[(record.value, record.itype)] = record
        uniques.append(unique(record.value))
    ioc_at = lambda t: {
        v.value for v in reputation_label(uniques, table, t) if v.verdict is Verdict.IOC
    }
    assert ioc_at(high) <= ioc_at(low)


def test_load_reputation_file_round_trip():
    table = load_reputation_file(FIXTURES / "reputation.json")
    record = table[("gray-mirror.net", IndicatorType.DOMAIN)]
    assert record.in_database and record.malicious_vendor_count == 3
    assert ("parked-domain.com", IndicatorType.DOMAIN) in table


def test_fixture_reputation_matches_expected_verdicts():
    table = load_reputation_file(FIXTURES / "reputation.json")
    uniques = [
        unique("parked-domain.com"),
        unique("gray-mirror.net"),
        unique("never-seen.org"),
        unique("185.22.64.9", IndicatorType.IP4),
    ]
    by_value = {v.value: v.verdict for v in reputation_label(uniques, table, 1)}
    assert by_value == {
        "parked-domain.com": Verdict.NON_IOC,
        "gray-mirror.net": Verdict.IOC,
        "never-seen.org": Verdict.UNLABELED,
        "185.22.64.9": Verdict.IOC,
    }
    at_five = {v.value: v.verdict for v in reputation_label(uniques, table, 5)}
    assert at_five["gray-mirror.net"] is Verdict.NON_IOC


# --------- threat exchange ---------


def occ(value: str, itype: IndicatorType, start: int = 0) -> IndicatorOccurrence:
    return IndicatorOccurrence(value, value, itype, Span(start, start + len(value)), "r")


def test_exchange_partition():
    report = [
        occ("evil.com", IndicatorType.DOMAIN),
        occ("1.2.3.4", IndicatorType.IP4, 20),
        occ("quiet.net", IndicatorType.DOMAIN, 40),
    ]
    entries = [
        ("evil.com", IndicatorType.DOMAIN),
        ("1.2.3.4", IndicatorType.IP4),
        ("ghost.org", IndicatorType.DOMAIN),
    ]
    verdicts, not_in_report = exchange_compare(report, entries)
    by_value = {(v.value, v.itype): v.verdict for v in verdicts}
    assert by_value == {
        ("evil.com", IndicatorType.DOMAIN): Verdict.IOC,
        ("1.2.3.4", IndicatorType.IP4): Verdict.IOC,
        ("quiet.net", IndicatorType.DOMAIN): Verdict.UNLABELED,
    }
    assert not_in_report == [("ghost.org", IndicatorType.DOMAIN)]
    assert all(v.method == "exchange" and v.report_id == "r" for v in verdicts)


def test_exchange_type_must_match_not_just_value():
    report = [occ("1.2.3.4", IndicatorType.IP4)]
    entries = [("1.2.3.4", IndicatorType.DOMAIN)]
    verdicts, not_in_report = exchange_compare(report, entries)
    assert [v.verdict for v in verdicts] == [Verdict.UNLABELED]
    assert not_in_report == [("1.2.3.4", IndicatorType.DOMAIN)]


def test_exchange_deduplicates_repeated_occurrences():
    report = [occ("evil.com", IndicatorType.DOMAIN), occ("evil.com", IndicatorType.DOMAIN, 50)]
    verdicts, _ = exchange_compare(report, [])
    assert len(verdicts) == 1


def test_empty_report_flags_all_entries():
    verdicts, not_in_report = exchange_compare(
        [], [("evil.com", IndicatorType.DOMAIN)], report_id="r9"
    )
    assert verdicts == []
    assert not_in_report == [("evil.com", IndicatorType.DOMAIN)]


def test_load_exchange_file(corpus_occurrences):
    entries = load_exchange_file(FIXTURES / "exchange.json")
    assert ("updates-checker.net", IndicatorType.DOMAIN) in entries
    assert ("ghost-relay.top", IndicatorType.DOMAIN) in entries
    verdicts, not_in_report = exchange_compare(corpus_occurrences["r01"], entries)
    matched = {v.value for v in verdicts if v.verdict is Verdict.IOC}
    assert "updates-checker.net" in matched
    assert "185.22.64.9" in matched
    assert set(not_in_report) == {
        ("ghost-relay.top", IndicatorType.DOMAIN),
        ("172.94.22.8", IndicatorType.IP4),
    }
