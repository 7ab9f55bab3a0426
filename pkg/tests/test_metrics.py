"""Scoring: hand-computed precision/recall/F1 fixtures and gold-file validation."""
from __future__ import annotations

import json
from pathlib import Path

import pytest

from ioclabel.baselines import BaselineVerdict, Verdict
from ioclabel.extract import IndicatorType
from ioclabel.labeling import Label
from ioclabel.metrics import (
    DuplicatePrediction,
    GoldLabel,
    SchemaError,
    load_gold,
    parse_gold,
    score,
)
from ioclabel.voting import FinalLabel

D = IndicatorType.DOMAIN
I4 = IndicatorType.IP4
U = IndicatorType.URL
H = IndicatorType.HASH_SHA256


def gold(*rows) -> list[GoldLabel]:
    return [GoldLabel(value, itype, Label(label), rid) for rid, itype, value, label in rows]


def preds(*rows) -> list[BaselineVerdict]:
    return [
        BaselineVerdict(value, itype, Verdict(verdict), "test", rid)
        for rid, itype, value, verdict in rows
    ]


# Each case: (gold rows, prediction rows, extras, family -> expected numbers).
# The expected tuples are (tp, fp, fn, tn, precision, recall, f1), worked out
# by hand; "total" rows check micro-averaging.
CASES = {
    "perfect-pair": (
        [("r", D, "a.com", "IoC"), ("r", I4, "1.2.3.4", "nonIoC")],
        [("r", D, "a.com", "IoC"), ("r", I4, "1.2.3.4", "nonIoC")],
        [],
        {"domain": (1, 0, 0, 0, 1.0, 1.0, 1.0), "ip4": (0, 0, 0, 1, 0.0, 0.0, 0.0),
         "total": (1, 0, 0, 1, 1.0, 1.0, 1.0)},
    ),
    "all-wrong": (
        [("r", D, "a.com", "IoC"), ("r", D, "b.com", "nonIoC")],
        [("r", D, "a.com", "nonIoC"), ("r", D, "b.com", "IoC")],
        [],
        {"domain": (0, 1, 1, 0, 0.0, 0.0, 0.0)},
    ),
    "precision-two-thirds": (
        [("r", D, "a.com", "IoC"), ("r", D, "b.com", "IoC"), ("r", D, "c.com", "nonIoC")],
        [("r", D, "a.com", "IoC"), ("r", D, "b.com", "IoC"), ("r", D, "c.com", "IoC")],
        [],
        {"domain": (2, 1, 0, 0, 0.6667, 1.0, 0.8)},
    ),
    "recall-two-thirds": (
        [("r", D, "a.com", "IoC"), ("r", D, "b.com", "IoC"), ("r", D, "c.com", "IoC")],
        [("r", D, "a.com", "IoC"), ("r", D, "b.com", "IoC"), ("r", D, "c.com", "nonIoC")],
        [],
        {"domain": (2, 0, 1, 0, 1.0, 0.6667, 0.8)},
    ),
    "harmonic-half": (
        [("r", D, "a.com", "IoC"), ("r", D, "b.com", "IoC"), ("r", D, "c.com", "nonIoC")],
        [("r", D, "a.com", "IoC"), ("r", D, "b.com", "nonIoC"), ("r", D, "c.com", "IoC")],
        [],
        {"domain": (1, 1, 1, 0, 0.5, 0.5, 0.5)},
    ),
    "abstention-counts-against-recall": (
        [("r", D, "a.com", "IoC"), ("r", D, "b.com", "IoC")],
        [("r", D, "a.com", "IoC"), ("r", D, "b.com", "Unlabeled")],
        [],
        {"domain": (1, 0, 1, 0, 1.0, 0.5, 0.6667)},
    ),
    "missing-prediction-acts-like-non-ioc": (
        [("r", D, "a.com", "IoC"), ("r", D, "b.com", "IoC"), ("r", D, "c.com", "nonIoC")],
        [("r", D, "a.com", "IoC")],
        [],
        {"domain": (1, 0, 1, 1, 1.0, 0.5, 0.6667)},
    ),
    "spurious-ioc-is-false-positive": (
        [("r", D, "a.com", "IoC")],
        [("r", D, "a.com", "IoC"), ("r", D, "ghost.com", "IoC")],
        [],
        {"domain": (1, 1, 0, 0, 0.5, 1.0, 0.6667)},
    ),
    "spurious-non-ioc-is-ignored": (
        [("r", D, "a.com", "IoC")],
        [("r", D, "a.com", "IoC"), ("r", D, "ghost.com", "nonIoC")],
        [],
        {"domain": (1, 0, 0, 0, 1.0, 1.0, 1.0)},
    ),
    "spurious-abstention-is-ignored": (
        [("r", D, "a.com", "IoC")],
        [("r", D, "a.com", "IoC"), ("r", D, "ghost.com", "Unlabeled")],
        [],
        {"domain": (1, 0, 0, 0, 1.0, 1.0, 1.0)},
    ),
    "exchange-extras-are-false-positives": (
        [("r", D, "a.com", "IoC")],
        [("r", D, "a.com", "IoC")],
        [("ghost.org", D)],
        {"domain": (1, 1, 0, 0, 0.5, 1.0, 0.6667)},
    ),
    "extras-land-in-their-own-family": (
        [("r", D, "a.com", "IoC")],
        [("r", D, "a.com", "IoC")],
        [("9.9.9.9", I4)],
        {"domain": (1, 0, 0, 0, 1.0, 1.0, 1.0), "ip4": (0, 1, 0, 0, 0.0, 0.0, 0.0),
         "total": (1, 1, 0, 0, 0.5, 1.0, 0.6667)},
    ),
    "micro-average-sums-families": (
        [("r", D, "a.com", "IoC"), ("r", I4, "1.2.3.4", "nonIoC"),
         ("r", U, "http://a.com/x", "IoC"), ("r", H, "ab" * 32, "nonIoC")],
        [("r", D, "a.com", "IoC"), ("r", I4, "1.2.3.4", "IoC"),
         ("r", U, "http://a.com/x", "nonIoC"), ("r", H, "ab" * 32, "nonIoC")],
        [],
        {"domain": (1, 0, 0, 0, 1.0, 1.0, 1.0), "ip4": (0, 1, 0, 0, 0.0, 0.0, 0.0),
         "url": (0, 0, 1, 0, 0.0, 0.0, 0.0), "hash": (0, 0, 0, 1, 0.0, 0.0, 0.0),
         "total": (1, 1, 1, 1, 0.5, 0.5, 0.5)},
    ),
    "rounding-one-third": (
        [("r", D, "a.com", "IoC"), ("r", D, "b.com", "nonIoC"), ("r", D, "c.com", "nonIoC")],
        [("r", D, "a.com", "IoC"), ("r", D, "b.com", "IoC"), ("r", D, "c.com", "IoC")],
        [],
        {"domain": (1, 2, 0, 0, 0.3333, 1.0, 0.5)},
    ),
    "rounding-one-sixth": (
        [("r", D, f"h{i}.com", "IoC") for i in range(6)],
        [("r", D, "h0.com", "IoC")] + [("r", D, f"h{i}.com", "nonIoC") for i in range(1, 6)],
        [],
        {"domain": (1, 0, 5, 0, 1.0, 0.1667, 0.2857)},
    ),
    "two-sevenths-f1": (
        [("r", D, f"h{i}.com", "IoC") for i in range(4)]
        + [("r", D, "x.com", "nonIoC"), ("r", D, "y.com", "nonIoC")],
        [("r", D, "h0.com", "IoC"), ("r", D, "x.com", "IoC"), ("r", D, "y.com", "IoC")]
        + [("r", D, f"h{i}.com", "nonIoC") for i in range(1, 4)],
        [],
        # P = 1/3, R = 1/4, F1 = 2*(1/12)/(7/12) = 2/7.
        {"domain": (1, 2, 3, 0, 0.3333, 0.25, 0.2857)},
    ),
    "empty-inputs": ([], [], [], {"domain": (0, 0, 0, 0, 0.0, 0.0, 0.0),
                                  "total": (0, 0, 0, 0, 0.0, 0.0, 0.0)}),
    "same-value-distinct-reports": (
        [("r1", D, "a.com", "IoC"), ("r2", D, "a.com", "IoC")],
        [("r1", D, "a.com", "IoC"), ("r2", D, "a.com", "nonIoC")],
        [],
        {"domain": (1, 0, 1, 0, 1.0, 0.5, 0.6667)},
    ),
    "report-id-must-match-exactly": (
        [("r1", D, "a.com", "IoC")],
        [(None, D, "a.com", "IoC")],
        [],
        # The prediction keys a different report, so it is a leftover FP and
        # the gold entry goes unanswered.
        {"domain": (0, 1, 1, 0, 0.0, 0.0, 0.0)},
    ),
    "unlabeled-tally": (
        [("r", D, "a.com", "IoC"), ("r", D, "b.com", "nonIoC"), ("r", D, "c.com", "IoC")],
        [("r", D, "a.com", "Unlabeled"), ("r", D, "b.com", "nonIoC")],
        [],
        {"domain": (0, 0, 2, 1, 0.0, 0.0, 0.0)},
    ),
    "balanced-mix": (
        [("r", I4, f"10.0.0.{i}", "IoC") for i in range(5)]
        + [("r", I4, f"10.0.1.{i}", "nonIoC") for i in range(5)],
        [("r", I4, f"10.0.0.{i}", "IoC") for i in range(4)]
        + [("r", I4, "10.0.0.4", "nonIoC")]
        + [("r", I4, "10.0.1.0", "IoC")]
        + [("r", I4, f"10.0.1.{i}", "nonIoC") for i in range(1, 5)],
        [],
        # P = 4/5, R = 4/5, F1 = 0.8.
        {"ip4": (4, 1, 1, 4, 0.8, 0.8, 0.8)},
    ),
}


@pytest.mark.parametrize("name", list(CASES), ids=list(CASES))
def test_scoring_matches_hand_computed_values(name):
    gold_rows, pred_rows, extras, expect = CASES[name]
    report = score(preds(*pred_rows), gold(*gold_rows), extras)
    for family, (tp, fp, fn, tn, precision, recall, f1) in expect.items():
        counts = report.total if family == "total" else report.per_family[family]
        got = counts.as_dict()
        assert (got["tp"], got["fp"], got["fn"], got["tn"]) == (tp, fp, fn, tn), family
        assert got["precision"] == precision, family
        assert got["recall"] == recall, family
        assert got["f1"] == f1, family


def test_total_always_sums_per_family_counts():
    gold_rows, pred_rows, extras, _ = CASES["micro-average-sums-families"]
    report = score(preds(*pred_rows), gold(*gold_rows), extras)
    total = report.total
    for field in ("tp", "fp", "fn", "tn", "labeled", "unlabeled"):
        assert getattr(total, field) == sum(
            getattr(c, field) for c in report.per_family.values()
        )


def test_labeled_and_unlabeled_tallies():
    gold_rows, pred_rows, _, _ = CASES["unlabeled-tally"]
    report = score(preds(*pred_rows), gold(*gold_rows))
    counts = report.per_family["domain"]
    assert counts.labeled == 1
    assert counts.unlabeled == 2


def test_final_labels_score_like_verdicts():
    gold_rows = [("r", D, "a.com", "IoC"), ("r", D, "b.com", "nonIoC")]
    finals = [
        FinalLabel("a.com", D, Label.IOC, 2, 2, ("j",), "r"),
        FinalLabel("b.com", D, Label.NON_IOC, 0, 1, ("j",), "r"),
    ]
    report = score(finals, gold(*gold_rows))
    assert report.total.as_dict()["f1"] == 1.0


def test_duplicate_prediction_raises():
    rows = [("r", D, "a.com", "IoC"), ("r", D, "a.com", "nonIoC")]
    with pytest.raises(DuplicatePrediction):
        score(preds(*rows), gold(("r", D, "a.com", "IoC")))


def test_duplicate_gold_raises():
    doubled = gold(("r", D, "a.com", "IoC"), ("r", D, "a.com", "IoC"))
    with pytest.raises(SchemaError):
        score([], doubled)


def test_report_text_table_has_all_rows():
    report = score(preds(("r", D, "a.com", "IoC")), gold(("r", D, "a.com", "IoC")))
    lines = report.as_text().splitlines()
    names = [line.split()[0] for line in lines[1:]]
    assert names == ["ip4", "domain", "url", "hash", "total"]


# --------- gold dataset files ---------


def minimal_gold_doc() -> dict:
    return {
        "version": "1",
        "reports": [
            {
                "report_id": "r1",
                "source_name": "s",
                "sha256_of_text": "0" * 64,
                "indicators": [
                    {
                        "type": "domain",
                        "value": "a.com",
                        "label": "IoC",
                        "occurrences": [[0, 5]],
                        "provenance": "Consensus",
                        "justifications": ["seen"],
                    }
                ],
            }
        ],
    }


def test_minimal_gold_doc_parses():
    labels, tallies = parse_gold(minimal_gold_doc())
    assert [(l.value, l.label) for l in labels] == [("a.com", Label.IOC)]
    assert tallies.instances["domain"] == 1
    assert tallies.unique["domain"] == {"IoC": 1, "nonIoC": 0}


def braek(doc: dict, path: str, value):
    target = doc
    *parents, last = path.split(".")
    for key in parents:
        target = target[int(key)] if key.isdigit() else target[key]
    if value is ...:
        del target[last]
    else:
        target[last] = value
    return doc


@pytest.mark.parametrize(
    "path, value",
    [
        ("version", "2"),
        ("version", ...),
        ("reports", {}),
        ("reports.0.report_id", ""),
        ("reports.0.source_name", ...),
        ("reports.0.sha256_of_text", ...),
        ("reports.0.indicators.0.type", "ipv6"),
        ("reports.0.indicators.0.label", "Maybe"),
        ("reports.0.indicators.0.value", ""),
        ("reports.0.indicators.0.occurrences", []),
        ("reports.0.indicators.0.occurrences", [[5, 5]]),
        ("reports.0.indicators.0.occurrences", [[-1, 4]]),
        ("reports.0.indicators.0.provenance", "Machine"),
        ("reports.0.indicators.0.justifications", "not a list"),
    ],
    ids=[
        "bad-version", "missing-version", "reports-not-list", "empty-report-id",
        "missing-source", "missing-sha256", "bad-type", "bad-label", "empty-value",
        "no-occurrences", "empty-span", "negative-span", "bad-provenance",
        "justifications-not-list",
    ],
)
def test_schema_violations_raise(path, value):
    doc = braek(minimal_gold_doc(), path, value)
    with pytest.raises(SchemaError):
        parse_gold(doc)


def test_duplicate_indicator_key_raises():
    doc = minimal_gold_doc()
    doc["reports"][0]["indicators"].append(dict(doc["reports"][0]["indicators"][0]))
    with pytest.raises(SchemaError):
        parse_gold(doc)


def test_corpus_gold_file_tallies(corpus_gold):
    labels, tallies = corpus_gold
    assert tallies.total_unique == 109
    assert tallies.total_instances == 119
    assert tallies.instances == {"ip4": 24, "domain": 53, "url": 19, "hash": 23}
    assert tallies.unique_with_label(Label.IOC) == 81
    assert tallies.unique_with_label(Label.NON_IOC) == 28
    assert len(labels) == 109


def test_load_gold_rejects_unparseable_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(SchemaError):
        load_gold(bad)
