"""Shared fixtures: the bundled report corpus and a scripted-session runner."""
from __future__ import annotations

import json
from pathlib import Path

import pytest

from ioclabel.annotation import AnnotationMode, ReportDoc
from ioclabel.extract import IndicatorType, dedupe, extract_validated, load_tld_set
from ioclabel.labeling import Label
from ioclabel.metrics import load_gold
from ioclabel.store import SessionManager, SessionStore
from ioclabel.voting import FinalLabel

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS_DIR = FIXTURES / "corpus"
HITL_DIR = FIXTURES / "hitl"


@pytest.fixture(scope="session")
def tld_set():
    return load_tld_set()


@pytest.fixture(scope="session")
def corpus_texts() -> dict[str, str]:
    return {
        path.stem: path.read_text(encoding="utf-8")
        for path in sorted(CORPUS_DIR.glob("r*.txt"))
    }


@pytest.fixture(scope="session")
def corpus_occurrences(corpus_texts, tld_set):
    return {
        rid: extract_validated(text, rid, tld_set)
        for rid, text in corpus_texts.items()
    }


@pytest.fixture(scope="session")
def corpus_gold():
    return load_gold(CORPUS_DIR / "gold.json")


@pytest.fixture(scope="session")
def mock_fixture_path() -> Path:
    return CORPUS_DIR / "mock_fixture.json"


@pytest.fixture(scope="session")
def faulty_fixture_path() -> Path:
    return CORPUS_DIR / "mock_fixture_faulty.json"


@pytest.fixture(scope="session")
def mock_mapping(mock_fixture_path) -> dict:
    return json.loads(mock_fixture_path.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def hitl_script() -> dict:
    return json.loads((HITL_DIR / "script.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def golden_export() -> bytes:
    return (HITL_DIR / "golden_export.json").read_bytes()


# --------- scripted-session helpers ---------


def counter_clock(start: float = 1000.0, step: float = 1.0):
    """Deterministic stand-in for time.time()."""
    state = {"now": start - step}

    def clock() -> float:
        state["now"] += step
        return state["now"]

    return clock


def script_inputs(script: dict, tld_set):
    """Build session inputs (reports, indicators, machine labels) from a script."""
    reports = [
        ReportDoc(r["report_id"], r["source_name"], r["text"]) for r in script["reports"]
    ]
    indicators = {}
    machine = {}
    for doc in reports:
        uniques = dedupe(extract_validated(doc.text, doc.report_id, tld_set))
        indicators[doc.report_id] = uniques
        by_key = {(m["type"], m["value"]): m for m in script["machine"][doc.report_id]}
        finals = []
        for u in uniques:
            entry = by_key[(u.itype.value, u.value)]
            finals.append(
                FinalLabel(
                    value=u.value,
                    itype=u.itype,
                    label=Label(entry["label"]),
                    ioc_votes=1 if entry["label"] == "IoC" else 0,
                    total_votes=1,
                    justifications=(entry["justification"],),
                    report_id=doc.report_id,
                )
            )
        machine[doc.report_id] = finals
    return reports, indicators, machine


def apply_ops(manager: SessionManager, session_id: str, ops) -> None:
    for op in ops:
        if op[0] == "view":
            manager.view_report(session_id, op[1], op[2])
        else:
            _kind, analyst, rid, wire, value, label, comment = op
            manager.record_label(
                session_id, analyst, rid, IndicatorType(wire), value, Label(label),
                comment=comment,
            )


STAGES = ("create", "junior", "disputes", "escalate", "senior", "finalize")


def run_script(
    script: dict,
    tld_set,
    store_root: Path | None = None,
    through: str = "finalize",
    mode: str | None = None,
) -> SessionManager:
    """Run the scripted session up to and including the named stage."""
    assert through in STAGES
    store = SessionStore(store_root) if store_root is not None else None
    manager = SessionManager(store, clock=counter_clock())
    reports, indicators, machine = script_inputs(script, tld_set)
    session_id = script["session_id"]
    manager.create_session(
        session_id,
        AnnotationMode(mode or script["mode"]),
        reports,
        indicators,
        machine,
        script["analysts"],
    )
    stop = STAGES.index(through)
    if stop >= 1:
        apply_ops(manager, session_id, script["junior_ops"])
    if stop >= 2:
        manager.detect_disputes(session_id)
    if stop >= 3:
        manager.escalate(session_id, script["senior"])
    if stop >= 4:
        apply_ops(manager, session_id, script["senior_ops"])
    if stop >= 5:
        manager.finalize(session_id)
    return manager
