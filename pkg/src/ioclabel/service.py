"""HTTP API over annotation sessions.

Every endpoint authenticates with the X-Analyst-Token header. In blind mode
the server strips machine labels and justifications from every response sent
to a junior analyst; the escalated senior and guided-mode analysts see them.
"""
from __future__ import annotations

import logging
import threading

from fastapi import Depends, FastAPI, Header, HTTPException, Response
from pydantic import BaseModel

from .annotation import (
    AnnotationError,
    AnnotationMode,
    AnnotationSession,
    IncompleteLabeling,
    NoDisputes,
    NotAssigned,
    SessionFinalized,
    SessionState,
    UnknownIndicator,
    dataset_bytes,
)
from .extract import IndicatorType
from .labeling import Label
from .store import SessionManager

log = logging.getLogger(__name__)

TOKEN_HEADER = "X-Analyst-Token"


class LabelBody(BaseModel):
    type: str
    value: str
    label: str
    comment: str | None = None


class EscalateBody(BaseModel):
    senior_id: str


def _is_senior(session: AnnotationSession, analyst: str) -> bool:
    return session.senior_id is not None and analyst == session.senior_id


def _sees_machine(session: AnnotationSession, analyst: str) -> bool:
    return session.mode is AnnotationMode.GUIDED or _is_senior(session, analyst)


def create_app(manager: SessionManager, tokens: dict[str, str] | None = None) -> FastAPI:
    """Build the API app. `tokens` maps header values to analyst ids; when
    None, the header value itself is taken as the analyst id."""
    app = FastAPI(title="ioclabel annotation service")
    write_lock = threading.Lock()

    def authed(x_analyst_token: str | None = Header(default=None)) -> str:
        if not x_analyst_token:
            raise HTTPException(status_code=401, detail="missing analyst token")
        if tokens is None:
            return x_analyst_token
        analyst = tokens.get(x_analyst_token)
        if analyst is None:
            raise HTTPException(status_code=401, detail="unknown analyst token")
        return analyst

    def session_or_404(session_id: str) -> AnnotationSession:
        try:
            return manager.get(session_id)
        except (KeyError, FileNotFoundError):
            raise HTTPException(status_code=404, detail=f"no session {session_id!r}") from None

    def _indicator_payload(
        session: AnnotationSession, report_id: str, analyst: str
    ) -> list[dict]:
        show_machine = _sees_machine(session, analyst)
        senior = _is_senior(session, analyst)
        payload = []
        for ref in session.indicators[report_id]:
            item: dict = {
                "value": ref.value,
                "type": ref.itype.value,
                "occurrences": [[s.start, s.end] for s in ref.occurrences],
            }
            if show_machine:
                machine = session.machine_labels.get((report_id, ref.itype, ref.value))
                if machine is not None:
                    item["machine"] = {
                        "label": machine.label.value,
                        "justifications": list(machine.justifications),
                    }
            if senior:
                juniors = {}
                for junior in session.assignments[report_id]:
                    entry = session.analyst_label(report_id, ref.itype, ref.value, junior)
                    if entry is not None:
                        juniors[junior] = entry.label.value
                item["junior_labels"] = juniors
            mine = session.analyst_label(report_id, ref.itype, ref.value, analyst)
            item["my_label"] = (
                None
                if mine is None
                else {"label": mine.label.value, "comments": list(mine.comments)}
            )
            payload.append(item)
        return payload

    @app.get("/sessions/{session_id}/reports")
    def list_reports(session_id: str, analyst: str = Depends(authed)):
        session = session_or_404(session_id)
        if _is_senior(session, analyst):
            report_ids = sorted(session.disputed_reports)
        else:
            report_ids = sorted(
                rid for rid, pair in session.assignments.items() if analyst in pair
            )
        reports = []
        for rid in report_ids:
            refs = session.indicators[rid]
            labeled = sum(
                1
                for ref in refs
                if session.analyst_label(rid, ref.itype, ref.value, analyst) is not None
            )
            reports.append(
                {
                    "report_id": rid,
                    "source_name": session.docs[rid].source_name,
                    "indicator_count": len(refs),
                    "labeled_count": labeled,
                    "disputed": rid in session.disputed_reports,
                }
            )
        return {
            "session_id": session.session_id,
            "mode": session.mode.value,
            "state": session.state.value,
            "analyst_id": analyst,
            "reports": reports,
        }

    @app.get("/sessions/{session_id}/reports/{report_id}")
    def get_report(session_id: str, report_id: str, analyst: str = Depends(authed)):
        session = session_or_404(session_id)
        if report_id not in session.docs:
            raise HTTPException(status_code=404, detail=f"no report {report_id!r}")
        assigned = analyst in session.assignments[report_id]
        senior_here = _is_senior(session, analyst) and report_id in session.disputed_reports
        if not assigned and not senior_here:
            raise HTTPException(status_code=403, detail="report not assigned to you")
        if session.state is not SessionState.FINALIZED:
            with write_lock:
                manager.view_report(session_id, analyst, report_id)
        doc = session.docs[report_id]
        return {
            "report_id": report_id,
            "source_name": doc.source_name,
            "text": doc.text,
            "mode": session.mode.value,
            "state": session.state.value,
            "indicators": _indicator_payload(session, report_id, analyst),
        }

    @app.post("/sessions/{session_id}/reports/{report_id}/labels")
    def post_label(
        session_id: str, report_id: str, body: LabelBody, analyst: str = Depends(authed)
    ):
        session = session_or_404(session_id)
        if report_id not in session.docs:
            raise HTTPException(status_code=404, detail=f"no report {report_id!r}")
        try:
            itype = IndicatorType(body.type)
            label = Label(body.label)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        try:
            with write_lock:
                manager.record_label(
                    session_id, analyst, report_id, itype, body.value, label,
                    comment=body.comment,
                )
        except SessionFinalized as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        except UnknownIndicator as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        except NotAssigned as exc:
            raise HTTPException(status_code=403, detail=str(exc)) from None
        return {
            "report_id": report_id,
            "type": body.type,
            "value": body.value,
            "label": body.label,
            "analyst_id": analyst,
        }

    @app.get("/sessions/{session_id}/disputes")
    def get_disputes(session_id: str, analyst: str = Depends(authed)):
        session = session_or_404(session_id)
        try:
            with write_lock:
                disputes = manager.detect_disputes(session_id)
        except IncompleteLabeling as exc:
            raise HTTPException(
                status_code=409,
                detail={"error": "IncompleteLabeling", "missing": [list(m) for m in exc.missing]},
            ) from None
        except SessionFinalized:
            disputes = session.disputes or []
        hide_machine = (
            session.mode is AnnotationMode.BLIND and not _sees_machine(session, analyst)
        )
        rows = []
        for d in disputes:
            labels_seen = {
                src: lab.value
                for src, lab in d.labels_seen
                if not (hide_machine and src == "machine")
            }
            rows.append(
                {
                    "report_id": d.report_id,
                    "type": d.itype.value,
                    "value": d.value,
                    "labels_seen": labels_seen,
                }
            )
        return {"state": session.state.value, "disputes": rows}

    @app.post("/sessions/{session_id}/escalate")
    def post_escalate(session_id: str, body: EscalateBody, analyst: str = Depends(authed)):
        session = session_or_404(session_id)
        try:
            with write_lock:
                manager.escalate(session_id, body.senior_id)
        except SessionFinalized as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        except NoDisputes as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        return {
            "senior_id": body.senior_id,
            "disputed_reports": sorted(session.disputed_reports),
        }

    @app.post("/sessions/{session_id}/finalize")
    def post_finalize(session_id: str, analyst: str = Depends(authed)):
        session = session_or_404(session_id)
        try:
            with write_lock:
                manager.finalize(session_id)
        except SessionFinalized as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        except IncompleteLabeling as exc:
            raise HTTPException(
                status_code=409,
                detail={"error": "IncompleteLabeling", "missing": [list(m) for m in exc.missing]},
            ) from None
        return {"state": session.state.value}

    @app.get("/sessions/{session_id}/export")
    def get_export(session_id: str, analyst: str = Depends(authed)):
        session = session_or_404(session_id)
        try:
            fragment = session.export_fragment()
        except AnnotationError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        return Response(content=dataset_bytes(fragment), media_type="application/json")

    return app
