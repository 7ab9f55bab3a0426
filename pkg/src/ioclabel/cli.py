"""Command line interface: one binary for every pipeline stage plus the
annotation service. Exit codes: 0 success, 1 usage or validation error,
2 I/O or backend failure."""
from __future__ import annotations

import logging
import math
import sys
from pathlib import Path

import click

from . import artifacts
from .annotation import (
    AnnotationError,
    AnnotationMode,
    ReportDoc,
    dataset_bytes,
    export_dataset,
)
from .backends import BackendUnavailable, HttpCompletionBackend, backend_from_fixture
from .baselines import (
    ReputationSourceUnavailable,
    compute_corpus_frequency,
    exchange_compare,
    load_exchange_file,
    load_reputation_file,
    load_whitelist,
    reputation_label,
    whitelist_filter,
)
from .config import Config, ConfigError, load_config, parse_threshold_arg
from .extract import dedupe, extract_validated, load_tld_set
from .labeling import default_templates, label_report
from .metrics import DuplicatePrediction, SchemaError, load_gold, score
from .segment import segment as segment_text
from .store import SessionManager, SessionStore
from .voting import consolidate as consolidate_votes

log = logging.getLogger(__name__)


def _cfg(ctx: click.Context, **overrides) -> Config:
    thresholds = overrides.pop("thresholds", None)
    if thresholds:
        overrides["thresholds"] = dict(parse_threshold_arg(t) for t in thresholds)
    return load_config(config_file=ctx.obj.get("config_file"), overrides=overrides)


def _emit(doc: dict, out_path: str | None) -> None:
    if out_path:
        artifacts.write_artifact(out_path, doc)
    else:
        click.echo(artifacts.dumps(doc), nl=False)


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


@click.group()
@click.option("--config", "config_file", type=click.Path(), default=None, help="TOML or JSON settings file.")
@click.pass_context
def cli(ctx: click.Context, config_file: str | None) -> None:
    """Indicator extraction, machine labeling, baselines, scoring, and
    human-review annotation sessions."""
    ctx.obj = {"config_file": config_file}


@cli.command("extract")
@click.option("--in", "in_path", required=True, type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--report-id", default=None, help="Defaults to the input file stem.")
@click.option("--tld-file", default=None, type=click.Path())
@click.pass_context
def extract_cmd(ctx, in_path, out_path, report_id, tld_file):
    """Find and validate indicators in a report text file."""
    cfg = _cfg(ctx, tld_file=tld_file)
    text = _read_text(in_path)
    rid = report_id or Path(in_path).stem
    occurrences = extract_validated(text, rid, load_tld_set(cfg.tld_file))
    _emit(artifacts.occurrences_doc(rid, occurrences), out_path)


@cli.command("segment")
@click.option("--in", "in_path", required=True, type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--report-id", default=None)
@click.option("--window", type=int, default=None)
@click.option("--overlap", type=float, default=None)
@click.pass_context
def segment_cmd(ctx, in_path, out_path, report_id, window, overlap):
    """Split a report into overlapping windows."""
    cfg = _cfg(ctx, window=window, overlap=overlap)
    text = _read_text(in_path)
    rid = report_id or Path(in_path).stem
    segments = segment_text(text, cfg.segmentation(), rid)
    doc = {
        "report_id": rid,
        "window_size": cfg.window,
        "overlap_fraction": cfg.overlap,
        "segments": [
            {"index": s.index, "span": [s.span.start, s.span.end], "text": s.text}
            for s in segments
        ],
    }
    _emit(doc, out_path)


@cli.command("label")
@click.option("--in", "in_path", required=True, type=click.Path(), help="Report text file.")
@click.option("--occurrences", "occ_path", required=True, type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--backend", "backend_kind", type=click.Choice(["mock", "http"]), default=None)
@click.option("--mock-fixture", default=None, type=click.Path())
@click.option("--window", type=int, default=None)
@click.option("--overlap", type=float, default=None)
@click.option("--max-concurrent", type=int, default=None)
@click.option("--retry-limit", type=int, default=None)
@click.pass_context
def label_cmd(ctx, in_path, occ_path, out_path, backend_kind, mock_fixture, window, overlap, max_concurrent, retry_limit):
    """Ask the completion backend to label extracted indicators."""
    cfg = _cfg(
        ctx,
        backend_kind=backend_kind,
        mock_fixture=mock_fixture,
        window=window,
        overlap=overlap,
        max_concurrent=max_concurrent,
        retry_limit=retry_limit,
    )
    text = _read_text(in_path)
    doc = artifacts.read_artifact(occ_path)
    occurrences = artifacts.occurrences_from_doc(doc)
    rid = doc.get("report_id", Path(in_path).stem)

    if cfg.backend_kind == "mock":
        if not cfg.mock_fixture:
            raise ConfigError("mock backend needs --mock-fixture")
        backend = backend_from_fixture(cfg.mock_fixture)
    else:
        backend = HttpCompletionBackend(cfg.backend_config())

    segments = segment_text(text, cfg.segmentation(), rid)
    records, issues = label_report(
        backend,
        default_templates(),
        segments,
        occurrences,
        max_concurrent=cfg.max_concurrent,
        retry_limit=cfg.retry_limit,
    )
    _emit(artifacts.records_doc(rid, records, issues), out_path)


@cli.command("consolidate")
@click.option("--in", "records_path", required=True, type=click.Path(), help="Label records artifact.")
@click.option("--occurrences", "occ_path", required=True, type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--threshold", "thresholds", multiple=True, help="family=ratio, repeatable.")
@click.pass_context
def consolidate_cmd(ctx, records_path, occ_path, out_path, thresholds):
    """Vote per-segment labels into one verdict per indicator."""
    cfg = _cfg(ctx, thresholds=list(thresholds))
    records_doc = artifacts.read_artifact(records_path)
    records, _issues = artifacts.records_from_doc(records_doc)
    occ_doc = artifacts.read_artifact(occ_path)
    uniques = dedupe(artifacts.occurrences_from_doc(occ_doc))
    finals, coverage = consolidate_votes(records, uniques, cfg.vote_thresholds())
    rid = occ_doc.get("report_id", records_doc.get("report_id", ""))
    _emit(artifacts.finals_doc(rid, finals, coverage), out_path)


@cli.group("baseline")
def baseline_group():
    """Non-LLM labeling methods for comparison."""


@baseline_group.command("whitelist")
@click.option("--in", "in_paths", required=True, multiple=True, type=click.Path(),
              help="Occurrence artifacts; all together form the frequency corpus.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--whitelist", "whitelist_path", default=None, type=click.Path())
@click.option("--freq-threshold", type=int, default=None,
              help="Report-count cutoff; defaults to 20% of the corpus size.")
@click.pass_context
def baseline_whitelist(ctx, in_paths, out_path, whitelist_path, freq_threshold):
    """Whitelist plus corpus-frequency filtering."""
    cfg = _cfg(ctx, whitelist=whitelist_path)
    if not cfg.whitelist:
        raise ConfigError("whitelist baseline needs --whitelist")
    whitelist = load_whitelist(cfg.whitelist)
    corpus = []
    for path in in_paths:
        doc = artifacts.read_artifact(path)
        corpus.append((doc.get("report_id", ""), dedupe(artifacts.occurrences_from_doc(doc))))
    if freq_threshold is None:
        freq_threshold = max(1, math.ceil(0.2 * len(corpus)))
    frequency = compute_corpus_frequency(corpus)
    verdicts = []
    for _rid, uniques in corpus:
        verdicts.extend(whitelist_filter(uniques, whitelist, frequency, freq_threshold))
    _emit(artifacts.verdicts_doc("whitelist", verdicts), out_path)


@baseline_group.command("reputation")
@click.option("--in", "in_path", required=True, type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--reputation-file", default=None, type=click.Path())
@click.option("--vendor-threshold", type=int, default=1, show_default=True)
@click.pass_context
def baseline_reputation(ctx, in_path, out_path, reputation_file, vendor_threshold):
    """Reputation database lookups with a vendor-count threshold."""
    cfg = _cfg(ctx, reputation_file=reputation_file)
    if not cfg.reputation_file:
        raise ConfigError("reputation baseline needs --reputation-file")
    reputation = load_reputation_file(cfg.reputation_file)
    doc = artifacts.read_artifact(in_path)
    uniques = dedupe(artifacts.occurrences_from_doc(doc))
    verdicts = reputation_label(uniques, reputation, vendor_threshold)
    _emit(artifacts.verdicts_doc(f"reputation-threshold-{vendor_threshold}", verdicts), out_path)


@baseline_group.command("exchange")
@click.option("--in", "in_path", required=True, type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--exchange-file", default=None, type=click.Path())
@click.pass_context
def baseline_exchange(ctx, in_path, out_path, exchange_file):
    """Compare report indicators against a threat exchange listing."""
    cfg = _cfg(ctx, exchange_file=exchange_file)
    if not cfg.exchange_file:
        raise ConfigError("exchange baseline needs --exchange-file")
    entries = load_exchange_file(cfg.exchange_file)
    doc = artifacts.read_artifact(in_path)
    occurrences = artifacts.occurrences_from_doc(doc)
    verdicts, not_in_report = exchange_compare(occurrences, entries, doc.get("report_id"))
    _emit(artifacts.verdicts_doc("exchange", verdicts, not_in_report), out_path)


@cli.command("evaluate")
@click.option("--pred", "pred_paths", required=True, multiple=True, type=click.Path(),
              help="Finals or baseline verdict artifacts, repeatable.")
@click.option("--gold", "gold_path", required=True, type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def evaluate_cmd(ctx, pred_paths, gold_path, out_path):
    """Score predictions against a gold dataset."""
    gold, tallies = load_gold(gold_path)
    predictions = []
    extras = []
    for path in pred_paths:
        doc = artifacts.read_artifact(path)
        if "finals" in doc:
            predictions.extend(artifacts.finals_from_doc(doc))
        elif "verdicts" in doc:
            verdicts, not_in_report = artifacts.verdicts_from_doc(doc)
            predictions.extend(verdicts)
            extras.extend(not_in_report)
        else:
            raise SchemaError(f"{path}: not a finals or verdicts artifact")
    report = score(predictions, gold, extras_not_in_report=extras)
    doc = report.as_dict()
    doc["gold_tallies"] = {
        "instances": tallies.instances,
        "unique": tallies.unique,
        "total_instances": tallies.total_instances,
        "total_unique": tallies.total_unique,
    }
    if out_path:
        artifacts.write_artifact(out_path, doc)
    click.echo(report.as_text())


@cli.group("session")
def session_group():
    """Human-review annotation sessions."""


def _manager(store_dir: str) -> SessionManager:
    return SessionManager(SessionStore(store_dir))


@session_group.command("create")
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--id", "session_id", required=True)
@click.option("--mode", type=click.Choice(["blind", "guided"]), required=True)
@click.option("--reports", "reports_path", required=True, type=click.Path(),
              help="JSON list of {report_id, source_name, text}.")
@click.option("--occurrences", "occ_paths", required=True, multiple=True, type=click.Path())
@click.option("--finals", "finals_paths", required=True, multiple=True, type=click.Path())
@click.option("--analyst", "analysts", required=True, multiple=True)
def session_create(store_dir, session_id, mode, reports_path, occ_paths, finals_paths, analysts):
    """Open a session: assign reports to analyst pairs."""
    import json as _json

    raw = _json.loads(_read_text(reports_path))
    reports = [ReportDoc(r["report_id"], r["source_name"], r["text"]) for r in raw]
    indicators = {}
    for path in occ_paths:
        doc = artifacts.read_artifact(path)
        if "report_id" not in doc:
            raise SchemaError(f"{path}: occurrences artifact has no report_id")
        indicators[doc["report_id"]] = dedupe(artifacts.occurrences_from_doc(doc))
    machine_results = {}
    for path in finals_paths:
        doc = artifacts.read_artifact(path)
        if "report_id" not in doc:
            raise SchemaError(f"{path}: finals artifact has no report_id")
        machine_results[doc["report_id"]] = artifacts.finals_from_doc(doc)
    manager = _manager(store_dir)
    session = manager.create_session(
        session_id, AnnotationMode(mode), reports, indicators, machine_results, list(analysts)
    )
    click.echo(
        artifacts.dumps(
            {
                "session_id": session.session_id,
                "state": session.state.value,
                "assignments": {rid: list(p) for rid, p in sorted(session.assignments.items())},
            }
        ),
        nl=False,
    )


@session_group.command("disputes")
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--id", "session_id", required=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
def session_disputes(store_dir, session_id, out_path):
    """Detect label disagreements once both juniors are done."""
    manager = _manager(store_dir)
    disputes = manager.detect_disputes(session_id)
    doc = {
        "session_id": session_id,
        "state": manager.get(session_id).state.value,
        "disputes": [
            {
                "report_id": d.report_id,
                "type": d.itype.value,
                "value": d.value,
                "labels_seen": {src: lab.value for src, lab in d.labels_seen},
            }
            for d in disputes
        ],
    }
    _emit(doc, out_path)


@session_group.command("escalate")
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--id", "session_id", required=True)
@click.option("--senior", required=True)
def session_escalate(store_dir, session_id, senior):
    """Hand every disputed report to a senior analyst."""
    manager = _manager(store_dir)
    manager.escalate(session_id, senior)
    session = manager.get(session_id)
    click.echo(
        artifacts.dumps(
            {
                "session_id": session_id,
                "senior_id": senior,
                "disputed_reports": sorted(session.disputed_reports),
            }
        ),
        nl=False,
    )


@session_group.command("finalize")
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--id", "session_id", required=True)
def session_finalize(store_dir, session_id):
    """Lock consensus labels; the session stops accepting changes."""
    manager = _manager(store_dir)
    manager.finalize(session_id)
    click.echo(artifacts.dumps({"session_id": session_id, "state": "Finalized"}), nl=False)


@session_group.command("export")
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--id", "session_ids", multiple=True,
              help="Sessions to export; all sessions in the store when omitted.")
@click.option("--out", "out_path", type=click.Path(), default=None)
def session_export(store_dir, session_ids, out_path):
    """Write finalized sessions as one gold dataset file."""
    store = SessionStore(store_dir)
    manager = SessionManager(store)
    ids = list(session_ids) or store.list_sessions()
    doc = export_dataset([manager.get(sid) for sid in ids])
    data = dataset_bytes(doc)
    if out_path:
        Path(out_path).write_bytes(data)
    else:
        click.echo(data.decode("utf-8"), nl=False)


@cli.command("serve")
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--listen", default=None, help="host:port")
@click.option("--token", "token_specs", multiple=True, help="token=analyst_id, repeatable.")
@click.pass_context
def serve_cmd(ctx, store_dir, listen, token_specs):
    """Run the annotation HTTP service."""
    import uvicorn

    from .service import create_app

    cfg = _cfg(ctx, listen=listen)
    tokens = None
    if token_specs:
        tokens = {}
        for spec_text in token_specs:
            token, sep, analyst = spec_text.partition("=")
            if not sep or not token or not analyst:
                raise ConfigError(f"token must look like <token>=<analyst_id>, got {spec_text!r}")
            tokens[token] = analyst
    host, _, port_text = cfg.listen.partition(":")
    try:
        port = int(port_text)
    except ValueError:
        raise ConfigError(f"listen must look like host:port, got {cfg.listen!r}") from None
    app = create_app(SessionManager(SessionStore(store_dir)), tokens)
    uvicorn.run(app, host=host or "127.0.0.1", port=port)


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except (ConfigError, SchemaError, DuplicatePrediction, AnnotationError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except (BackendUnavailable, ReputationSourceUnavailable, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
