"""Report emitters for evaluation results.

Three formats share one EvaluationReport: markdown for reading, CSV
for spreadsheets, JSON for machines.  Markdown and CSV metrics are
rounded half-up to three decimals; JSON keeps full precision.  None of
the files embed a timestamp, so rerunning the same config and seed
reproduces them byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from ..metrics import format_metric
from .runner import CellResult, EvaluationReport, PipelineIOError

REPORT_FORMATS = ("md", "csv", "json")

_METRIC_HEADER = ["Accuracy", "Precision", "Recall", "F1-score"]


def _metric_cells(m) -> list[str]:
    if m is None:
        return ["-", "-", "-", "-"]
    return [format_metric(m.accuracy), format_metric(m.precision),
            format_metric(m.recall), format_metric(m.f1)]


def _md_table(header: list[str], rows: list[list[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |",
             "| " + " | ".join("---" for _ in header) + " |"]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    return "\n".join(lines)


def render_markdown(report: EvaluationReport) -> str:
    out = ["# Evaluation report", ""]
    prov = report.provenance
    out.append(f"Seed {prov['seed']}, config `{prov['config_hash'][:12]}`, "
               f"{prov['averaging']} averaging, package {prov['package_version']}.")
    out.append("")

    for summary in report.summaries:
        model_rows = [r for r in report.rows if r.model == summary.model]
        out.append(f"## {summary.model}")
        out.append("")
        out.append(f"{summary.n_features} features, {summary.n_train} train / "
                   f"{summary.n_test} test rows.")
        out.append("")
        ok_rows = [r for r in model_rows if r.ok]
        if ok_rows:
            table = [[r.selector_display(), r.classifier.label] + _metric_cells(r.metrics)
                     for r in ok_rows]
            out.append(_md_table(["Feature Selection Method", "Classification Algorithm"]
                                 + _METRIC_HEADER, table))
            out.append("")
        if summary.best_cell is not None:
            b = summary.best_cell
            out.append(f"Best cell: {b.selector_display()} + {b.classifier.label} "
                       f"(accuracy {format_metric(b.metrics.accuracy)}).")
            out.append("")

    best_rows = [[s.model, s.best_cell.selector_display(), s.best_cell.classifier.label]
                 + _metric_cells(s.best_cell.metrics)
                 for s in report.summaries if s.best_cell is not None]
    if best_rows:
        out.append("## Best per model")
        out.append("")
        out.append(_md_table(["Model", "Feature Selection Method",
                              "Classification Algorithm"] + _METRIC_HEADER, best_rows))
        out.append("")

    if report.ensemble is not None:
        e = report.ensemble
        out.append("## Ensemble")
        out.append("")
        if e.error is not None:
            out.append(f"{e.mode} vote failed: {e.error}")
        else:
            count = len(e.member_cell_ids)
            noun = "member" if count == 1 else "members"
            out.append(f"{e.mode.capitalize()} vote over {count} {noun} "
                       f"(tie break: {e.tie_break}):")
            out.append("")
            for cid in e.member_cell_ids:
                out.append(f"- `{cid}`")
            out.append("")
            out.append(_md_table(_METRIC_HEADER, [_metric_cells(e.metrics)]))
        out.append("")

    failed = [r for r in report.rows if not r.ok]
    if failed:
        out.append("## Errors")
        out.append("")
        for r in failed:
            out.append(f"- `{r.cell_id}`: {r.error}")
        out.append("")

    return "\n".join(out).rstrip() + "\n"


_CSV_COLUMNS = ["model", "selector", "selector_key", "n_selected", "classifier",
                "classifier_key", "status", "accuracy", "precision", "recall",
                "f1", "error"]


def render_csv(report: EvaluationReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_COLUMNS)
    for r in report.rows:
        m = r.metrics
        writer.writerow([
            r.model,
            r.selector_display(),
            r.selector.key,
            "" if r.n_selected is None else r.n_selected,
            r.classifier.label if r.classifier else "",
            r.classifier.key if r.classifier else "",
            "ok" if r.ok else "error",
            "" if m is None else format_metric(m.accuracy),
            "" if m is None else format_metric(m.precision),
            "" if m is None else format_metric(m.recall),
            "" if m is None else format_metric(m.f1),
            r.error or "",
        ])
    return buf.getvalue()


def render_json(report: EvaluationReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


_RENDERERS = {"md": render_markdown, "csv": render_csv, "json": render_json}


def emit_report(report: EvaluationReport, out_dir: str | Path,
                formats: tuple[str, ...] = REPORT_FORMATS) -> dict[str, Path]:
    """Write the requested report files, returning {format: path}."""
    unknown = set(formats) - set(REPORT_FORMATS)
    if unknown:
        raise ValueError(f"unknown report formats: {sorted(unknown)}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise PipelineIOError(f"cannot create output dir {out}: {e}") from e
    written: dict[str, Path] = {}
    for fmt in formats:
        path = out / f"report.{fmt}"
        try:
            path.write_text(_RENDERERS[fmt](report), encoding="utf-8")
        except OSError as e:
            raise PipelineIOError(f"cannot write {path}: {e}") from e
        written[fmt] = path
    return written


def report_rows_from_dict(doc: dict) -> EvaluationReport:
    """Rebuild an EvaluationReport from its JSON form (for re-emission)."""
    from ..metrics import MetricRow
    from .config import ClassifierConfig, SelectorConfig
    from .runner import EnsembleOutcome, ModelSummary

    def metrics_from(obj):
        if obj is None:
            return None
        return MetricRow(accuracy=obj["accuracy"], precision=obj["precision"],
                         recall=obj["recall"], f1=obj["f1"],
                         averaging=obj["averaging"], support=tuple(obj["support"]))

    rows = []
    for r in doc["rows"]:
        sel = SelectorConfig(method=r["selector_method"],
                             params=dict(r["selector_params"]))
        clf = None
        if r["classifier_method"] is not None:
            clf = ClassifierConfig(method=r["classifier_method"],
                                   params=dict(r["classifier_params"]))
        rows.append(CellResult(model=r["model"], selector=sel, classifier=clf,
                               n_selected=r["n_selected"], metrics=metrics_from(r["metrics"]),
                               error=r["error"]))
    by_id = {r.cell_id: r for r in rows}
    summaries = [ModelSummary(model=s["model"], n_features=s["n_features"],
                              n_train=s["n_train"], n_test=s["n_test"],
                              best_cell=by_id.get(s["best_cell"]))
                 for s in doc["summaries"]]
    ensemble = None
    if doc.get("ensemble") is not None:
        e = doc["ensemble"]
        ensemble = EnsembleOutcome(mode=e["mode"], member_cell_ids=tuple(e["members"]),
                                   weights=None if e["weights"] is None
                                   else tuple(e["weights"]),
                                   tie_break=e["tie_break"],
                                   metrics=metrics_from(e["metrics"]), error=e["error"])
    return EvaluationReport(rows=rows, summaries=summaries, ensemble=ensemble,
                            provenance=doc["provenance"])
