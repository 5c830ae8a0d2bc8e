"""Serialising metric reports and the plot-ready tables derived from them."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence

from .metrics import BANDS, DIMENSIONS, MetricsReport
from .periods import IPC_CLASSES

REPORT_COLUMNS = ("grouping", *DIMENSIONS, "metric", "value")


def fmt(value) -> str:
    if value is None:
        return "undefined"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return f"{value:.6f}"


def metric_rows(r: MetricsReport) -> list[tuple[str, object]]:
    rows: list[tuple[str, object]] = [("n", r.n), ("accuracy", r.accuracy)]
    rows += [(f"within_{k}", r.within_band[k]) for k in BANDS]
    rows += [(f"precision_{c}", r.precision[c - 1]) for c in IPC_CLASSES]
    rows += [(f"recall_{c}", r.recall[c - 1]) for c in IPC_CLASSES]
    rows += [(f"f1_{c}", r.f1[c - 1]) for c in IPC_CLASSES]
    rows += [
        ("macro_precision", r.macro.precision),
        ("macro_recall", r.macro.recall),
        ("macro_f1", r.macro.f1),
        ("macro_classes", r.macro.classes),
        ("macro_precision_skipped", r.macro.skipped_precision),
        ("macro_f1_skipped", r.macro.skipped_f1),
        ("crisis_precision", r.crisis.precision),
        ("crisis_recall", r.crisis.recall),
        ("crisis_f1", r.crisis.f1),
        ("crisis_accuracy", r.crisis.accuracy),
    ]
    return rows


def grouping_name(grouping) -> str:
    return "+".join(grouping) if grouping else "overall"


def _write(text: str, path) -> str:
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def reports_csv(reports: Sequence[MetricsReport], path=None) -> str:
    """One row per grouping value and metric."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in reports:
        keyed = r.keyed()
        dims = [keyed.get(d, "") for d in DIMENSIONS]
        for metric, value in metric_rows(r):
            w.writerow([grouping_name(r.grouping), *dims, metric, fmt(value)])
    return _write(buf.getvalue(), path)


def report_dict(r: MetricsReport) -> dict:
    return {
        "grouping": list(r.grouping),
        "key": r.keyed(),
        "n": r.n,
        "accuracy": r.accuracy,
        "within_band": {str(k): v for k, v in r.within_band.items()},
        "per_class": {
            str(c): {"precision": r.precision[c - 1], "recall": r.recall[c - 1], "f1": r.f1[c - 1]}
            for c in IPC_CLASSES
        },
        "macro": {
            "precision": r.macro.precision,
            "recall": r.macro.recall,
            "f1": r.macro.f1,
            "classes": r.macro.classes,
            "skipped_precision": r.macro.skipped_precision,
            "skipped_f1": r.macro.skipped_f1,
        },
        "crisis": {
            "threshold": 3,
            "tp": r.crisis.tp,
            "fp": r.crisis.fp,
            "fn": r.crisis.fn,
            "tn": r.crisis.tn,
            "precision": r.crisis.precision,
            "recall": r.crisis.recall,
            "f1": r.crisis.f1,
            "accuracy": r.crisis.accuracy,
        },
        "confusion": r.confusion.tolist(),
    }


def reports_json(reports: Sequence[MetricsReport], path=None, **meta) -> str:
    doc = {**meta, "reports": [report_dict(r) for r in reports]}
    return _write(json.dumps(doc, indent=1) + "\n", path)


def _select(reports, grouping):
    return [r for r in reports if r.grouping == tuple(grouping)]


def accuracy_over_time_csv(reports: Sequence[MetricsReport], path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("source", "period", "n", "accuracy", "within_1"))
    for r in _select(reports, ("source", "period")):
        k = r.keyed()
        w.writerow([k["source"], k["period"], r.n, fmt(r.accuracy), fmt(r.within_band[1])])
    return _write(buf.getvalue(), path)


def country_period_csv(reports: Sequence[MetricsReport], path=None) -> str:
    """Heat-map cells; a (country, period) with no scored pair has no row."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("source", "country", "period", "n", "accuracy"))
    for r in _select(reports, ("source", "country", "period")):
        k = r.keyed()
        w.writerow([k["source"], k["country"], k["period"], r.n, fmt(r.accuracy)])
    return _write(buf.getvalue(), path)


def confusion_long_csv(reports: Sequence[MetricsReport], path=None, grouping=("source", "period")) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow((*grouping, "actual", "predicted", "count"))
    for r in _select(reports, grouping):
        k = r.keyed()
        for a in IPC_CLASSES:
            for p in IPC_CLASSES:
                w.writerow([*(k[d] for d in grouping), a, p, int(r.confusion.counts[a - 1, p - 1])])
    return _write(buf.getvalue(), path)


def render_markdown(doc: dict) -> str:
    """Summary tables from a stored ``reports.json`` document."""
    lines = ["# Forecast verification report", ""]
    for k in ("panel_periods", "sources"):
        if k in doc:
            lines.append(f"- {k.replace('_', ' ')}: {', '.join(map(str, doc[k]))}")
    if len(lines) > 2:
        lines.append("")

    by_grouping: dict[tuple, list] = {}
    for r in doc["reports"]:
        by_grouping.setdefault(tuple(r["grouping"]), []).append(r)
    for grouping, rows in by_grouping.items():
        lines.append(f"## {grouping_name(grouping)}")
        lines.append("")
        head = [*grouping, "n", "accuracy", "within ±1", "macro F1", "crisis recall"]
        lines.append("| " + " | ".join(head) + " |")
        lines.append("|" + "---|" * len(head))
        for r in rows:
            cells = [r["key"][d] for d in grouping]
            cells += [
                str(r["n"]),
                fmt(r["accuracy"]),
                fmt(r["within_band"]["1"]),
                fmt(r["macro"]["f1"]),
                fmt(r["crisis"]["recall"]),
            ]
            lines.append("| " + " | ".join(cells) + " |")
        lines.append("")
    return "\n".join(lines)
