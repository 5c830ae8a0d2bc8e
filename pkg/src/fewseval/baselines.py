"""Predictions for the next period's current situation.

Besides the published near-term projection, three rule-based models are
derived from past current-situation (CS) rows of the panel:

* PPS: no change, the CS of the issue period;
* SPLY: the CS of the same cycle one year before the target;
* Max2PP: the worse CS of the issue period and the one before it.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .atoms import Panel
from .periods import LayerKind, PeriodId

PREDICTION_COLUMNS = ("atom_id", "target_period", "source", "ipc", "partial")


class PredictionSource(str, enum.Enum):
    FEWSNET = "FEWSNET"
    PPS = "PPS"
    SPLY = "SPLY"
    MAX2PP = "Max2PP"

    def __str__(self) -> str:
        return self.value


SOURCE_ORDER = {s: i for i, s in enumerate(PredictionSource)}


@dataclass(frozen=True)
class Prediction:
    atom_id: str
    target_period: PeriodId
    source: PredictionSource
    ipc: int
    partial: bool = False


def _shift(p: PeriodId, n: int) -> PeriodId | None:
    try:
        return p.shift(n)
    except ValueError:
        return None


def predict_fewsnet(panel: Panel, p: PeriodId, kind: LayerKind = LayerKind.ML1) -> list[Prediction]:
    """Published projection issued at ``p``.

    ML1 targets the next period; ML2 (extension) targets two periods ahead.
    """
    target = p.shift(2 if kind == LayerKind.ML2 else 1)
    rows = panel.layer(p, kind)
    return [Prediction(a, target, PredictionSource.FEWSNET, ipc) for a, ipc in sorted(rows.items())]


def predict_pps(panel: Panel, p: PeriodId) -> list[Prediction]:
    target = p.next()
    return [Prediction(a, target, PredictionSource.PPS, ipc) for a, ipc in sorted(panel.layer(p, LayerKind.CS).items())]


def predict_sply(panel: Panel, p: PeriodId, counts: Counter | None = None) -> list[Prediction]:
    target = p.next()
    source = _shift(target, -3)
    if source is None:
        if counts is not None:
            counts["sply_before_first_year"] += 1
        return []
    rows = panel.layer(source, LayerKind.CS)
    if not rows and counts is not None:
        counts["sply_missing_history"] += len(panel.layer(p, LayerKind.CS))
    return [Prediction(a, target, PredictionSource.SPLY, ipc) for a, ipc in sorted(rows.items())]


def predict_max2pp(panel: Panel, p: PeriodId, counts: Counter | None = None) -> list[Prediction]:
    """Worse of CS(p) and CS(prev(p)); a single available value is used alone and flagged partial."""
    target = p.next()
    cur = panel.layer(p, LayerKind.CS)
    before = _shift(p, -1)
    prev = panel.layer(before, LayerKind.CS) if before is not None else {}
    out = []
    for a in sorted(set(cur) | set(prev)):
        values = [v for v in (cur.get(a), prev.get(a)) if v is not None]
        partial = len(values) == 1
        if partial and counts is not None:
            counts["max2pp_partial"] += 1
        out.append(Prediction(a, target, PredictionSource.MAX2PP, max(values), partial))
    return out


def predict_all(
    panel: Panel,
    sources: Iterable[PredictionSource] = tuple(PredictionSource),
    targets: Sequence[PeriodId] | None = None,
    kind: LayerKind = LayerKind.ML1,
    counts: Counter | None = None,
) -> list[Prediction]:
    """Predictions from every requested source for each target period.

    By default the targets are the panel periods whose preceding period is also
    in the panel, so every prediction can in principle be scored.
    """
    sources = sorted(set(PredictionSource(s) for s in sources), key=SOURCE_ORDER.get)
    lead = 2 if kind == LayerKind.ML2 else 1
    if targets is None:
        have = set(panel.periods())
        targets = [t for t in sorted(have) if _shift(t, -lead) in have]
    out: list[Prediction] = []
    for t in targets:
        for s in sources:
            if s == PredictionSource.FEWSNET:
                issue = _shift(t, -lead)
                out.extend(predict_fewsnet(panel, issue, kind) if issue is not None else [])
                continue
            issue = _shift(t, -1)
            if issue is None:
                continue
            if s == PredictionSource.PPS:
                out.extend(predict_pps(panel, issue))
            elif s == PredictionSource.SPLY:
                out.extend(predict_sply(panel, issue, counts))
            else:
                out.extend(predict_max2pp(panel, issue, counts))
    out.sort(key=lambda x: (x.target_period, SOURCE_ORDER[x.source], x.atom_id))
    return out


def write_predictions_csv(predictions: Sequence[Prediction], path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PREDICTION_COLUMNS)
    for x in predictions:
        w.writerow([x.atom_id, str(x.target_period), x.source.value, x.ipc, "true" if x.partial else "false"])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def write_predictions_jsonl(predictions: Sequence[Prediction], path=None) -> str:
    text = "".join(
        json.dumps(
            {"atom_id": x.atom_id, "target_period": str(x.target_period), "source": x.source.value, "ipc": x.ipc, "partial": x.partial}
        )
        + "\n"
        for x in predictions
    )
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_predictions_csv(path) -> list[Prediction]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            Prediction(r["atom_id"], PeriodId.parse(r["target_period"]), PredictionSource(r["source"]), int(r["ipc"]), r["partial"] == "true")
            for r in csv.DictReader(fh)
        ]
