"""Scoring predictions against the next period's current situation.

Pairs are formed by an inner join of predictions with CS rows of the panel on
(atom, target period); every atom counts once. All ratios are evaluated as
exact fractions of integer counts and only converted to float at the end, so
results do not depend on summation order. A ratio whose denominator is zero is
``None`` (undefined), never 0 or 1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .atoms import Panel
from .baselines import SOURCE_ORDER, Prediction, PredictionSource
from .errors import EmptyJoinError
from .periods import IPC_CLASSES, LayerKind, PeriodId

N_CLASSES = len(IPC_CLASSES)
CRISIS_THRESHOLD = 3
BANDS = (0, 1, 2)
DIMENSIONS = ("source", "period", "country", "region")

DEFAULT_GROUPINGS = (
    ("source",),
    ("source", "period"),
    ("source", "country"),
    ("source", "country", "period"),
)


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else float(Fraction(int(num), int(den)))


@dataclass(frozen=True)
class ScoredPair:
    atom_id: str
    target_period: PeriodId
    source: PredictionSource
    predicted: int
    actual: int


class ConfusionMatrix:
    """5x5 counts; rows are actual classes, columns predicted classes (class c at index c-1)."""

    def __init__(self, counts=None):
        if counts is None:
            counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (N_CLASSES, N_CLASSES) or (counts < 0).any():
            raise ValueError("confusion matrix must be a 5x5 array of non-negative counts")
        self.counts = counts

    @classmethod
    def from_pairs(cls, predicted, actual) -> "ConfusionMatrix":
        p = np.asarray(predicted, dtype=np.int64)
        a = np.asarray(actual, dtype=np.int64)
        if p.shape != a.shape:
            raise ValueError("predicted and actual differ in length")
        if p.size and (p.min() < 1 or p.max() > 5 or a.min() < 1 or a.max() > 5):
            raise ValueError("IPC classes must lie in 1..5")
        flat = np.bincount((a - 1) * N_CLASSES + (p - 1), minlength=N_CLASSES * N_CLASSES)
        return cls(flat.reshape(N_CLASSES, N_CLASSES))

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)

    def __repr__(self):
        return f"ConfusionMatrix({self.counts.tolist()})"

    def tolist(self) -> list[list[int]]:
        return self.counts.tolist()


def accuracy(cm: ConfusionMatrix) -> float:
    n = cm.n
    if n == 0:
        raise ValueError("accuracy of an empty confusion matrix")
    return float(Fraction(int(np.trace(cm.counts)), n))


def _prf(tp: int, col: int, row: int):
    precision = None if col == 0 else Fraction(tp, col)
    recall = None if row == 0 else Fraction(tp, row)
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def _prf_exact(cm: ConfusionMatrix, c: int):
    i = c - 1
    c_ = cm.counts
    return _prf(int(c_[i, i]), int(c_[:, i].sum()), int(c_[i, :].sum()))


def _float(x):
    return None if x is None else float(x)


def precision_recall_f1(cm: ConfusionMatrix, c: int) -> tuple[float | None, float | None, float | None]:
    """One-vs-rest precision, recall and F1 for class ``c``."""
    if cm.n == 0:
        raise ValueError("empty confusion matrix")
    return tuple(_float(x) for x in _prf_exact(cm, c))


def micro_precision_recall(cm: ConfusionMatrix) -> tuple[float, float]:
    tp = int(np.trace(cm.counts))
    predicted = int(cm.counts.sum(axis=0).sum())
    actual = int(cm.counts.sum(axis=1).sum())
    return float(Fraction(tp, predicted)), float(Fraction(tp, actual))


@dataclass(frozen=True)
class MacroMetrics:
    precision: float | None
    recall: float | None
    f1: float | None
    classes: int  # classes present among the actuals
    skipped_precision: int
    skipped_f1: int


def _mean(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, len(values)
    return float(sum(vals, Fraction(0)) / len(vals)), len(values) - len(vals)


def macro_metrics(cm: ConfusionMatrix) -> MacroMetrics:
    """Unweighted means over the classes that occur among the actuals."""
    present = [c for c in IPC_CLASSES if cm.counts[c - 1, :].sum() > 0]
    prf = [_prf_exact(cm, c) for c in present]
    p, skip_p = _mean([x[0] for x in prf])
    r, _ = _mean([x[1] for x in prf])
    f, skip_f = _mean([x[2] for x in prf])
    return MacroMetrics(p, r, f, len(present), skip_p, skip_f)


def band_from_confusion(cm: ConfusionMatrix, k: int) -> float:
    i, j = np.indices(cm.counts.shape)
    return float(Fraction(int(cm.counts[np.abs(i - j) <= k].sum()), cm.n))


def within_band(predicted, actual, k: int) -> float:
    """Share of pairs whose classes differ by at most ``k``."""
    p = np.asarray(predicted, dtype=np.int64)
    a = np.asarray(actual, dtype=np.int64)
    if p.size == 0:
        raise ValueError("within_band of no pairs")
    return float(Fraction(int((np.abs(p - a) <= k).sum()), int(p.size)))


@dataclass(frozen=True)
class BinaryMetrics:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float | None
    recall: float | None
    f1: float | None
    accuracy: float


def _binary(tp: int, fp: int, fn: int, tn: int) -> BinaryMetrics:
    p, r, f = _prf(tp, tp + fp, tp + fn)
    return BinaryMetrics(tp, fp, fn, tn, _float(p), _float(r), _float(f), float(Fraction(tp + tn, tp + fp + fn + tn)))


def crisis_from_confusion(cm: ConfusionMatrix, threshold: int = CRISIS_THRESHOLD) -> BinaryMetrics:
    c = cm.counts
    t = threshold - 1
    return _binary(int(c[t:, t:].sum()), int(c[:t, t:].sum()), int(c[t:, :t].sum()), int(c[:t, :t].sum()))


def crisis_binary_metrics(predicted, actual, threshold: int = CRISIS_THRESHOLD) -> BinaryMetrics:
    """Binary metrics with "IPC >= threshold" as the positive class."""
    p = np.asarray(predicted, dtype=np.int64) >= threshold
    a = np.asarray(actual, dtype=np.int64) >= threshold
    if p.size == 0:
        raise ValueError("crisis metrics of no pairs")
    return _binary(int((p & a).sum()), int((p & ~a).sum()), int((~p & a).sum()), int((~p & ~a).sum()))


@dataclass
class MetricsReport:
    grouping: tuple[str, ...]
    key: tuple[str, ...]
    confusion: ConfusionMatrix
    n: int
    accuracy: float
    precision: list[float | None]
    recall: list[float | None]
    f1: list[float | None]
    macro: MacroMetrics
    within_band: dict[int, float]
    crisis: BinaryMetrics
    extra: dict = field(default_factory=dict)

    def keyed(self) -> dict[str, str]:
        return dict(zip(self.grouping, self.key))

    @classmethod
    def from_confusion(cls, cm: ConfusionMatrix, grouping=(), key=()) -> "MetricsReport":
        prf = [precision_recall_f1(cm, c) for c in IPC_CLASSES]
        return cls(
            grouping=tuple(grouping),
            key=tuple(key),
            confusion=cm,
            n=cm.n,
            accuracy=accuracy(cm),
            precision=[x[0] for x in prf],
            recall=[x[1] for x in prf],
            f1=[x[2] for x in prf],
            macro=macro_metrics(cm),
            within_band={k: band_from_confusion(cm, k) for k in BANDS},
            crisis=crisis_from_confusion(cm),
        )


def join_pairs(predictions: Iterable[Prediction], panel: Panel) -> list[ScoredPair]:
    """Inner join of predictions with CS rows on (atom, target period)."""
    out = []
    for x in predictions:
        actual = panel.get(x.atom_id, x.target_period, LayerKind.CS)
        if actual is not None:
            out.append(ScoredPair(x.atom_id, x.target_period, x.source, x.ipc, actual))
    return out


def _dim_value(pair: ScoredPair, dim: str, panel: Panel, region_of: Mapping[str, str]) -> str:
    if dim == "source":
        return pair.source.value
    if dim == "period":
        return str(pair.target_period)
    country = panel.atoms[pair.atom_id].country
    if dim == "country":
        return country
    if dim == "region":
        return region_of.get(country, "")
    raise ValueError(f"unknown grouping dimension {dim!r}")


def _sort_value(dim: str, value: str):
    if dim == "source":
        return (SOURCE_ORDER.get(PredictionSource(value), 99), value)
    return (0, value)


def score(
    predictions: Iterable[Prediction],
    panel: Panel,
    groupings: Sequence[Sequence[str]] = DEFAULT_GROUPINGS,
    region_of: Mapping[str, str] | None = None,
    sources: Iterable[PredictionSource] | None = None,
) -> list[MetricsReport]:
    """Reports for every value of every grouping.

    A grouping is a tuple of dimensions from ``source``, ``period`` (target
    period), ``country`` and ``region``; ``()`` is the overall pool. Requested
    ``sources`` that end up with no scored pair are omitted with a warning.
    Raises :class:`EmptyJoinError` when nothing can be scored at all.
    """
    region_of = region_of or {}
    pairs = join_pairs(predictions, panel)
    if not pairs:
        raise EmptyJoinError("no prediction matched a ground-truth CS row")
    present = {p.source for p in pairs}
    for s in sources or ():
        if PredictionSource(s) not in present:
            warnings.warn(f"source {PredictionSource(s).value} has no scored pairs; omitted", stacklevel=2)

    reports = []
    for grouping in groupings:
        grouping = tuple(grouping)
        for d in grouping:
            if d not in DIMENSIONS:
                raise ValueError(f"unknown grouping dimension {d!r}")
        buckets: dict[tuple, list[ScoredPair]] = {}
        for pair in pairs:
            key = tuple(_dim_value(pair, d, panel, region_of) for d in grouping)
            buckets.setdefault(key, []).append(pair)
        for key in sorted(buckets, key=lambda k: tuple(_sort_value(d, v) for d, v in zip(grouping, k))):
            group = buckets[key]
            cm = ConfusionMatrix.from_pairs([p.predicted for p in group], [p.actual for p in group])
            reports.append(MetricsReport.from_confusion(cm, grouping, key))
    return reports
