"""Verification of IPC food-security projections at admin x livelihood grain."""

__version__ = "0.1.0"

from .periods import Cycle, LayerKind, PeriodId  # noqa: E402
from .baselines import Prediction, PredictionSource  # noqa: E402
from .metrics import ConfusionMatrix, MetricsReport, score  # noqa: E402

__all__ = [
    "Cycle",
    "LayerKind",
    "PeriodId",
    "Prediction",
    "PredictionSource",
    "ConfusionMatrix",
    "MetricsReport",
    "score",
]
