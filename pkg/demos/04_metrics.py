"""Confusion matrix and metrics on random predictions."""

import numpy as np

from fewseval.metrics import ConfusionMatrix, MetricsReport, micro_precision_recall

rng = np.random.default_rng(3)
actual = rng.choice(np.arange(1, 6), size=2000, p=[0.35, 0.3, 0.2, 0.12, 0.03])
predicted = np.clip(actual + rng.choice([-1, 0, 0, 0, 1], size=actual.size), 1, 5)

cm = ConfusionMatrix.from_pairs(predicted.tolist(), actual.tolist())
print(cm.counts)  # rows actual, columns predicted

rep = MetricsReport.from_confusion(cm)
print("accuracy", round(rep.accuracy, 4), "micro p/r", micro_precision_recall(cm))
print("within_0/1/2", [round(rep.within_band[k], 4) for k in (0, 1, 2)])
print("macro f1", round(rep.macro.f1, 4))
for c, (p, r) in enumerate(zip(rep.precision, rep.recall), start=1):
    print(f"  class {c}: precision {p:.3f} recall {r:.3f}")
print("crisis (3+) recall", round(rep.crisis.recall, 4), "precision", round(rep.crisis.precision, 4))
