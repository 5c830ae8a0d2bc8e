"""Naive forecasts on three constructed series."""

from fewseval.atoms import AtomMeta, ClassificationRecord, Panel
from fewseval.baselines import PredictionSource, predict_all
from fewseval.metrics import score
from fewseval.periods import LayerKind, PeriodId

start = PeriodId.parse("2019-02")


def panel(series):
    records, meta = [], {}
    for aid, values in series.items():
        meta[aid] = AtomMeta("AAA", aid, "LZ1")
        for k, v in enumerate(values):
            records.append(ClassificationRecord(aid, start.shift(k), LayerKind.CS, v, 1.0))
    return Panel(records, meta)


cases = {
    "constant": {"a": [2] * 9, "b": [4] * 9},
    "seasonal": {"a": [1, 3, 2] * 3, "b": [2, 4, 3] * 3},
    "improving": {"a": [4, 3, 3, 2, 2, 1, 1]},
}
for name, series in cases.items():
    p = panel(series)
    preds = predict_all(p, [PredictionSource.PPS, PredictionSource.SPLY, PredictionSource.MAX2PP])
    print(name)
    for rep in score(preds, p, [("source",)]):
        print(f"  {rep.key[0]:<7} n={rep.n:<3} accuracy {rep.accuracy:.2f}  within_1 {rep.within_band[1]:.2f}")

# Max2PP on the improving series is always one class too pessimistic
for pr in predict_all(panel(cases["improving"]), [PredictionSource.MAX2PP]):
    print(" ", pr.target_period, "predicted", pr.ipc, "(partial)" if pr.partial else "")
