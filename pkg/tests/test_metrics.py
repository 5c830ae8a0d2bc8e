import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import oracle_values, report_values
from fewseval.baselines import Prediction, PredictionSource
from fewseval.errors import EmptyJoinError
from fewseval.metrics import (
    ConfusionMatrix,
    MetricsReport,
    accuracy,
    band_from_confusion,
    crisis_binary_metrics,
    join_pairs,
    macro_metrics,
    micro_precision_recall,
    precision_recall_f1,
    score,
    within_band,
)
from oracles import brute_force_metrics
from series import START, panel_from_series

PPS = PredictionSource.PPS


def cm(predicted, actual):
    return ConfusionMatrix.from_pairs(predicted, actual)


def assert_matches_oracle(predicted, actual):
    got = report_values(MetricsReport.from_confusion(cm(predicted, actual)))
    expected = oracle_values(brute_force_metrics(predicted, actual))
    assert expected.pop("macro_recall_skipped") == 0  # every present class has a recall
    assert got.keys() == expected.keys()
    for k, v in expected.items():
        assert got[k] == v, k


# -- examples ---------------------------------------------------------------

def test_hand_counted_example():
    m = cm([1, 1, 2], [1, 2, 2])
    assert accuracy(m) == 2 / 3
    expected = np.zeros((5, 5), dtype=int)
    expected[0, 0] = expected[1, 0] = expected[1, 1] = 1  # (actual, predicted)
    assert m.tolist() == expected.tolist()


def test_perfect_predictions():
    m = cm([1, 2, 3, 4, 5, 3], [1, 2, 3, 4, 5, 3])
    assert accuracy(m) == 1.0
    assert np.count_nonzero(m.counts - np.diag(np.diag(m.counts))) == 0


def test_off_diagonal_only():
    assert accuracy(cm([1, 2], [2, 1])) == 0.0


def test_empty_accuracy_rejected():
    with pytest.raises(ValueError):
        accuracy(ConfusionMatrix())


def test_class_only_predicted_has_undefined_recall():
    p, r, f = precision_recall_f1(cm([4, 1], [1, 1]), 4)
    assert p == 0.0 and r is None and f is None


def test_single_class_perfect():
    assert precision_recall_f1(cm([3, 3], [3, 3]), 3) == (1.0, 1.0, 1.0)


def test_macro_skips_undefined():
    # class 2 is actual but never predicted: precision undefined for it
    m = macro_metrics(cm([1, 1, 3], [1, 2, 3]))
    assert m.classes == 3
    assert m.skipped_precision == 1
    assert m.precision == pytest.approx((0.5 + 1.0) / 2)


def test_within_band_examples():
    assert within_band([1, 2], [3, 2], 1) == 0.5
    assert within_band([1, 2], [3, 2], 2) == 1.0
    assert all(within_band([2, 5], [2, 5], k) == 1.0 for k in range(3))
    assert band_from_confusion(cm([1, 2], [3, 2]), 1) == 0.5


def test_crisis_example():
    b = crisis_binary_metrics([2, 4], [3, 4])
    assert (b.tp, b.fp, b.fn, b.tn) == (1, 0, 1, 0)
    assert b.recall == 0.5 and b.precision == 1.0


def test_crisis_absent():
    b = crisis_binary_metrics([1, 2], [2, 1])
    assert b.recall is None and b.accuracy == 1.0


def test_rejects_out_of_range_classes():
    with pytest.raises(ValueError):
        cm([0, 1], [1, 1])
    with pytest.raises(ValueError):
        cm([1], [6])


# -- oracle -----------------------------------------------------------------

def random_vectors(rng, n_max=10_000):
    n = int(rng.integers(1, n_max + 1))
    weights = rng.dirichlet(np.ones(5) * rng.uniform(0.2, 3.0))
    actual = rng.choice(np.arange(1, 6), size=n, p=weights)
    noise = rng.integers(-2, 3, size=n) * (rng.random(n) < rng.random())
    predicted = np.clip(actual + noise, 1, 5)
    return predicted.tolist(), actual.tolist()


@pytest.mark.parametrize("chunk", range(5))
def test_random_vectors_match_oracle(chunk):
    rng = np.random.default_rng(chunk)
    for _ in range(100):
        assert_matches_oracle(*random_vectors(rng, n_max=500))


def test_tiny_vectors_match_oracle():
    rng = np.random.default_rng(77)
    for _ in range(300):
        n = int(rng.integers(1, 6))
        assert_matches_oracle(rng.integers(1, 6, n).tolist(), rng.integers(1, 6, n).tolist())


# -- properties -------------------------------------------------------------

pairs = st.lists(st.tuples(st.integers(1, 5), st.integers(1, 5)), min_size=1, max_size=200)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=25, max_size=25).filter(lambda xs: sum(xs) > 0))
def test_micro_identity(counts):
    m = ConfusionMatrix(np.array(counts).reshape(5, 5))
    p, r = micro_precision_recall(m)
    assert p == r == accuracy(m)


@settings(max_examples=150, deadline=None)
@given(pairs, st.randoms(use_true_random=False))
def test_permutation_invariance(ps, rnd):
    shuffled = list(ps)
    rnd.shuffle(shuffled)
    a = report_values(MetricsReport.from_confusion(cm(*zip(*ps))))
    b = report_values(MetricsReport.from_confusion(cm(*zip(*shuffled))))
    assert a == b


@settings(max_examples=150, deadline=None)
@given(pairs)
def test_band_monotone(ps):
    m = cm(*zip(*ps))
    bands = [band_from_confusion(m, k) for k in range(5)]
    assert bands == sorted(bands) and bands[-1] == 1.0


def test_grouping_consistency():
    rng = np.random.default_rng(5)
    series = {f"a{i}": rng.integers(1, 6, 9).tolist() for i in range(40)}
    countries = {f"a{i}": ("AAA", "BBB")[i % 2] for i in range(40)}
    panel = panel_from_series(series, countries=countries)
    preds = [
        Prediction(aid, START.shift(k), PPS, int(rng.integers(1, 6)))
        for aid in series for k in range(1, 9) if rng.random() < 0.8
    ]
    reports = score(preds, panel, [("source",), ("source", "period"), ("source", "country")])
    overall = [r for r in reports if r.grouping == ("source",)][0]
    for dim in ("period", "country"):
        parts = [r for r in reports if r.grouping == ("source", dim)]
        total = sum((r.confusion for r in parts), ConfusionMatrix())
        assert total == overall.confusion
        weighted = sum(r.accuracy * r.n for r in parts) / sum(r.n for r in parts)
        assert weighted == pytest.approx(overall.accuracy, rel=1e-12)


# -- score ------------------------------------------------------------------

def test_score_is_unweighted_inner_join():
    panel = panel_from_series({"a": [1, 2], "b": [3, None]})
    preds = [
        Prediction("a", START.next(), PPS, 1),
        Prediction("b", START.next(), PPS, 3),  # no ground truth: dropped
    ]
    assert len(join_pairs(preds, panel)) == 1
    rep = score(preds, panel, [()])
    assert rep[0].n == 1 and rep[0].accuracy == 0.0


def test_score_without_pairs_raises():
    panel = panel_from_series({"a": [1]})
    with pytest.raises(EmptyJoinError):
        score([Prediction("a", START.shift(5), PPS, 1)], panel)


def test_score_warns_for_source_without_pairs():
    panel = panel_from_series({"a": [1, 1]})
    preds = [Prediction("a", START.next(), PPS, 1)]
    with pytest.warns(UserWarning, match="SPLY"):
        rep = score(preds, panel, [("source",)], sources=[PPS, PredictionSource.SPLY])
    assert [r.key for r in rep] == [("PPS",)]


def test_score_region_grouping():
    panel = panel_from_series({"a": [1, 1], "b": [2, 2]}, countries={"a": "AAA", "b": "BBB"})
    preds = [Prediction("a", START.next(), PPS, 1), Prediction("b", START.next(), PPS, 3)]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rep = score(preds, panel, [("region",)], region_of={"AAA": "EA", "BBB": "WA"})
    assert [(r.key, r.accuracy) for r in rep] == [(("EA",), 1.0), (("WA",), 0.0)]


def test_score_rejects_unknown_dimension():
    panel = panel_from_series({"a": [1, 1]})
    with pytest.raises(ValueError):
        score([Prediction("a", START.next(), PPS, 1)], panel, [("district",)])
