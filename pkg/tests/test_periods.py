import pytest
from hypothesis import given, strategies as st

from fewseval.periods import Cycle, PeriodId, parse_period_range, period_range

periods = st.builds(PeriodId, st.integers(2016, 2040), st.sampled_from(list(Cycle)))


def test_ordering_within_a_year():
    assert PeriodId(2021, Cycle.FEB) < PeriodId(2021, Cycle.JUN) < PeriodId(2021, Cycle.OCT)
    assert PeriodId(2020, Cycle.OCT) < PeriodId(2021, Cycle.FEB)


def test_next_and_prev_wrap_the_year():
    assert PeriodId(2020, Cycle.OCT).next() == PeriodId(2021, Cycle.FEB)
    assert PeriodId(2021, Cycle.FEB).prev() == PeriodId(2020, Cycle.OCT)


def test_prev_of_first_period_is_undefined():
    with pytest.raises(ValueError):
        PeriodId(2016, Cycle.FEB).prev()


def test_year_before_2016_rejected():
    with pytest.raises(ValueError):
        PeriodId(2015, Cycle.OCT)


def test_bad_cycle_rejected():
    with pytest.raises(ValueError):
        PeriodId(2020, 3)


@pytest.mark.parametrize("text", ["2021-06", "202106", " 2021-06 "])
def test_parse(text):
    assert PeriodId.parse(text) == PeriodId(2021, Cycle.JUN)


def test_string_forms():
    p = PeriodId(2019, Cycle.FEB)
    assert str(p) == "2019-02"
    assert p.compact == "201902"


def test_range():
    got = period_range(PeriodId.parse("2020-10"), PeriodId.parse("2021-06"))
    assert [str(p) for p in got] == ["2020-10", "2021-02", "2021-06"]
    with pytest.raises(ValueError):
        parse_period_range("2021-06..2020-10")


@given(periods)
def test_prev_next_inverse(p):
    assert p.next().prev() == p
    if p != PeriodId(2016, Cycle.FEB):
        assert p.prev().next() == p


@given(periods)
def test_three_cycles_is_one_year(p):
    assert p.shift(3) == PeriodId(p.year + 1, p.cycle)


@given(periods, periods)
def test_total_order_matches_tuple_order(a, b):
    assert (a < b) == ((a.year, int(a.cycle)) < (b.year, int(b.cycle)))
