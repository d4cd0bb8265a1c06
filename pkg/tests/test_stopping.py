import pytest
from hypothesis import given
from hypothesis import strategies as st

from qubolab.stopping import StopMonitor, fuzzy_should_stop, strict_should_stop


def first_stop(monitor, values):
    for epoch, v in enumerate(values, start=1):
        if monitor.update(v):
            return epoch
    return None


def test_strict_never_stops_on_large_steady_decrease():
    m = StopMonitor("strict", patience=3, tol=1e-4)
    assert first_stop(m, [100.0 - k for k in range(500)]) is None


def test_strict_constant_loss():
    m = StopMonitor("strict", patience=3, tol=1e-4)
    assert [strict_should_stop(m, 5.0) for _ in range(4)] == [False, False, False, True]


def test_strict_tiny_deltas_stop_at_p_plus_one():
    m = StopMonitor("strict", patience=100, tol=1e-4)
    assert first_stop(m, [1.0 - 1e-8 * k for k in range(1000)]) == 101


def test_fuzzy_tiny_deltas_never_stop():
    m = StopMonitor("fuzzy", patience=100)
    assert first_stop(m, [1.0 - 1e-8 * k for k in range(1000)]) is None


def test_fuzzy_plateau_stops():
    m = StopMonitor("fuzzy", patience=5)
    assert [fuzzy_should_stop(m, 2.0) for _ in range(6)] == [False] * 5 + [True]


def test_fuzzy_reward_counter_resets():
    m = StopMonitor("fuzzy", patience=700, direction="maximize")
    for _ in range(700):
        assert not m.update(10)
    assert m.counter == 699
    assert not m.update(11)
    assert m.counter == 0 and m.best == 11


def test_mode_guards():
    with pytest.raises(ValueError):
        strict_should_stop(StopMonitor("fuzzy"), 1.0)
    with pytest.raises(ValueError):
        fuzzy_should_stop(StopMonitor("strict"), 1.0)
    with pytest.raises(ValueError):
        StopMonitor("lazy")


def test_equality_is_not_improvement():
    m = StopMonitor("fuzzy", patience=2)
    m.update(1.0)
    m.update(1.0)
    assert m.counter == 1


strictly_decreasing = st.lists(st.floats(1e-6, 10.0), min_size=1, max_size=300).map(
    lambda steps: [1000.0 - sum(steps[:k]) for k in range(len(steps) + 1)])


@given(strictly_decreasing, st.integers(1, 20))
def test_fuzzy_never_stops_on_improving_sequence(values, p):
    assert first_stop(StopMonitor("fuzzy", patience=p), values) is None


@given(strictly_decreasing, st.integers(1, 20), st.floats(1e-5, 1e-1))
def test_strict_stops_iff_small_deltas_for_p_steps(values, p, tol):
    stop = first_stop(StopMonitor("strict", patience=p, tol=tol), values)
    small = [abs(b - a) < tol for a, b in zip(values, values[1:])]
    run, expected = 0, None
    for k, s in enumerate(small, start=2):
        run = run + 1 if s else 0
        if run >= p:
            expected = k
            break
    assert stop == expected


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=300).map(sorted).map(lambda v: v[::-1]),
       st.integers(1, 20), st.floats(1e-6, 1.0))
def test_fuzzy_no_earlier_than_strict_on_nonincreasing(values, p, tol):
    s = first_stop(StopMonitor("strict", patience=p, tol=tol), values)
    f = first_stop(StopMonitor("fuzzy", patience=p), values)
    assert f is None or (s is not None and f >= s)


@given(st.lists(st.integers(0, 20), min_size=1, max_size=100))
def test_refeeding_best_never_resets(values):
    m = StopMonitor("fuzzy", patience=1000, direction="maximize")
    for v in values:
        m.update(v)
    best, counter = m.best, m.counter
    m.update(best)
    assert m.best == best and m.counter == counter + 1
