import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from durable_recourse.behavior import (BehaviorParams, GapState, attainability,
                                       attainability_array, dropout_probability,
                                       dropout_probability_array, reapply_probability,
                                       success_probability, success_probability_array)
from durable_recourse.errors import ConfigurationError

unit = st.floats(0.0, 1.0)


def test_dropout_zero_at_rest():
    assert dropout_probability(GapState(0.0, 0), BehaviorParams()) == 0.0


def test_dropout_hand_value():
    p = BehaviorParams(rho=1.0, chi=0.0, omega=0.0)
    assert dropout_probability(GapState(1.0, 5), p) == pytest.approx(0.6321205588, abs=1e-9)


def test_attainability_hand_values():
    assert attainability(0.0, 1.0) == 0.0
    assert attainability(0.5, 0.8) == pytest.approx(1 / 0.24 - 1, abs=1e-12)
    assert attainability(0.5, 0.8) == pytest.approx(3.1666667, abs=1e-7)
    assert math.isinf(attainability(0.4, 0.4))
    assert math.isinf(attainability(0.4, 0.0))


def test_success_hand_values():
    assert success_probability(0.0, 1.0, 0.05) == 0.0
    a = attainability(0.5, 0.8)
    assert success_probability(a, 0.5, 0.05) == pytest.approx(1 - math.exp(-0.05 * a / 0.5),
                                                              abs=1e-12)
    assert success_probability(a, 0.5, 0.05) == pytest.approx(0.2714, abs=1e-4)
    assert success_probability(math.inf, 0.5, 0.05) == 1.0
    assert success_probability(2.0, 0.0, 0.05) == 1.0


def test_reapply_hand_values():
    p = BehaviorParams(nu=1.0)
    assert reapply_probability(GapState(0.5, 1, l=0, t=1, T=2), p) == pytest.approx(
        0.5 * math.exp(-0.5) + 0.5, abs=1e-12)
    assert reapply_probability(GapState(0.5, 1, l=0, t=1, T=2), p) == pytest.approx(
        0.8032653299, abs=1e-9)
    assert reapply_probability(GapState(0.7, 2, l=3, t=5, T=2), p) == 1.0
    assert reapply_probability(GapState(0.0, 2, l=3, t=3, T=4), p) == 1.0


@pytest.mark.parametrize("field,value", [("rho", -1.0), ("nu", float("nan")), ("beta", 0.0)])
def test_params_validation(field, value):
    with pytest.raises(ConfigurationError):
        BehaviorParams(**{field: value})


def test_difficulties_must_be_unit():
    with pytest.raises(ConfigurationError):
        BehaviorParams(difficulties=(0.5, 1.2))


@settings(max_examples=200, deadline=None)
@given(unit, unit, st.integers(0, 20), st.integers(0, 20))
def test_dropout_monotone(b1, b2, q1, q2):
    p = BehaviorParams()
    lo_b, hi_b = sorted((b1, b2))
    lo_q, hi_q = sorted((q1, q2))
    assert dropout_probability(GapState(lo_b, lo_q), p) <= dropout_probability(GapState(hi_b, lo_q), p)
    assert dropout_probability(GapState(lo_b, lo_q), p) <= dropout_probability(GapState(lo_b, hi_q), p)
    assert 0.0 <= dropout_probability(GapState(hi_b, hi_q), p) < 1.0


@settings(max_examples=200, deadline=None)
@given(unit, st.integers(0, 5), st.integers(1, 6))
def test_reapply_monotone_in_time(b, elapsed, T):
    elapsed = min(elapsed, T)
    p = BehaviorParams()
    now = reapply_probability(GapState(b, 0, l=0, t=elapsed, T=T), p)
    later = reapply_probability(GapState(b, 0, l=0, t=min(elapsed + 1, T), T=T), p)
    assert 0.0 <= now <= later <= 1.0


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1e3), st.floats(0.01, 1.0), st.floats(1e-3, 0.5), st.floats(1e-3, 0.5))
def test_success_increasing_in_beta(a, d, b1, b2):
    lo, hi = sorted((b1, b2))
    assert success_probability(a, d, lo) <= success_probability(a, d, hi)


def test_array_forms_match_scalar(rng):
    x_f = rng.random((50, 10))
    x_cf = rng.random((50, 10))
    x_cf[0, :3] = x_f[0, :3]
    d = np.array(BehaviorParams().difficulties)
    a = attainability_array(x_f, x_cf)
    p = success_probability_array(x_f, x_cf, d, 0.05)
    for i in range(50):
        for j in range(10):
            sa = attainability(x_f[i, j], x_cf[i, j])
            assert (math.isinf(sa) and math.isinf(a[i, j])) or a[i, j] == pytest.approx(sa, rel=1e-12)
            assert p[i, j] == pytest.approx(success_probability(sa, d[j], 0.05), abs=1e-12)
    b = rng.random(30)
    q = rng.integers(0, 5, 30)
    arr = dropout_probability_array(b, q, BehaviorParams())
    for bi, qi, v in zip(b, q, arr):
        assert v == pytest.approx(dropout_probability(GapState(bi, int(qi)), BehaviorParams()),
                                  abs=1e-12)
