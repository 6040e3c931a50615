"""The compiled kernels and the numpy fallback must agree."""

import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from durable_recourse import kernels
from durable_recourse.kernels import _fallback

core = pytest.importorskip("durable_recourse.kernels._core")

unit_mat = arrays(np.float64, (6, 4), elements=st.floats(0.0, 1.0, allow_subnormal=False))


def test_backend_selection():
    pure = os.environ.get("DURABLE_RECOURSE_PURE", "") not in ("", "0")
    assert kernels.BACKEND == ("python" if pure else "compiled")


@settings(max_examples=100, deadline=None)
@given(unit_mat, unit_mat)
def test_attainability_and_success_agree(x_f, x_cf):
    x_cf[0] = x_f[0]
    x_cf[1, 0] = 0.0
    d = np.array([0.84, 0.15, 0.0, 0.5])
    np.testing.assert_array_equal(core.attainability(x_f, x_cf), _fallback.attainability(x_f, x_cf))
    np.testing.assert_allclose(core.success_probability(x_f, x_cf, d, 0.05),
                               _fallback.success_probability(x_f, x_cf, d, 0.05), rtol=1e-13,
                               atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 20, elements=st.floats(0, 1, allow_subnormal=False)),
       arrays(np.float64, 20, elements=st.floats(0, 10, allow_subnormal=False)))
def test_dropout_and_reapply_agree(b, q):
    np.testing.assert_allclose(core.dropout_probability(b, q, 2.0, 0.1, 0.5),
                               _fallback.dropout_probability(b, q, 2.0, 0.1, 0.5), rtol=1e-13)
    u = np.clip(q / 10.0, 0, 1)
    np.testing.assert_allclose(core.reapply_probability(b, u, 3.0),
                               _fallback.reapply_probability(b, u, 3.0), rtol=1e-13)


@settings(max_examples=100, deadline=None)
@given(unit_mat, unit_mat, unit_mat, arrays(np.bool_, (6, 4)))
def test_attempt_features_agree(x_f, x_cf, uni, mask):
    d = np.array([0.84, 0.15, 0.85, 0.1])
    a = core.attempt_features(x_f, x_cf, mask, d, 0.5, uni)
    b = _fallback.attempt_features(x_f, x_cf, mask, d, 0.5, uni)
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(1, 200), elements=st.floats(0.01, 1.0, allow_subnormal=False)))
def test_gini_agree(g):
    assert core.gini_pairwise(g) == pytest.approx(_fallback.gini_pairwise(g), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from([0.1, 0.3, 0.5, 0.7, 0.9]), min_size=1, max_size=150),
       st.integers(1, 150))
def test_topk_agree_with_ties(scores, k):
    s = np.array(scores)
    ids = np.arange(len(s), dtype=np.int64)[::-1].copy()
    k = min(k, len(s))
    np.testing.assert_array_equal(core.topk(s, ids, k), _fallback.topk(s, ids, k))


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 8, elements=st.floats(0, 1, allow_subnormal=False)),
       arrays(np.float64, 8, elements=st.floats(-3, 3, allow_subnormal=False)), st.floats(0, 6, allow_subnormal=False))
def test_greedy_agree(x, w, gain):
    a, ra = core.greedy_l1(x, w, gain)
    b, rb = _fallback.greedy_l1(x, w, gain)
    np.testing.assert_allclose(a, b, atol=1e-14)
    assert ra == pytest.approx(rb, abs=1e-12)
