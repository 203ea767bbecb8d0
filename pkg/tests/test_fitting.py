from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polymass.fitting import estimate_order, fit_constant, fit_decay_order, richardson_limit

orders = st.floats(0.2, 6.0)
consts = st.floats(1e-3, 1e3)
ladders = st.sampled_from([(25.0, 50.0, 100.0, 200.0), (10.0, 30.0, 90.0), (2.0, 3.0, 5.0, 8.0, 13.0)])


@given(q=orders, C=consts, radii=ladders)
def test_power_law_slope_recovered(q, C, radii):
    values = [C * r**-q for r in radii]
    assert fit_decay_order(radii, values) == pytest.approx(q, abs=1e-9)
    assert fit_constant(radii, values, q) == pytest.approx(C, rel=1e-9)


def test_sign_is_ignored_and_zero_gives_nan():
    assert fit_decay_order([1, 2, 4], [-1, -0.25, -0.0625]) == pytest.approx(2.0)
    assert math.isnan(fit_decay_order([1, 2, 4], [1.0, 0.0, 0.5]))


def test_mismatched_samples_rejected():
    with pytest.raises(ValueError):
        fit_decay_order([1, 2], [1.0])


@given(q=st.floats(0.3, 4.0), C=st.floats(-5, 5).filter(lambda c: abs(c) > 1e-2), limit=st.floats(-3, 3), radii=ladders)
def test_order_and_limit_from_exact_ladder(q, C, limit, radii):
    est = [limit + C * s**-q for s in radii]
    q_hat = estimate_order(radii, est)
    assert q_hat == pytest.approx(q, rel=1e-6)
    assert richardson_limit(radii, est, q_hat) == pytest.approx(limit, abs=1e-8 * max(1.0, abs(C)))


def test_order_undefined_for_non_shrinking_differences():
    assert math.isnan(estimate_order([1, 2, 3], [1.0, 1.0, 1.0]))
    assert math.isnan(estimate_order([1, 2, 3], [1.0, 2.0, 4.0]))
    with pytest.raises(ValueError):
        estimate_order([1, 2], [1.0, 2.0])
