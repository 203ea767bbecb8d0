"""Power-law fits and Richardson extrapolation on radius/scale ladders."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.optimize import brentq


def fit_decay_order(radii: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of ``-log|values|`` against ``log radii``.

    A value decaying like ``C * r**(-q)`` returns ``q``. Returns ``nan`` when
    any value is exactly zero (no power law to fit).
    """
    r = np.asarray(radii, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    if r.size < 2 or r.size != v.size:
        raise ValueError("need at least two matching (radius, value) samples")
    if np.any(v == 0.0) or not np.all(np.isfinite(v)):
        return float("nan")
    slope, _ = np.polyfit(np.log(r), np.log(v), 1)
    return float(-slope)


def fit_constant(radii: Sequence[float], values: Sequence[float], order: float) -> float:
    """Least-squares ``C`` in ``|values| ~ C r**(-order)`` (log space)."""
    r = np.asarray(radii, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    return float(np.exp(np.mean(np.log(v) + order * np.log(r))))


def estimate_order(scales: Sequence[float], estimates: Sequence[float]) -> float:
    """Convergence order from the three finest entries of a ladder.

    Assumes ``E(s) = E_inf + C s**(-q)`` and solves for ``q`` from the two
    successive differences. Returns ``nan`` if the differences vanish or do
    not shrink.
    """
    s = np.asarray(scales, dtype=float)[-3:]
    e = np.asarray(estimates, dtype=float)[-3:]
    if s.size < 3:
        raise ValueError("order estimation needs at least three scales")
    d1, d2 = e[1] - e[0], e[2] - e[1]
    if d1 == 0.0 or d2 == 0.0 or np.sign(d1) != np.sign(d2) or abs(d2) >= abs(d1):
        return float("nan")
    target = d1 / d2

    def ratio(q):
        return (s[1] ** -q - s[0] ** -q) / (s[2] ** -q - s[1] ** -q) - target

    lo, hi = 1e-6, 50.0
    if ratio(lo) * ratio(hi) > 0:
        return float("nan")
    return float(brentq(ratio, lo, hi, xtol=1e-12))


def richardson_limit(scales: Sequence[float], estimates: Sequence[float], order: float) -> float:
    """Eliminate the ``s**(-order)`` term using the two finest entries."""
    s1, s2 = float(scales[-2]), float(scales[-1])
    e1, e2 = float(estimates[-2]), float(estimates[-1])
    w1, w2 = s1**order, s2**order
    return (w2 * e2 - w1 * e1) / (w2 - w1)
