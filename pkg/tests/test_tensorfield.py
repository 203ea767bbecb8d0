from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polymass import tensorfield as tf
from polymass.errors import DimensionError, DomainError, SmallnessError, UnknownIdError, ValidationError
from polymass.fitting import fit_decay_order

CATALOG = [tf.field_from_id(i) for i in tf.DEFAULT_FIELDS]
CURVED = [f for f in CATALOG if not f.is_flat]


def _fd_christoffel(field_, x, step=1e-4):
    """Christoffel symbols from central differences of g alone."""
    n = field_.dim
    h = step * np.linalg.norm(x)
    d = np.empty((n, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        d[k] = (field_.coeff(x + e) - field_.coeff(x - e)) / (2 * h)
    ginv = np.linalg.inv(field_.coeff(x))
    out = np.empty((n, n, n))
    for k in range(n):
        for i in range(n):
            for j in range(n):
                out[k, i, j] = 0.5 * sum(
                    ginv[k, l] * (d[i, l, j] + d[j, i, l] - d[l, i, j]) for l in range(n)
                )
    return out


points3 = st.tuples(*[st.floats(-300, 300)] * 3).map(np.array).filter(lambda x: np.linalg.norm(x) > 3)


def test_euclidean_is_identity_with_zero_derivatives():
    f = tf.make_euclidean(4)
    x = np.array([[1.0, 2.0, 3.0, 4.0], [-5.0, 0.5, 0.0, 9.0]])
    assert np.array_equal(f.metric(x), np.broadcast_to(np.eye(4), (2, 4, 4)))
    assert not np.any(f.dmetric(x))
    assert not np.any(f.d2metric(x))
    assert np.all(f.perturbation_norm(x) == 0)
    assert f.is_flat and f.decay_order is None and f.analytic_mass == 0.0


def test_dimension_below_three_rejected():
    with pytest.raises(DimensionError):
        tf.make_euclidean(2)
    with pytest.raises(DimensionError):
        tf.make_schwarzschild_isotropic(2, 1.0)


def test_schwarzschild_zero_mass_is_euclidean():
    s = tf.make_schwarzschild_isotropic(3, 0.0)
    x = tf.sample_points(3, 50, 2.0, 100.0, seed=1)
    assert np.array_equal(s.metric(x), tf.make_euclidean(3).metric(x))


def test_schwarzschild_g11_closed_form():
    s = tf.make_schwarzschild_isotropic(3, 1.0)
    g = s.metric(np.array([10.0, 0.0, 0.0]))
    assert g[0, 0] == pytest.approx((1 + 1 / 20) ** 4, rel=1e-15)
    assert g[0, 1] == 0.0


def test_schwarzschild_cutoff_is_horizon():
    s = tf.make_schwarzschild_isotropic(3, 1.0)
    assert s.inner_radius == pytest.approx(0.5)
    with pytest.raises(DomainError):
        s.metric(np.array([0.3, 0.0, 0.0]))
    # |h| < eps(n) holds beyond the recorded smallness radius
    r = s.small_beyond * 1.0001
    assert s.perturbation_norm(np.array([r, 0, 0])) < tf.smallness_bound(3)


def test_schwarzschild_4d_decay_exponent():
    s = tf.make_schwarzschild_isotropic(4, 1.0)
    radii = np.geomspace(20, 200, 12)
    prof = tf.decay_profile(s, radii)
    assert fit_decay_order(radii, prof["h"]) == pytest.approx(2.0, abs=0.05)


def test_perturbation_zero_amplitude_is_euclidean():
    f = tf.make_perturbation(3, 1.0, 0.0, 7)
    x = tf.sample_points(3, 20, 2.0, 50.0)
    assert np.array_equal(f.metric(x), np.broadcast_to(np.eye(3), (20, 3, 3)))


def test_perturbation_positive_definite_on_samples():
    f = tf.make_perturbation(3, 1.0, 0.1, 7)
    x = tf.sample_points(3, 10_000, 5.0, 500.0, seed=11)
    assert np.all(tf.is_positive_definite(f, x))


def test_perturbation_derivative_decay():
    f = tf.make_perturbation(3, 1.0, 0.1, 7)
    radii = np.geomspace(10, 1000, 10)
    prof = tf.decay_profile(f, radii)
    assert fit_decay_order(radii, prof["dh"]) == pytest.approx(2.0, abs=0.1)


def test_perturbation_preconditions():
    with pytest.raises(ValidationError):
        tf.make_perturbation(3, 0.5, 0.1, 7)
    with pytest.raises(SmallnessError):
        tf.make_perturbation(3, 1.0, 0.3, 7)


def test_perturbation_reproducible_and_seed_dependent():
    x = np.array([12.0, -3.0, 4.0])
    a = tf.make_perturbation(3, 1.0, 0.1, 7).metric(x)
    b = tf.make_perturbation(3, 1.0, 0.1, 7).metric(x)
    c = tf.make_perturbation(3, 1.0, 0.1, 8).metric(x)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)


def test_perturbation_not_conformally_flat():
    g = tf.make_perturbation(3, 1.0, 0.1, 7).metric(np.array([10.0, 1.0, 2.0]))
    assert not np.allclose(g, g[0, 0] * np.eye(3))


def test_christoffel_zero_for_euclidean():
    assert not np.any(tf.christoffel(tf.make_euclidean(3), np.array([1.0, 2.0, 3.0])))


def test_christoffel_matches_finite_differences():
    s = tf.make_schwarzschild_isotropic(3, 1.0)
    x = np.array([10.0, 0.0, 0.0])
    exact = tf.christoffel(s, x)
    approx = _fd_christoffel(s, x)
    assert np.max(np.abs(exact - approx)) <= 1e-6 * np.max(np.abs(approx))


@pytest.mark.parametrize("field_", CATALOG, ids=lambda f: f.name)
@given(x=points3)
def test_christoffel_symmetric_and_metric_positive(field_, x):
    if field_.dim != 3:
        x = np.concatenate([x, np.full(field_.dim - 3, 2.0)])
    gam = tf.christoffel(field_, x)
    assert np.array_equal(gam, np.swapaxes(gam, 1, 2))
    assert tf.is_positive_definite(field_, x)
    g = field_.metric(x)
    assert np.array_equal(g, g.T)


@pytest.mark.parametrize("field_", CURVED, ids=lambda f: f.name)
def test_analytic_derivatives_match_central_differences(field_):
    x = tf.sample_points(field_.dim, 40, 5.0, 400.0, seed=5)
    d_exact = field_.dcoeff(x)
    d_fd = tf._fd_derivative(field_.coeff, x, field_.dim)
    scale = np.max(np.abs(d_fd), axis=(1, 2, 3), keepdims=True)
    assert np.max(np.abs(d_exact - d_fd) / scale) <= 1e-6
    dd_exact = field_.d2coeff(x)
    dd_fd = tf._fd_derivative(field_.dcoeff, x, field_.dim)
    scale = np.max(np.abs(dd_fd), axis=(1, 2, 3, 4), keepdims=True)
    assert np.max(np.abs(dd_exact - dd_fd) / scale) <= 1e-6


@pytest.mark.parametrize("field_", CURVED, ids=lambda f: f.name)
def test_decay_exponents_of_h_and_derivatives(field_):
    p = field_.decay_order
    radii = np.geomspace(200, 20000, 8)
    prof = tf.decay_profile(field_, radii)
    assert fit_decay_order(radii, prof["h"]) == pytest.approx(p, abs=0.1)
    assert fit_decay_order(radii, prof["dh"]) == pytest.approx(p + 1, abs=0.1)
    assert fit_decay_order(radii, prof["ddh"]) == pytest.approx(p + 2, abs=0.1)


def test_fd_fallback_used_without_analytic_derivatives():
    s = tf.make_schwarzschild_isotropic(3, 1.0)
    bare = tf.MetricField(dim=3, coeff=s.coeff, decay_order=1.0, inner_radius=0.5)
    x = np.array([7.0, -2.0, 3.0])
    assert np.allclose(bare.dmetric(x), s.dmetric(x), rtol=1e-7, atol=1e-12)
    assert np.allclose(bare.d2metric(x), s.d2metric(x), rtol=1e-5, atol=1e-10)


def test_dimension_mismatch_rejected():
    with pytest.raises(DimensionError):
        tf.make_euclidean(3).metric(np.ones(4))


@pytest.mark.parametrize("ident", tf.DEFAULT_FIELDS)
def test_catalog_ids_round_trip(ident):
    entry = tf.MetricCatalogEntry.parse(ident)
    assert entry.id == ident
    assert tf.field_from_id(ident).name == ident


@pytest.mark.parametrize("ident", ["bogus:3", "euclidean", "schwarzschild:3", "perturb:3:x:0.1:7"])
def test_unknown_ids_rejected(ident):
    with pytest.raises(UnknownIdError):
        tf.field_from_id(ident)


def test_corrupted_derivative_differs_from_finite_differences():
    f = tf.with_corrupted_derivative(tf.make_schwarzschild_isotropic(3, 1.0))
    x = np.array([[20.0, 1.0, -3.0]])
    fd = tf._fd_derivative(f.coeff, x, 3)
    assert not np.allclose(f.dmetric(x), fd, rtol=1e-3)


@pytest.mark.parametrize("field_", CATALOG, ids=lambda f: f.name)
def test_inverse_and_determinant_match_dense_linear_algebra(field_):
    x = tf.sample_points(field_.dim, 50, 3.0, 300.0, seed=4)
    g = field_.metric(x)
    assert np.allclose(field_.inverse(x), np.linalg.inv(g), rtol=1e-14, atol=1e-16)
    assert np.allclose(field_.determinant(x), np.linalg.det(g), rtol=1e-13, atol=0)
