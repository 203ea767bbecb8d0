from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate as sci

from polymass import slicing as sl, tensorfield as tf
from polymass.errors import DimensionError, DomainError, ValidationError

SCHW3 = tf.make_schwarzschild_isotropic(3, 1.0)
SCHW4 = tf.make_schwarzschild_isotropic(4, 1.0)


def test_restrict_takes_metric_minor():
    f = tf.field_from_id("perturb:4:1.5:0.1:7")
    sub = sl.restrict(f, 2, 3.0)
    y = np.array([10.0, -4.0, 7.0])
    full = f.metric(np.array([10.0, 3.0, -4.0, 7.0]))
    assert sub.dim == 3
    assert np.array_equal(sub.metric(y), full[np.ix_([0, 2, 3], [0, 2, 3])])
    d = f.dmetric(np.array([10.0, 3.0, -4.0, 7.0]))
    keep = [0, 2, 3]
    assert np.array_equal(sub.dmetric(y), d[np.ix_(keep, keep, keep)])


def test_restrict_checks_domain_in_full_space():
    sub = sl.restrict(SCHW3, 3, 0.3)
    with pytest.raises(DomainError):
        sub.metric(np.array([0.1, 0.1]))
    sub.metric(np.array([0.5, 0.1]))  # |x| = 0.59 lies outside the cutoff 0.5


@pytest.mark.parametrize("k", [0, 4])
def test_restrict_axis_is_one_based(k):
    with pytest.raises(ValidationError):
        sl.restrict(SCHW3, k, 0.0)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_euclidean_slices_vanish(n):
    e = tf.make_euclidean(n)
    for k in range(1, n + 1):
        q = sl.slice_quantity_any(e, k, 0.4, 2.0, level=0)
        assert abs(q.value) <= 1e-12


def test_euclidean_slice_mass_integral_vanishes():
    assert abs(sl.slice_mass_integral(tf.make_euclidean(3), 5.0, level=0, count=8)) <= 1e-12


def _gauss_bonnet_oracle(L, t, m=1.0):
    """Total Gaussian curvature of the slice square in g = u^4 delta.

    The slice metric is e^(2w) delta with w = 2 ln u, and K dA = -Lap(w) dx dy.
    """

    def lap_w(y, x):
        r2 = x * x + y * y + t * t
        r = math.sqrt(r2)
        u = 1 + m / (2 * r)
        du_dr = -m / (2 * r2)
        d2u_dr2 = m / r**3
        # restricted 2-D Laplacian of a radial function of the 3-D radius
        rho2 = x * x + y * y
        lap_u = d2u_dr2 * rho2 / r2 + du_dr * (2 / r - rho2 / r**3)
        grad_u2 = du_dr**2 * rho2 / r2
        return 2 * (lap_u / u - grad_u2 / u**2)

    val, _ = sci.dblquad(lap_w, -L, L, -L, L, epsabs=1e-13, epsrel=1e-12)
    return -val


@pytest.mark.parametrize("L, t", [(10.0, 2.0), (20.0, 7.5), (50.0, -30.0)])
def test_three_dimensional_slice_matches_total_curvature(L, t):
    q = sl.slice_quantity_3d(SCHW3, 3, t, L, level=2)
    assert q.value == pytest.approx(_gauss_bonnet_oracle(L, t), rel=1e-7)
    assert q.normalization == 1.0


def test_three_dimensional_slice_has_flat_corners_on_conformal_field():
    q = sl.slice_quantity_3d(SCHW3, 1, 0.0, 100.0)
    assert abs(q.edge_integral) <= 1e-12
    assert q.value > 0


def test_generic_square_formula_matches_gauss_bonnet():
    f = tf.field_from_id("perturb:3:1:0.1:7")
    for k in (1, 2, 3):
        a = sl.slice_quantity_3d(f, k, 4.0, 30.0).value
        b = sl.generic_square_quantity(f, k, 4.0, 30.0)
        assert a == pytest.approx(b, rel=1e-10, abs=1e-13)


def test_four_dimensional_slice_closed_form():
    # slice metric u^2 delta_3 = (sqrt u)^4 delta_3, so the face total is -2 sum_F int d_nu u.
    L = 10.0

    def dnu_u(z, y):
        x = np.array([L, y, z, 0.0])
        r = np.linalg.norm(x)
        return -x[0] / r**4

    one, _ = sci.dblquad(dnu_u, -L, L, -L, L, epsabs=1e-14, epsrel=1e-13)
    q = sl.slice_quantity(SCHW4, 4, 0.0, L, level=2)
    assert q.face_integral == pytest.approx(-2 * 6 * one, rel=1e-9)
    assert abs(q.edge_integral) <= 1e-12
    assert q.normalization == pytest.approx(2 * 4 * math.pi)


@given(t=st.floats(0.0, 40.0), k=st.integers(1, 3))
def test_slices_symmetric_under_reflection(t, k):
    a = sl.slice_quantity_3d(SCHW3, k, t, 40.0, level=0).value
    b = sl.slice_quantity_3d(SCHW3, k, -t, 40.0, level=0).value
    assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


def test_slice_argument_checks():
    with pytest.raises(DimensionError):
        sl.slice_quantity(SCHW3, 1, 0.0, 10.0)
    with pytest.raises(DimensionError):
        sl.slice_quantity_3d(SCHW4, 1, 0.0, 10.0)
    with pytest.raises(ValidationError):
        sl.slice_quantity_3d(SCHW3, 1, 11.0, 10.0)
    with pytest.raises(ValidationError):
        sl.slice_mass_integral(SCHW3, 0.4)


def test_profile_rows_and_nodes():
    ts, ws = sl.t_nodes(10.0, 6)
    assert ws.sum() == pytest.approx(20.0)
    assert np.allclose(ts, -ts[::-1])
    prof = sl.slice_profile(SCHW3, 10.0, axes=(1, 2, 3), level=0, count=6)
    assert len(prof) == 18
    assert {q.k for q in prof} == {1, 2, 3}
    assert set(prof[0].row()) == {"axis", "t", "L", "face_integral", "edge_integral", "value"}


def test_consistency_ladders_on_conformal_field_are_exact():
    face_sum, angle = sl.slice_consistency_ladders(SCHW4)
    assert face_sum.exact and angle.exact


def test_consistency_ladders_on_perturbation_field():
    face_sum, angle = sl.slice_consistency_ladders(tf.field_from_id("perturb:4:1.5:0.1:7"))
    assert face_sum.fitted_order == pytest.approx(2 * 1.5 + 1, abs=0.5)
    assert angle.fitted_order == pytest.approx(2 * 1.5, abs=0.5)
    assert not face_sum.exact and not angle.exact


def test_flat_minor_is_flat():
    sub = sl.restrict(tf.make_euclidean(4), 2, 0.0)
    y = tf.sample_points(3, 20, 1.0, 10.0)
    assert np.array_equal(sub.metric(y), np.broadcast_to(np.eye(3), (20, 3, 3)))


def test_conformal_minor_stays_conformal_and_positive():
    sub = sl.restrict(SCHW4, 4, 0.0)
    y = tf.sample_points(3, 1000, 1.0, 500.0, seed=9)
    g = sub.metric(y)
    u = 1 + 0.5 / np.linalg.norm(y, axis=1) ** 2
    assert np.allclose(g, (u**2)[:, None, None] * np.eye(3), rtol=1e-15, atol=0)
    assert np.all(np.linalg.eigvalsh(g) > 0)


def test_slice_quantity_is_lower_dimensional_polyhedral_mass():
    from polymass import massflux as mf, polytope as pt

    f = tf.field_from_id("perturb:4:1.5:0.1:7")
    q = sl.slice_quantity(f, 2, 5.0, 40.0)
    rep = mf.polyhedral_mass(sl.restrict(f, 2, 5.0), pt.box(3, 40.0))
    assert q.value == pytest.approx(rep.mass_estimate, rel=1e-12)


def test_schwarzschild_slice_square_keeps_right_angles():
    sub = sl.restrict(SCHW3, 3, 0.0)
    assert sl.turning_angle_total(sub, 100.0) == pytest.approx(2 * math.pi, abs=1e-12)
    small = sl.slice_quantity_3d(SCHW3, 3, 0.0, 100.0).value
    large = sl.slice_quantity_3d(SCHW3, 3, 0.0, 200.0).value
    assert 0 < large < small < 0.1


def _slice_and_cube_masses(L):
    from polymass import massflux as mf, polytope as pt

    rep = mf.polyhedral_mass(SCHW4, pt.hypercube(4, L))
    return sl.slice_mass_integral(SCHW4, L), rep


@pytest.mark.xfail(strict=True, reason="the cube estimate carries an O(L^-2) truncation gap far above quadrature error")
def test_slice_mass_matches_cube_within_quadrature_error():
    m, rep = _slice_and_cube_masses(50.0)
    assert abs(m - rep.mass_estimate) <= rep.quad_error + 1e-9


def test_slice_and_cube_masses_converge_together():
    from polymass.fitting import fit_decay_order

    sizes = [25.0, 50.0, 100.0]
    gaps = []
    for L in sizes:
        m, rep = _slice_and_cube_masses(L)
        gaps.append(abs(m - rep.mass_estimate))
    # remainder order 2p + 1 - (n - 1) = 2 for n = 4, p = 2
    assert fit_decay_order(sizes, gaps) == pytest.approx(2.0, abs=0.3)
