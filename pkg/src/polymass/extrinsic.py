"""Curved-metric geometry of flat faces and edges, plus expansion residuals.

Every function here is vectorised: ``x`` may be a single point ``(n,)`` or a
batch ``(N, n)``, and results carry the same leading shape.

Faces are flat in the coordinate picture, so the second fundamental form
reduces to Christoffel symbols contracted with the tangent basis and the
g-unit normal. The residual helpers compare exact quantities with their
first-order expansions in ``h = g - delta`` and are meant to be evaluated on
a ladder of radii, where the log-log slope reveals the order of the
remainder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import ConditioningError, ValidationError
from .fitting import fit_decay_order
from .polytope import Edge, Face, PolygonRegion, Polyhedron, box, octahedron
from .tensorfield import MetricField, _fd_derivative

Array = np.ndarray

CONDITIONING_LIMIT = 1e-9
EXACT_FLOOR = 1e-13  # residuals below this at every radius count as identically zero
DEFAULT_LADDER = (25.0, 50.0, 100.0, 200.0)
ORDER_TOLERANCE = 0.3


def _normal_of(face_or_normal: Union[Face, Array]) -> Array:
    if isinstance(face_or_normal, Face):
        return face_or_normal.unit_normal
    return np.asarray(face_or_normal, dtype=float)


@dataclass(frozen=True)
class FaceFrame:
    x: Array
    basis: Array  # (n - 1, n) Euclidean-orthonormal tangent vectors
    normal_bar: Array
    normal: Array  # g-unit normal, (..., n)
    induced_metric: Array  # gamma_ab, (..., n - 1, n - 1)
    density: Array  # sqrt det gamma


def g_unit_normal(field_: MetricField, face: Union[Face, Array], x: Array) -> Array:
    """nu^i = g^ij nu_bar_j / sqrt(g^ij nu_bar_i nu_bar_j)."""
    nb = _normal_of(face)
    raised = field_.inverse(x) @ nb
    return raised / np.sqrt(raised @ nb)[..., None]


def induced_metric(field_: MetricField, basis: Array, x: Array) -> Array:
    g = field_.metric(x)
    return basis @ g @ basis.T


def induced_density(field_: MetricField, region: Union[Face, Edge, Array], x: Array) -> Array:
    """dsigma / dsigma_bar = sqrt det(g restricted to the tangent space)."""
    basis = region.tangent_basis if isinstance(region, (Face, Edge)) else np.asarray(region)
    x = np.asarray(x, dtype=float)
    if basis.shape[0] == 0:
        field_.check_domain(x)
        return np.ones(x.shape[:-1])
    det = np.linalg.det(induced_metric(field_, basis, x))
    if np.any(det <= 0):
        raise ConditioningError("induced metric is not positive definite")
    return np.sqrt(det)


def face_frame(field_: MetricField, face: Face, x: Array, basis: Optional[Array] = None) -> FaceFrame:
    _, E = _basis_for(face, basis)
    gamma = induced_metric(field_, E, x)
    return FaceFrame(
        x=np.asarray(x, dtype=float),
        basis=E,
        normal_bar=face.unit_normal,
        normal=g_unit_normal(field_, face, x),
        induced_metric=gamma,
        density=np.sqrt(np.linalg.det(gamma)),
    )


def _basis_for(face: Union[Face, Array], basis: Optional[Array]) -> tuple[Array, Array]:
    nb = _normal_of(face)
    if basis is not None:
        return nb, np.asarray(basis, dtype=float)
    if isinstance(face, Face):
        return nb, face.tangent_basis
    return nb, _tangent_from_normal(nb)


def _tangent_from_normal(nb: Array) -> Array:
    from .polytope import gram_schmidt_basis

    return gram_schmidt_basis(nb, len(nb) - 1)


def _face_geometry(field_: MetricField, nb: Array, E: Array, x: Array):
    """The g-unit normal, A_ab and gamma_ab at x, from one evaluation of g and dg."""
    g = field_.metric(x)
    d = field_.dmetric(x)
    raised = np.linalg.solve(g, np.broadcast_to(nb, g.shape[:-1])[..., None])[..., 0]
    nu = raised / np.sqrt(raised @ nb)[..., None]
    # Gamma^k_ij g_kl nu^l = Gamma_lij nu^l with Gamma_lij = (d_i g_lj + d_j g_il - d_l g_ij) / 2
    t1 = np.einsum("...ilj,...l->...ij", d, nu)
    t3 = np.einsum("...lij,...l->...ij", d, nu)
    lowered = 0.5 * (t1 + np.swapaxes(t1, -1, -2) - t3)
    A = -(E @ lowered @ E.T)
    gamma = E @ g @ E.T
    return nu, A, gamma


def second_fundamental_form(
    field_: MetricField, face: Union[Face, Array], x: Array, basis: Optional[Array] = None
) -> Array:
    """A_ab = -Gamma^k_ij e_a^i e_b^j g_kl nu^l for a coordinate-flat face."""
    nb, E = _basis_for(face, basis)
    return _face_geometry(field_, nb, E, x)[1]


def _trace_curvature(field_: MetricField, nb: Array, x: Array) -> tuple[Array, Array]:
    """(H, det gamma) without building a tangent frame.

    H = -P^ij Gamma_lij nu^l with the tangential projector P = g^-1 - nu nu,
    and det gamma = det g * (nu_bar g^-1 nu_bar) for a Euclidean-unit nu_bar.
    """
    g = field_.metric(x)
    d = field_.dmetric(x)
    ginv = field_.inverse(x, g)
    raised = ginv @ nb
    quad = raised @ nb
    nu = raised / np.sqrt(quad)[..., None]
    proj = ginv - nu[..., :, None] * nu[..., None, :]
    # P^ij Gamma_lij = P^ij d_i g_lj - P^ij d_l g_ij / 2 (P symmetric)
    first = np.einsum("...ilj,...ij->...l", d, proj)
    second = np.einsum("...lij,...ij->...l", d, proj)
    H = -np.einsum("...l,...l->...", first - 0.5 * second, nu)
    return H, field_.determinant(x, g) * quad


def mean_curvature(
    field_: MetricField, face: Union[Face, Array], x: Array, basis: Optional[Array] = None
) -> Array:
    """H = gamma^ab A_ab (positive on round spheres with outward normal).

    ``basis`` is accepted for symmetry with ``second_fundamental_form``; the
    trace does not depend on the choice of tangent frame.
    """
    return _trace_curvature(field_, _normal_of(face), x)[0]


def curvature_density(field_: MetricField, face: Face, x: Array) -> Array:
    """H times dsigma/dsigma_bar, the face integrand of the polyhedral mass."""
    H, det = _trace_curvature(field_, face.unit_normal, x)
    if np.any(det <= 0):
        raise ConditioningError("induced metric is not positive definite")
    return H * np.sqrt(det)


def cos_dihedral(field_: MetricField, nu_a: Array, nu_b: Array, x: Array) -> Array:
    ginv = field_.inverse(x)
    ab = nu_a @ ginv @ nu_b
    aa = nu_a @ ginv @ nu_a
    bb = nu_b @ ginv @ nu_b
    return ab / np.sqrt(aa * bb)


def _safe_arccos(q: Array) -> Array:
    q = np.asarray(q, dtype=float)
    excess = np.abs(q) - 1.0
    if np.any(excess > CONDITIONING_LIMIT):
        raise ConditioningError(
            f"cosine quotient {float(q.flat[np.argmax(excess)])} lies outside [-1, 1]"
        )
    return np.arccos(np.clip(q, -1.0, 1.0))


def g_dihedral_angle(field_: MetricField, edge: Edge, x: Array) -> tuple[Array, Array]:
    """(theta, alpha) under g; alpha = pi - theta on convex edges, pi + theta otherwise."""
    theta = _safe_arccos(cos_dihedral(field_, edge.normal_a, edge.normal_b, x))
    alpha = (math.pi - theta) if edge.convex else (math.pi + theta)
    return theta, alpha


def angle_defect(field_: MetricField, edge: Edge, x: Array) -> Array:
    """alpha - alpha_bar, computed as the difference of the two arccos values."""
    theta, _ = g_dihedral_angle(field_, edge, x)
    theta_bar = edge.theta_bar
    return (theta_bar - theta) if edge.convex else (theta - theta_bar)


# --------------------------------------------------------------------------
# residuals of first-order expansions on flat faces


def _tangential_dual(h: Array, nb: Array, E: Array) -> tuple[Array, Array]:
    """X = sum_a h(nu_bar, e_a) e_a and its components h(nu_bar, e_a)."""
    comps = np.einsum("...ij,i,aj->...a", h, nb, E)
    return comps @ E, comps


def _div_x(dh: Array, nb: Array, E: Array) -> Array:
    """sum_a e_a^k d_k h_jl nu_bar^j e_a^l."""
    return np.einsum("ak,...kjl,j,al->...", E, dh, nb, E)


def residual_prop21(field_: MetricField, face: Face, x: Array) -> Array:
    """|2H - [(d_j h_ii - d_i h_ij) nu_bar^j - div X]|."""
    nb, E = face.unit_normal, face.tangent_basis
    dh = field_.dmetric(x)
    trace_term = np.einsum("...jii,j->...", dh, nb)
    div_term = np.einsum("...iij,j->...", dh, nb)
    predicted = trace_term - div_term - _div_x(dh, nb, E)
    return np.abs(2.0 * mean_curvature(field_, face, x) - predicted)


def residual_identity_MT(field_: MetricField, face: Face, x: Array) -> Array:
    """|d_i h_(i nu) - d_nu h_(nu nu) - div X|; vanishes identically on flat faces."""
    nb, E = face.unit_normal, face.tangent_basis
    dh = field_.dmetric(x)
    div_nu = np.einsum("...iij,j->...", dh, nb)
    normal_normal = np.einsum("k,...kij,i,j->...", nb, dh, nb, nb)
    return np.abs(div_nu - normal_normal - _div_x(dh, nb, E))


def residual_normal_expansion(field_: MetricField, face: Face, x: Array) -> Array:
    """|nu - nu_bar + X + h(nu_bar, nu_bar) nu_bar / 2| in the Euclidean norm."""
    nb, E = face.unit_normal, face.tangent_basis
    h = field_.perturbation(x)
    X, _ = _tangential_dual(h, nb, E)
    hnn = np.einsum("...ij,i,j->...", h, nb, nb)
    v = g_unit_normal(field_, face, x) - nb + X + 0.5 * hnn[..., None] * nb
    return np.linalg.norm(v, axis=-1)


def residual_cos_angle(field_: MetricField, edge: Edge, x: Array) -> Array:
    """|cos theta - cos theta_bar - [cos theta_bar (h_aa + h_bb) / 2 - h_ab]|."""
    a, b = edge.normal_a, edge.normal_b
    h = field_.perturbation(x)
    c0 = edge.cos_theta_bar
    haa = np.einsum("...ij,i,j->...", h, a, a)
    hbb = np.einsum("...ij,i,j->...", h, b, b)
    hab = np.einsum("...ij,i,j->...", h, a, b)
    first = 0.5 * c0 * (haa + hbb) - hab
    return np.abs(cos_dihedral(field_, a, b, x) - c0 - first)


def residual_angle_defect(field_: MetricField, edge: Edge, x: Array) -> Array:
    return np.abs(angle_defect(field_, edge, x))


def residual_face_density(field_: MetricField, face: Face, x: Array) -> Array:
    return np.abs(induced_density(field_, face, x) - 1.0)


def derivative_consistency(field_: MetricField, x: Array, order: int = 1) -> float:
    """Max relative gap between analytic derivatives and central differences.

    Returns 0 when the field has no analytic derivative of that order.
    """
    x = np.asarray(x, dtype=float)
    if order == 1:
        if field_.dcoeff is None:
            return 0.0
        exact = field_.dcoeff(x)
        approx = _fd_derivative(field_.coeff, x, field_.dim)
    else:
        if field_.d2coeff is None or field_.dcoeff is None:
            return 0.0
        exact = field_.d2coeff(x)
        approx = _fd_derivative(field_.dcoeff, x, field_.dim)
    scale = np.max(np.abs(approx), axis=tuple(range(x.ndim - 1, approx.ndim)), keepdims=True)
    scale = np.maximum(scale, 1e-300)
    return float(np.max(np.abs(exact - approx) / scale))


# --------------------------------------------------------------------------
# radius ladders


@dataclass
class ExpansionResidualReport:
    name: str
    radii: tuple
    residuals: tuple
    predicted_order: Optional[float]
    fitted_order: Optional[float]
    tolerance: float
    passed: bool
    exact: bool = False
    note: str = ""

    @property
    def sample_radius(self) -> float:
        return self.radii[-1]

    @property
    def residual(self) -> float:
        return self.residuals[-1]


def sample_face_points(P: Polyhedron, per_face: int = 2) -> list[tuple[Face, Array]]:
    """Deterministic interior points on each face, away from edges."""
    out = []
    weights = [(0.37, -0.21, 0.13), (-0.28, 0.41, -0.33), (0.11, 0.29, 0.45)]
    for f in P.faces:
        for w in weights[:per_face]:
            if isinstance(f.region, PolygonRegion):
                v = f.region.vertices
                c = v.mean(axis=0)
                pt = c + 0.5 * sum(wk * (v[k % len(v)] - c) for k, wk in enumerate(w))
                if not f.region.contains(pt):
                    pt = c
            else:
                k = f.region.dim
                t = np.array([w[j % 3] for j in range(k)]) * f.region.half_widths
                pt = f.region.center + t @ f.region.axes
            out.append((f, pt))
    return out


def sample_edge_points(P: Polyhedron, per_edge: int = 1) -> list[tuple[Edge, Array]]:
    out = []
    for e in P.edges:
        for s in (0.23, -0.41)[:per_edge]:
            k = e.region.dim
            t = np.full(k, s) * e.region.half_widths
            out.append((e, e.region.center + t @ e.region.axes))
    return out


def residual_ladder(
    name: str,
    field_: MetricField,
    samples: Sequence[tuple],
    fn: Callable,
    predicted_order: Optional[float],
    radii: Sequence[float] = DEFAULT_LADDER,
    tolerance: float = ORDER_TOLERANCE,
    floor: float = EXACT_FLOOR,
) -> ExpansionResidualReport:
    """Scale sample points by each radius, take the max residual, fit the slope.

    Samples are (face-or-edge, point) pairs on a polyhedron of unit size; the
    homothety x -> r x keeps normals and angles, so the same face/edge
    objects remain valid at every rung.
    """
    radii = tuple(float(r) for r in radii)
    if len(radii) < 3:
        raise ValidationError("a residual ladder needs at least three radii")
    values = []
    for r in radii:
        worst = 0.0
        for obj, pt in samples:
            worst = max(worst, float(np.max(fn(field_, obj, r * np.asarray(pt)))))
        values.append(worst)
    if max(values) <= floor:
        return ExpansionResidualReport(
            name, radii, tuple(values), predicted_order, None, tolerance, True, exact=True,
            note="identically zero",
        )
    fitted = fit_decay_order(radii, values)
    if predicted_order is None or not math.isfinite(fitted):
        ok = False
    else:
        ok = abs(fitted - predicted_order) <= tolerance
    return ExpansionResidualReport(name, radii, tuple(values), predicted_order, fitted, tolerance, ok)


def threshold_check(name: str, value: float, limit: float) -> ExpansionResidualReport:
    return ExpansionResidualReport(
        name, (), (value,), None, None, limit, bool(value <= limit), note=f"max <= {limit:g}"
    )


def verification_geometry(n: int) -> Polyhedron:
    """Unit-size geometry whose faces and edges the residual ladder samples."""
    return octahedron(1.0) if n == 3 else box(n, 1.0)


def verify_field(
    field_: MetricField,
    radii: Sequence[float] = DEFAULT_LADDER,
    tolerance: float = ORDER_TOLERANCE,
) -> list[ExpansionResidualReport]:
    """Every registered residual test for one field, in a fixed order."""
    n = field_.dim
    P = verification_geometry(n)
    faces = sample_face_points(P)
    edges = sample_edge_points(P)
    p = field_.decay_order
    pred = (lambda k, c: None) if p is None else (lambda k, c: k * p + c)
    reports = [
        residual_ladder("prop21_mean_curvature", field_, faces, residual_prop21, pred(2, 1), radii, tolerance),
        residual_ladder("normal_expansion", field_, faces, residual_normal_expansion, pred(2, 0), radii, tolerance),
        residual_ladder("cos_angle_expansion", field_, edges, residual_cos_angle, pred(2, 0), radii, tolerance),
        residual_ladder("angle_defect", field_, edges, residual_angle_defect, pred(1, 0), radii, tolerance),
        residual_ladder("face_density", field_, faces, residual_face_density, pred(1, 0), radii, tolerance),
    ]
    pts = np.array([r * pt for r in radii for _, pt in faces])
    ident = max(float(np.max(residual_identity_MT(field_, f, r * pt))) for r in radii for f, pt in faces)
    reports.append(threshold_check("identity_MT", ident, 1e-10))
    reports.append(threshold_check("first_derivative_fd", derivative_consistency(field_, pts, 1), 1e-6))
    reports.append(threshold_check("second_derivative_fd", derivative_consistency(field_, pts, 2), 1e-6))
    return reports
