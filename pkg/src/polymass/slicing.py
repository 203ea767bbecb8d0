"""Coordinate-hyperplane slices of a metric and the slice-integrated mass.

Axes are numbered from 1 in this module, matching the usual ``x_1 .. x_n``
labelling of coordinate slices ``{x_k = t}``.

For n >= 4 the per-slice quantity is the polyhedral face/edge total of the
(n-1)-cube ``[-L, L]^(n-1)`` inside the slice, normalized by
``(n-2) omega_(n-2)``. For n = 3 the slice is a surface and the quantity is
the Gauss-Bonnet defect ``2 pi - int kappa ds - beta`` of the slice square,
left unnormalized; ``slice_mass_integral`` applies the matching ``1/(8 pi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import roots_legendre

from . import extrinsic
from .errors import DimensionError, ValidationError
from .fitting import fit_decay_order
from .massflux import DEFAULT_ANGLE_CONSTANT, DEFAULT_LEVEL, boundary_integrals, sphere_volume_constant
from .polytope import Edge, Face, Polyhedron, box
from .quadrature import evaluate, face_rule
from .tensorfield import MetricField

Array = np.ndarray

DEFAULT_T_NODES = 32


@dataclass(frozen=True)
class RestrictedField(MetricField):
    """``g`` restricted to the hyperplane ``{x_axis = t}`` as an (n-1)-metric.

    Points are given in the n-1 remaining coordinates; the domain check is
    done on the embedded point, so ``|x| > r0`` is enforced in the full space.
    """

    parent: Optional[MetricField] = None
    axis: int = 1
    t: float = 0.0

    def embed(self, y: Array) -> Array:
        y = np.asarray(y, dtype=float)
        return np.insert(y, self.axis - 1, self.t, axis=-1)

    def check_domain(self, y: Array) -> None:
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.dim:
            raise DimensionError(f"point dimension {y.shape[-1]} != slice dimension {self.dim}")
        self.parent.check_domain(self.embed(y))


def restrict(field_: MetricField, k: int, t: float) -> RestrictedField:
    """Minor of ``g`` omitting row and column ``k`` on the slice ``x_k = t``."""
    n = field_.dim
    if not 1 <= k <= n:
        raise ValidationError(f"slice axis must lie in 1..{n}, got {k}")
    keep = [i for i in range(n) if i != k - 1]
    ix = np.array(keep)

    def embed(y):
        return np.insert(np.asarray(y, dtype=float), k - 1, t, axis=-1)

    def coeff(y):
        g = field_.metric(embed(y))
        return g[..., ix[:, None], ix[None, :]]

    def dcoeff(y):
        d = field_.dmetric(embed(y))
        return d[..., ix[:, None, None], ix[None, :, None], ix[None, None, :]]

    def d2coeff(y):
        d = field_.d2metric(embed(y))
        return d[
            ...,
            ix[:, None, None, None],
            ix[None, :, None, None],
            ix[None, None, :, None],
            ix[None, None, None, :],
        ]

    return RestrictedField(
        dim=n - 1,
        coeff=coeff,
        dcoeff=dcoeff,
        d2coeff=d2coeff,
        decay_order=field_.decay_order,
        inner_radius=field_.inner_radius,
        name=f"{field_.name}|x{k}={t:g}",
        analytic_mass=None,
        conformally_flat=field_.conformally_flat,
        smallness_radius=field_.smallness_radius,
        params={"axis": k, "t": t},
        parent=field_,
        axis=k,
        t=float(t),
    )


@dataclass(frozen=True)
class SliceQuantity:
    k: int
    t: float
    L: float
    face_integral: float
    edge_integral: float
    value: float
    normalization: float
    quad_error: float = 0.0

    def row(self) -> dict:
        return {
            "axis": self.k,
            "t": self.t,
            "L": self.L,
            "face_integral": self.face_integral,
            "edge_integral": self.edge_integral,
            "value": self.value,
        }


def _check_slice(field_: MetricField, k: int, t: float, L: float) -> None:
    if not 1 <= k <= field_.dim:
        raise ValidationError(f"slice axis must lie in 1..{field_.dim}, got {k}")
    if L <= 0:
        raise ValidationError(f"cube half width must be positive, got {L}")
    if abs(t) > L:
        raise ValidationError(f"slice position |t| = {abs(t):g} exceeds the half width {L:g}")


def slice_quantity(
    field_: MetricField,
    k: int,
    t: float,
    L: float,
    level: int = DEFAULT_LEVEL,
    c: float = DEFAULT_ANGLE_CONSTANT,
) -> SliceQuantity:
    """Face/edge total of the (n-1)-cube of half width ``L`` inside ``{x_k = t}``."""
    n = field_.dim
    if n < 4:
        raise DimensionError("slice_quantity needs n >= 4; use slice_quantity_3d for n = 3")
    _check_slice(field_, k, t, L)
    sub = restrict(field_, k, t)
    cube = box(n - 1, L)
    face, edge, err = boundary_integrals(sub, cube, level, c)
    norm = (n - 2) * sphere_volume_constant(n - 2)
    return SliceQuantity(k, float(t), float(L), face, edge, (face + edge) / norm, norm, err / norm)


def _square_vertices(L: float) -> list[tuple[Array, Array, Array]]:
    """(vertex, direction along one side, direction along the other) for each corner."""
    out = []
    for sx, sy in ((1, 1), (-1, 1), (-1, -1), (1, -1)):
        v = np.array([sx * L, sy * L], dtype=float)
        out.append((v, np.array([-sx, 0.0]), np.array([0.0, -sy])))
    return out


def turning_angle_total(sub: MetricField, L: float) -> float:
    """beta: sum over the square's corners of pi minus the g-interior angle."""
    total = 0.0
    for v, d1, d2 in _square_vertices(L):
        g = sub.metric(v)
        q = (d1 @ g @ d2) / math.sqrt((d1 @ g @ d1) * (d2 @ g @ d2))
        total += math.pi - float(extrinsic._safe_arccos(q))
    return total


def slice_quantity_3d(
    field_: MetricField,
    k: int,
    t: float,
    L: float,
    level: int = DEFAULT_LEVEL,
) -> SliceQuantity:
    """Gauss-Bonnet defect ``2 pi - int kappa ds - beta`` of the slice square.

    Each side is straight in coordinates, so its geodesic curvature is the
    one-dimensional mean curvature with respect to the outward g-normal
    inside the slice, and ``ds = |tau|_g ds_bar``.
    """
    if field_.dim != 3:
        raise DimensionError("slice_quantity_3d needs a 3-dimensional field")
    _check_slice(field_, k, t, L)
    sub = restrict(field_, k, t)
    square = box(2, L)
    curvature = 0.0
    err = 0.0
    for side in square.faces:
        def kappa_ds(y, side=side):
            return extrinsic.mean_curvature(sub, side, y) * extrinsic.induced_density(sub, side, y)

        fine = face_rule(side, level)
        coarse = face_rule(side, level - 1 if level > 0 else level + 1)
        a = float(np.dot(fine.weights, evaluate(fine, kappa_ds)))
        b = float(np.dot(coarse.weights, evaluate(coarse, kappa_ds)))
        curvature += a
        err += abs(a - b)
    beta = turning_angle_total(sub, L)
    face = -curvature
    edge = 2.0 * math.pi - beta
    return SliceQuantity(k, float(t), float(L), face, edge, face + edge, 1.0, err)


def slice_quantity_any(field_: MetricField, k: int, t: float, L: float, level: int = DEFAULT_LEVEL) -> SliceQuantity:
    if field_.dim == 3:
        return slice_quantity_3d(field_, k, t, L, level)
    return slice_quantity(field_, k, t, L, level)


def generic_square_quantity(field_: MetricField, k: int, t: float, L: float, level: int = DEFAULT_LEVEL) -> float:
    """The face/edge formula applied to the slice square (sides as faces, corners as edges)."""
    sub = restrict(field_, k, t)
    face, edge, _ = boundary_integrals(sub, box(2, L), level, DEFAULT_ANGLE_CONSTANT)
    return face + edge


def t_nodes(L: float, count: int = DEFAULT_T_NODES) -> tuple[Array, Array]:
    x, w = roots_legendre(count)
    return L * x, L * w


def slice_profile(
    field_: MetricField,
    L: float,
    axes: Sequence[int],
    level: int = DEFAULT_LEVEL,
    count: int = DEFAULT_T_NODES,
) -> list[SliceQuantity]:
    ts, _ = t_nodes(L, count)
    return [slice_quantity_any(field_, k, float(t), L, level) for k in axes for t in ts]


def slice_mass_integral(
    field_: MetricField,
    L: float,
    level: int = DEFAULT_LEVEL,
    count: int = DEFAULT_T_NODES,
) -> float:
    """Mass from slices: ``omega_(n-2) / ((n-1) omega_(n-1)) sum_k int m_k dt``.

    For n = 3 the per-slice values are unnormalized, and the prefactor is
    ``1 / (8 pi)``.
    """
    n = field_.dim
    if n < 3:
        raise DimensionError("slicing needs n >= 3")
    if L <= field_.inner_radius:
        raise ValidationError(f"cube half width {L:g} does not contain the cutoff ball")
    ts, ws = t_nodes(L, count)
    total = 0.0
    for k in range(1, n + 1):
        vals = [slice_quantity_any(field_, k, float(t), L, level).value for t in ts]
        total += float(np.dot(ws, vals))
    if n == 3:
        return total / (8.0 * math.pi)
    return total * sphere_volume_constant(n - 2) / ((n - 1) * sphere_volume_constant(n - 1))


# --------------------------------------------------------------------------
# pointwise consistency between the full cube and its slices


def face_sum_residual(field_: MetricField, face_axis: int, sign: float, x: Array) -> float:
    """|sum over k != i of H~_i^(k) - (n - 2) H_i| at a point of the face ``x_i = sign * L``.

    ``face_axis`` is 1-based; ``x`` must lie on that face.
    """
    n = field_.dim
    i = face_axis - 1
    normal = np.zeros(n)
    normal[i] = sign
    H = float(extrinsic.mean_curvature(field_, normal, x))
    total = 0.0
    for k in range(1, n + 1):
        if k - 1 == i:
            continue
        sub = restrict(field_, k, float(x[k - 1]))
        y = np.delete(x, k - 1)
        total += float(extrinsic.mean_curvature(sub, np.delete(normal, k - 1), y))
    return abs(total - (n - 2) * H)


def _edge_between(n: int, i: int, si: float, j: int, sj: float) -> tuple[Array, Array]:
    a = np.zeros(n)
    a[i] = si
    b = np.zeros(n)
    b[j] = sj
    return a, b


def slice_angle_residual(field_: MetricField, i: int, si: float, j: int, sj: float, x: Array) -> float:
    """max over slices k of |alpha~^(k) - alpha| at a point on the edge of faces i and j (1-based)."""
    n = field_.dim
    a, b = _edge_between(n, i - 1, si, j - 1, sj)
    alpha = math.pi - float(extrinsic._safe_arccos(extrinsic.cos_dihedral(field_, a, b, x)))
    worst = 0.0
    for k in range(1, n + 1):
        if k in (i, j):
            continue
        sub = restrict(field_, k, float(x[k - 1]))
        y = np.delete(x, k - 1)
        q = extrinsic.cos_dihedral(sub, np.delete(a, k - 1), np.delete(b, k - 1), y)
        worst = max(worst, abs(math.pi - float(extrinsic._safe_arccos(q)) - alpha))
    return worst


def _unit_face_points(n: int) -> list[tuple[int, float, Array]]:
    pts = []
    offsets = np.array([0.37, -0.21, 0.13, -0.44, 0.29])
    for i in range(n):
        for s in (1.0, -1.0):
            x = np.roll(offsets[:n], i).copy()
            x[i] = s
            pts.append((i + 1, s, x))
    return pts


def _unit_edge_points(n: int) -> list[tuple[int, float, int, float, Array]]:
    pts = []
    offsets = np.array([0.23, -0.41, 0.17, 0.35, -0.12])
    for i in range(n):
        for j in range(i + 1, n):
            for si, sj in ((1.0, 1.0), (-1.0, 1.0)):
                x = np.roll(offsets[:n], i + j).copy()
                x[i], x[j] = si, sj
                pts.append((i + 1, si, j + 1, sj, x))
    return pts


@dataclass
class LadderFit:
    name: str
    sizes: tuple
    residuals: tuple
    relative: tuple
    fitted_order: float
    exact: bool


def slice_consistency_ladders(
    field_: MetricField, sizes: Sequence[float] = (25.0, 50.0, 100.0), exact_rel: float = 1e-12
) -> tuple[LadderFit, LadderFit]:
    """Face-sum and slice-angle residuals over cubes of half width L in ``sizes``.

    Residuals are maxima over fixed sample points scaled by L. ``relative``
    divides by the size of the quantities being compared; a ladder whose
    relative residual stays below ``exact_rel`` everywhere is flagged exact.
    """
    n = field_.dim
    if n < 4:
        raise DimensionError("slice consistency ladders need n >= 4")
    faces, edges, face_rel, edge_rel = [], [], [], []
    for L in sizes:
        worst, scale_h = 0.0, 0.0
        for i, s, x in _unit_face_points(n):
            worst = max(worst, face_sum_residual(field_, i, s, L * x))
            normal = np.zeros(n)
            normal[i - 1] = s
            scale_h = max(scale_h, abs(float(extrinsic.mean_curvature(field_, normal, L * x))))
        faces.append(worst)
        face_rel.append(worst / max(scale_h, 1e-300))
        worst = 0.0
        for i, si, j, sj, x in _unit_edge_points(n):
            worst = max(worst, slice_angle_residual(field_, i, si, j, sj, L * x))
        edges.append(worst)
        edge_rel.append(worst / (math.pi / 2))

    def build(name, vals, rel):
        exact = max(rel) <= exact_rel
        order = fit_decay_order(sizes, vals) if min(vals) > 0 else float("nan")
        return LadderFit(name, tuple(sizes), tuple(vals), tuple(rel), order, exact)

    return build("face_sum", faces, face_rel), build("slice_angle", edges, edge_rel)
