"""Points-and-weights rules on faces, edges and round spheres."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import GeometryError, QuadratureError, ValidationError
from .polytope import BoxRegion, Edge, Face, PolygonRegion

Array = np.ndarray

CHUNK = 16384
TRIANGLE_POINTS_PER_AXIS = 4  # conical product rule, exact through degree 7


@dataclass(frozen=True)
class QuadratureRule:
    points: Array  # (N, n)
    weights: Array  # (N,)
    level: int

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))


class Integral(NamedTuple):
    value: float
    error: Optional[float]


def nodes_per_axis(level: int) -> int:
    return 8 * 2**level


def _check_level(level: int) -> None:
    if level < 0:
        raise ValidationError(f"quadrature level must be >= 0, got {level}")


@lru_cache(maxsize=None)
def _gauss_legendre(m: int) -> tuple[Array, Array]:
    x, w = roots_legendre(m)
    return x, w


def box_rule(region: BoxRegion, level: int) -> QuadratureRule:
    _check_level(level)
    k = region.dim
    if k == 0:
        return QuadratureRule(region.center[None, :].copy(), np.ones(1), level)
    x, w = _gauss_legendre(nodes_per_axis(level))
    grids = np.meshgrid(*([x] * k), indexing="ij")
    t = np.stack([g.ravel() for g in grids], axis=1) * region.half_widths
    wt = np.ones(t.shape[0])
    for g in np.meshgrid(*([w] * k), indexing="ij"):
        wt = wt * g.ravel()
    wt = wt * float(np.prod(region.half_widths))
    return QuadratureRule(region.center + t @ region.axes, wt, level)


@lru_cache(maxsize=None)
def _triangle_reference(q: int) -> tuple[Array, Array]:
    """Conical product rule on the unit simplex: barycentric (u, w) and weights."""
    s, ws = roots_jacobi(q, 0.0, 1.0)  # weight (1 + s)
    t, wt = roots_legendre(q)
    u = 0.5 * (1.0 + s)
    v = 0.5 * (1.0 + t)
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(ws / 4.0, wt / 2.0)  # integrates u du dv over the unit square
    return np.column_stack([U.ravel(), V.ravel()]), 2.0 * W.ravel()


def _subdivide(tris: Array) -> Array:
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    out = np.stack(
        [
            np.stack([a, ab, ca], 1),
            np.stack([ab, b, bc], 1),
            np.stack([ca, bc, c], 1),
            np.stack([ab, bc, ca], 1),
        ],
        axis=1,
    )
    return out.reshape(-1, 3, tris.shape[2])


def triangulate(region: PolygonRegion) -> Array:
    """Centroid fan for convex loops, ear clipping otherwise. Returns (T, 3, 3)."""
    v = region.vertices
    if region.is_convex():
        c = v.mean(axis=0)
        return np.array([[c, v[i], v[(i + 1) % len(v)]] for i in range(len(v))])
    q = region.to_plane(v)
    idx = list(range(len(v)))
    tris = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(v) ** 2:
            raise GeometryError("ear clipping failed; polygon is not simple")
        for k in range(len(idx)):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % len(idx)]
            if cross(q[i0], q[i1], q[i2]) <= 0:
                continue
            blocked = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = q[j]
                if (
                    cross(q[i0], q[i1], p) >= 0
                    and cross(q[i1], q[i2], p) >= 0
                    and cross(q[i2], q[i0], p) >= 0
                ):
                    blocked = True
                    break
            if not blocked:
                tris.append([v[i0], v[i1], v[i2]])
                idx.pop(k)
                break
    tris.append([v[i] for i in idx])
    return np.array(tris)


def polygon_rule(region: PolygonRegion, level: int) -> QuadratureRule:
    _check_level(level)
    tris = triangulate(region)
    for _ in range(level):
        tris = _subdivide(tris)
    ref, w = _triangle_reference(TRIANGLE_POINTS_PER_AXIS)
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    if np.any(area <= 0):
        raise GeometryError("degenerate triangle in face triangulation")
    u, s = ref[:, 0], ref[:, 1]
    # x = (1 - u) a + u ((1 - s) b + s c)
    pts = (
        (1 - u)[None, :, None] * a[:, None, :]
        + (u * (1 - s))[None, :, None] * b[:, None, :]
        + (u * s)[None, :, None] * c[:, None, :]
    )
    wts = area[:, None] * w[None, :]
    return QuadratureRule(pts.reshape(-1, 3), wts.ravel(), level)


def region_rule(region, level: int) -> QuadratureRule:
    if isinstance(region, BoxRegion):
        return box_rule(region, level)
    if isinstance(region, PolygonRegion):
        return polygon_rule(region, level)
    raise GeometryError(f"unsupported region type {type(region).__name__}")


def face_rule(face: Face, level: int = 1) -> QuadratureRule:
    return region_rule(face.region, level)


def edge_rule(edge: Edge, level: int = 1) -> QuadratureRule:
    return region_rule(edge.region, level)


def sphere_rule(n: int, radius: float, level: int = 1) -> QuadratureRule:
    """Product rule on the round sphere of the given radius in R^n.

    Each polar angle t carries the Jacobian sin^k t; substituting c = cos t
    turns it into the Gauss-Jacobi weight (1 - c^2)^((k-1)/2). The last
    (periodic) angle uses the trapezoid rule.
    """
    _check_level(level)
    if n < 2:
        raise ValidationError("sphere rules need n >= 2")
    m = nodes_per_axis(level)
    phi = 2.0 * math.pi * np.arange(2 * m) / (2 * m)
    wphi = np.full(2 * m, 2.0 * math.pi / (2 * m))
    pts = np.column_stack([np.cos(phi), np.sin(phi)])
    wts = wphi
    for k in range(1, n - 1):
        # prepend one polar angle: x = (cos t, sin t * y), Jacobian sin^k t
        cj, wj = roots_jacobi(m, 0.5 * (k - 1), 0.5 * (k - 1))
        c = cj[:, None, None]
        s = np.sqrt(1.0 - cj * cj)[:, None, None]
        new = np.concatenate(
            [np.broadcast_to(c, (m, len(pts), 1)), s * pts[None, :, :]], axis=2
        )
        wts = wj[:, None] * wts[None, :]
        pts = new.reshape(-1, k + 2)
        wts = wts.ravel()
    return QuadratureRule(radius * pts, wts * radius ** (n - 1), level)


def evaluate(rule: QuadratureRule, f: Callable[[Array], Array], chunk: int = CHUNK) -> Array:
    """Evaluate a vectorized integrand at every node, in memory-bounded chunks."""
    out = np.empty(len(rule))
    for start in range(0, len(rule), chunk):
        stop = min(start + chunk, len(rule))
        out[start:stop] = np.asarray(f(rule.points[start:stop]), dtype=float).reshape(-1)
    bad = np.flatnonzero(~np.isfinite(out))
    if bad.size:
        i = int(bad[0])
        raise QuadratureError(
            f"integrand is {out[i]} at node {i} (x = {rule.points[i].tolist()})"
        )
    return out


def integrate(
    rule: QuadratureRule,
    f: Callable[[Array], Array],
    coarse: Optional[QuadratureRule] = None,
) -> Integral:
    """``sum w_i f(x_i)``; with a coarser rule, also ``|I_fine - I_coarse|``."""
    value = float(np.dot(rule.weights, evaluate(rule, f)))
    if coarse is None:
        return Integral(value, None)
    other = float(np.dot(coarse.weights, evaluate(coarse, f)))
    return Integral(value, abs(value - other))
