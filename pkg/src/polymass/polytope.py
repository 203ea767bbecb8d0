"""Euclidean polyhedra: faces, edges, dihedral angles, scaling.

Two region types cover everything the mass formulas integrate over.
``BoxRegion`` is an axis-aligned k-box embedded in R^n (hypercube faces and
edges, straight 3-D edges, and k = 0 points). ``PolygonRegion`` is a planar
vertex loop in R^3, ordered counter-clockwise about the outward normal.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import linprog

from .errors import DimensionError, GeometryError, InvalidOriginError, UnknownIdError, ValidationError

Array = np.ndarray


def gram_schmidt_basis(normals: Array, count: int) -> Array:
    """Orthonormal vectors orthogonal to ``normals``, built from coordinate axes.

    Axes are taken in order of increasing alignment with the normals (ties
    broken by lowest index), so coordinate-aligned geometry gets coordinate
    axes back.
    """
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    n = normals.shape[1]
    span = []
    for v in normals:
        w = v - sum(np.dot(v, s) * s for s in span)
        span.append(w / np.linalg.norm(w))
    alignment = np.sum(np.abs(normals), axis=0)
    order = sorted(range(n), key=lambda i: (round(alignment[i], 12), i))
    basis = []
    for i in order:
        if len(basis) == count:
            break
        w = np.zeros(n)
        w[i] = 1.0
        for s in span + basis:
            w = w - np.dot(w, s) * s
        norm = np.linalg.norm(w)
        if norm > 1e-8:
            basis.append(w / norm)
    if len(basis) != count:
        raise GeometryError("could not complete tangent basis")
    return np.array(basis).reshape(count, n)


@dataclass(frozen=True)
class BoxRegion:
    center: Array
    axes: Array  # (k, n), orthonormal
    half_widths: Array  # (k,)

    @property
    def dim(self) -> int:
        return len(self.half_widths)

    @property
    def volume(self) -> float:
        return float(np.prod(2.0 * np.asarray(self.half_widths))) if self.dim else 1.0

    def scaled(self, r: float) -> "BoxRegion":
        return BoxRegion(self.center * r, self.axes, self.half_widths * r)

    def closest_point(self, y: Array) -> Array:
        t = self.axes @ (y - self.center)
        t = np.clip(t, -self.half_widths, self.half_widths)
        return self.center + t @ self.axes

    def contains(self, y: Array, tol: float = 1e-9) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.half_widths), initial=0.0)))
        d = y - self.center
        t = self.axes @ d
        off = d - t @ self.axes
        return bool(
            np.all(np.abs(t) <= self.half_widths + tol * scale)
            and np.linalg.norm(off) <= tol * scale
        )


@dataclass(frozen=True)
class PolygonRegion:
    vertices: Array  # (m, 3)
    normal: Array  # (3,), unit

    @property
    def dim(self) -> int:
        return 2

    @property
    def area(self) -> float:
        v = self.vertices
        s = np.sum(np.cross(v, np.roll(v, -1, axis=0)), axis=0)
        return 0.5 * float(np.dot(s, self.normal))

    @property
    def volume(self) -> float:
        return self.area

    def scaled(self, r: float) -> "PolygonRegion":
        return PolygonRegion(self.vertices * r, self.normal)

    def sides(self):
        v = self.vertices
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    def plane_basis(self) -> Array:
        return gram_schmidt_basis(self.normal, 2)

    def to_plane(self, pts: Array) -> Array:
        """2-D coordinates in a right-handed frame (t1, t2) with t1 x t2 = normal."""
        t = self.plane_basis()
        if np.dot(np.cross(t[0], t[1]), self.normal) < 0:
            t = t[::-1]
        return (np.asarray(pts) - self.vertices[0]) @ t.T

    def is_convex(self) -> bool:
        q = self.to_plane(self.vertices)
        d = np.roll(q, -1, axis=0) - q
        cross = d[:, 0] * np.roll(d, -1, axis=0)[:, 1] - d[:, 1] * np.roll(d, -1, axis=0)[:, 0]
        return bool(np.all(cross > -1e-12 * np.max(np.abs(q)) ** 2))

    def contains(self, y: Array, tol: float = 1e-9) -> bool:
        scale = float(np.max(np.abs(self.vertices)))
        if abs(np.dot(y - self.vertices[0], self.normal)) > tol * scale:
            return False
        q = self.to_plane(self.vertices)
        p = self.to_plane(y[None, :])[0]
        for a, b in zip(q, np.roll(q, -1, axis=0)):
            if _segment_distance_2d(p, a, b) <= tol * scale:
                return True
        return _point_in_polygon_2d(p, q)

    def closest_point(self, y: Array) -> Array:
        foot = y - np.dot(y - self.vertices[0], self.normal) * self.normal
        if self.contains(foot):
            return foot
        best, dist = None, math.inf
        for a, b in self.sides():
            c = _closest_on_segment(y, a, b)
            d = np.linalg.norm(c - y)
            if d < dist:
                best, dist = c, d
        return best


Region = Union[BoxRegion, PolygonRegion]


def _closest_on_segment(y, a, b):
    ab = b - a
    t = np.clip(np.dot(y - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    return a + t * ab


def _segment_distance_2d(p, a, b):
    return float(np.linalg.norm(_closest_on_segment(p, a, b) - p))


def _point_in_polygon_2d(p, q) -> bool:
    inside = False
    for a, b in zip(q, np.roll(q, -1, axis=0)):
        if (a[1] > p[1]) != (b[1] > p[1]):
            x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            if x > p[0]:
                inside = not inside
    return inside


@dataclass(frozen=True)
class Face:
    unit_normal: Array
    offset: float
    region: Region
    tangent_basis: Array = field(repr=False)

    @property
    def area_euclidean(self) -> float:
        return self.region.volume

    @property
    def dim(self) -> int:
        return len(self.unit_normal)


@dataclass(frozen=True)
class Edge:
    face_a: int
    face_b: int
    region: BoxRegion
    euclidean_angle: float
    convex: bool
    cos_theta_bar: float
    inward_conormals: Array = field(repr=False)  # (2, n): n_A, n_B, pointing out of each face across the edge
    tangent_basis: Array = field(repr=False)  # (n - 2, n)
    normal_a: Array = field(repr=False, default=None)
    normal_b: Array = field(repr=False, default=None)

    @property
    def length_euclidean(self) -> float:
        return self.region.volume

    @property
    def theta_bar(self) -> float:
        return float(np.arccos(np.clip(self.cos_theta_bar, -1.0, 1.0)))


@dataclass(frozen=True)
class Polyhedron:
    dim: int
    faces: tuple
    edges: tuple
    inner_radius: float
    label: str
    scale: float = 1.0

    @property
    def total_face_area(self) -> float:
        return sum(f.area_euclidean for f in self.faces)

    @property
    def total_edge_volume(self) -> float:
        return sum(e.length_euclidean for e in self.edges)


def make_face(normal: Array, offset: float, region: Region) -> Face:
    normal = np.asarray(normal, dtype=float)
    if abs(np.linalg.norm(normal) - 1.0) > 1e-12:
        raise GeometryError("face normal must be a unit vector")
    if region.volume <= 0:
        raise GeometryError("face region has no area")
    return Face(normal, float(offset), region, gram_schmidt_basis(normal, len(normal) - 1))


def angle_from_normals(nu_a: Array, nu_b: Array, convex: bool) -> tuple[float, float]:
    """(cos theta_bar, alpha_bar) from outward normals and the convexity flag."""
    # same quotient the metric path evaluates, so a flat metric reproduces it bit for bit
    q = np.dot(nu_a, nu_b) / np.sqrt(np.dot(nu_a, nu_a) * np.dot(nu_b, nu_b))
    c = float(np.clip(q, -1.0, 1.0))
    theta = math.acos(c)
    return c, (math.pi - theta) if convex else (math.pi + theta)


def conormals(nu_a: Array, nu_b: Array, cos_t: float, convex: bool) -> Array:
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    sign = 1.0 if convex else -1.0
    n_a = sign * (-cos_t * nu_a + nu_b) / sin_t
    n_b = sign * (-cos_t * nu_b + nu_a) / sin_t
    return np.array([n_a, n_b])


def make_edge(faces: Sequence[Face], a: int, b: int, region: BoxRegion, convex: bool) -> Edge:
    nu_a, nu_b = faces[a].unit_normal, faces[b].unit_normal
    cos_t, alpha = angle_from_normals(nu_a, nu_b, convex)
    if abs(math.sin(alpha)) < 1e-12:
        raise GeometryError(f"faces {a} and {b} are coplanar")
    n = len(nu_a)
    return Edge(
        face_a=a,
        face_b=b,
        region=region,
        euclidean_angle=alpha,
        convex=convex,
        cos_theta_bar=cos_t,
        inward_conormals=conormals(nu_a, nu_b, cos_t, convex),
        tangent_basis=gram_schmidt_basis(np.array([nu_a, nu_b]), n - 2),
        normal_a=nu_a,
        normal_b=nu_b,
    )


def _inner_radius(faces: Sequence[Face]) -> float:
    origin = np.zeros(len(faces[0].unit_normal))
    return min(float(np.linalg.norm(f.region.closest_point(origin))) for f in faces)


# --------------------------------------------------------------------------
# constructors


def box(n: int, half_width: float, label: Optional[str] = None) -> Polyhedron:
    """Coordinate cube ``[-L, L]^n`` for any n >= 2 (n = 2 is a square)."""
    L = float(half_width)
    if L <= 0:
        raise GeometryError(f"half width must be positive, got {half_width}")
    eye = np.eye(n)
    faces = []
    for i in range(n):
        for s in (1.0, -1.0):
            others = [j for j in range(n) if j != i]
            region = BoxRegion(s * L * eye[i], eye[others].reshape(n - 1, n), np.full(n - 1, L))
            faces.append(make_face(s * eye[i], L, region))
    edges = []
    for a, b in itertools.combinations(range(2 * n), 2):
        i, j = a // 2, b // 2
        if i == j:
            continue
        rest = [k for k in range(n) if k not in (i, j)]
        center = faces[a].region.center + faces[b].region.center
        region = BoxRegion(center, eye[rest].reshape(n - 2, n), np.full(n - 2, L))
        edges.append(make_edge(faces, a, b, region, convex=True))
    return Polyhedron(n, tuple(faces), tuple(edges), L, label or f"cube:{n}:{L:g}", L)


def hypercube(n: int, half_width: float) -> Polyhedron:
    if n < 3:
        raise DimensionError(f"dimension must be >= 3, got {n}")
    return box(n, half_width)


def _segment_region(a: Array, b: Array) -> BoxRegion:
    d = b - a
    length = float(np.linalg.norm(d))
    return BoxRegion(0.5 * (a + b), (d / length)[None, :], np.array([0.5 * length]))


def _assemble_3d(polys, label: str, scale: float, reflex=None) -> Polyhedron:
    """Faces from (normal, offset, vertex loop) triples; edges from shared sides."""
    faces = [make_face(nrm, off, PolygonRegion(np.asarray(v, float), np.asarray(nrm, float))) for nrm, off, v in polys]
    span = max(float(np.max(np.abs(f.region.vertices))) for f in faces)

    def key(p):
        return tuple(np.round(np.asarray(p) / span, 9) + 0.0)

    owners: dict = {}
    for idx, f in enumerate(faces):
        for a, b in f.region.sides():
            owners.setdefault(frozenset((key(a), key(b))), []).append((idx, a, b))
    edges = []
    for side_key, users in owners.items():
        if len(users) != 2:
            raise GeometryError(
                f"polygon side shared by {len(users)} faces; only simple edges are supported"
            )
        (fa, a, b), (fb, _, _) = sorted(users, key=lambda u: u[0])
        region = _segment_region(np.asarray(a), np.asarray(b))
        convex = True if reflex is None else not reflex(region)
        edges.append(make_edge(faces, fa, fb, region, convex))
    edges.sort(key=lambda e: (e.face_a, e.face_b))
    return Polyhedron(3, tuple(faces), tuple(edges), _inner_radius(faces), label, scale)


def _order_loop(points: Array, normal: Array) -> Array:
    c = points.mean(axis=0)
    t = gram_schmidt_basis(normal, 2)
    if np.dot(np.cross(t[0], t[1]), normal) < 0:
        t = t[::-1]
    q = (points - c) @ t.T
    return points[np.argsort(np.arctan2(q[:, 1], q[:, 0]))]


def from_halfspaces_3d(
    normals: Array, offsets: Array, label: str = "halfspaces", scale: float = 1.0
) -> Polyhedron:
    """Convex polyhedron ``{x : <nu_i, x> <= b_i}`` by vertex enumeration."""
    A = np.asarray(normals, dtype=float)
    b = np.asarray(offsets, dtype=float)
    if A.ndim != 2 or A.shape[1] != 3 or len(b) != len(A):
        raise DimensionError("half-spaces must be given as (m, 3) normals and m offsets")
    norms = np.linalg.norm(A, axis=1)
    A, b = A / norms[:, None], b / norms
    if np.any(b <= 0):
        raise InvalidOriginError("origin is not strictly inside every half-space")
    for d in np.vstack([np.eye(3), -np.eye(3)]):
        res = linprog(-d, A_ub=A, b_ub=b, bounds=[(None, None)] * 3, method="highs")
        if res.status == 3:
            raise GeometryError("half-spaces bound an unbounded region")
    tol = 1e-9 * float(np.max(b))
    verts = []
    for i, j, k in itertools.combinations(range(len(A)), 3):
        M = A[[i, j, k]]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, b[[i, j, k]])
        if np.all(A @ x <= b + tol) and not any(np.linalg.norm(x - v) < tol for v in verts):
            verts.append(x)
    verts = np.array(verts)
    polys = []
    for nrm, off in zip(A, b):
        on = verts[np.abs(verts @ nrm - off) <= tol]
        if len(on) >= 3:
            polys.append((nrm, off, _order_loop(on, nrm)))
    if len(polys) < 4:
        raise GeometryError(f"degenerate polyhedron with {len(polys)} faces")
    return _assemble_3d(polys, label, scale)


def octahedron(R: float) -> Polyhedron:
    """The cross-polytope ``|x|_1 <= R``."""
    normals = np.array(list(itertools.product((1.0, -1.0), repeat=3))) / math.sqrt(3.0)
    return from_halfspaces_3d(normals, np.full(8, R / math.sqrt(3.0)), f"octahedron:{R:g}", R)


def tetrahedron(R: float) -> Polyhedron:
    """Regular tetrahedron with circumradius ``R`` centred at the origin."""
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    return from_halfspaces_3d(-v / math.sqrt(3.0), np.full(4, R / 3.0), f"tetrahedron:{R:g}", R)


def lshaped_prism_3d(outer: float, notch: float, height: float) -> Polyhedron:
    """Prism over ``[-a, a]^2`` minus the corner square ``(a-c, a] x (a-c, a]``.

    ``a = outer``, ``c = notch``; the prism spans ``|z| <= height / 2``. The
    vertical edge at the notch's inner corner is the reflex edge.
    """
    a, c, h = float(outer), float(notch), 0.5 * float(height)
    if a <= 0 or c <= 0 or h <= 0:
        raise GeometryError("outer, notch and height must be positive")
    if c >= 2 * a:
        raise GeometryError(f"notch {c} removes the whole square of half width {a}")
    if c >= a:
        raise InvalidOriginError(f"origin falls inside the notch (notch {c} >= outer {a})")
    section = np.array(
        [[-a, -a], [a, -a], [a, a - c], [a - c, a - c], [a - c, a], [-a, a]], dtype=float
    )
    corner = np.array([a - c, a - c])
    polys = []
    top = np.column_stack([section, np.full(6, h)])
    bottom = np.column_stack([section[::-1], np.full(6, -h)])
    polys.append((np.array([0.0, 0.0, 1.0]), h, top))
    polys.append((np.array([0.0, 0.0, -1.0]), h, bottom))
    for p, q in zip(section, np.roll(section, -1, axis=0)):
        d = q - p
        nrm = np.array([d[1], -d[0], 0.0]) / np.linalg.norm(d)
        loop = np.array([[*p, -h], [*q, -h], [*q, h], [*p, h]])
        polys.append((nrm, float(np.dot(nrm[:2], p)), loop))

    def reflex(region: BoxRegion) -> bool:
        return bool(np.allclose(region.center[:2], corner) and abs(region.axes[0, 2]) > 0.5)

    return _assemble_3d(polys, f"lprism:{a:g}:{c:g}:{2 * h:g}", a, reflex=reflex)


def scale(P: Polyhedron, r: float) -> Polyhedron:
    """Homothety ``x -> r x``: normals and angles fixed, lengths times ``r``."""
    if r <= 0:
        raise ValidationError(f"scale factor must be positive, got {r}")
    faces = tuple(
        replace(f, offset=f.offset * r, region=f.region.scaled(r)) for f in P.faces
    )
    edges = tuple(replace(e, region=e.region.scaled(r)) for e in P.edges)
    return Polyhedron(P.dim, faces, edges, P.inner_radius * r, f"scale:{P.label}:{r:g}", P.scale * r)


def validate_angles(P: Polyhedron, c: float) -> tuple[bool, list[dict]]:
    """Check ``|sin alpha_bar| >= c`` on every edge; return (ok, violations)."""
    if not 0 < c <= 1:
        raise ValidationError(f"angle constant must lie in (0, 1], got {c}")
    bad = []
    for idx, e in enumerate(P.edges):
        s = abs(math.sin(e.euclidean_angle))
        if s < c - 1e-12:
            bad.append({"edge": idx, "faces": (e.face_a, e.face_b), "sin_alpha_bar": s})
    return not bad, bad


def check_closure(P: Polyhedron) -> bool:
    """Every facet of every face region belongs to exactly one edge."""
    counts = {}
    for e in P.edges:
        for f in (e.face_a, e.face_b):
            counts[f] = counts.get(f, 0) + 1
    for idx, f in enumerate(P.faces):
        if isinstance(f.region, PolygonRegion):
            expected = len(f.region.vertices)
        else:
            expected = 2 * f.region.dim
        if counts.get(idx, 0) != expected:
            return False
    for e in P.edges:
        for f in (e.face_a, e.face_b):
            if not P.faces[f].region.contains(e.region.center):
                return False
    return True


def rebuild_alpha(edge: Edge) -> float:
    return angle_from_normals(edge.normal_a, edge.normal_b, edge.convex)[1]


# --------------------------------------------------------------------------
# ids


def polyhedron_from_id(ident: str) -> Polyhedron:
    parts = ident.strip().split(":")
    try:
        kind = parts[0]
        if kind == "scale" and len(parts) >= 3:
            return scale(polyhedron_from_id(":".join(parts[1:-1])), float(parts[-1]))
        if kind == "cube" and len(parts) == 3:
            return hypercube(int(parts[1]), float(parts[2]))
        if kind == "octahedron" and len(parts) == 2:
            return octahedron(float(parts[1]))
        if kind == "tetrahedron" and len(parts) == 2:
            return tetrahedron(float(parts[1]))
        if kind == "lprism" and len(parts) == 4:
            return lshaped_prism_3d(float(parts[1]), float(parts[2]), float(parts[3]))
    except (ValueError, IndexError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise UnknownIdError(f"malformed geometry id {ident!r}: {exc}") from None
    raise UnknownIdError(f"unknown geometry id {ident!r}")


DEFAULT_GEOMETRIES = (
    "cube:3:1",
    "cube:4:1",
    "cube:5:1",
    "octahedron:1",
    "tetrahedron:1",
    "lprism:1:0.5:2",
)
