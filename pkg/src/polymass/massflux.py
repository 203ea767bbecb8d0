"""ADM flux mass, polyhedral mass and convergence studies over scaled families."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy.special import gamma

from . import extrinsic
from .errors import AngleConditionError, DimensionError, DomainError, ValidationError
from .fitting import estimate_order, fit_decay_order, richardson_limit
from .polytope import Polyhedron, scale as scale_polyhedron, validate_angles
from .quadrature import QuadratureRule, edge_rule, evaluate, face_rule, sphere_rule
from .tensorfield import MetricField

log = logging.getLogger(__name__)

Array = np.ndarray

DEFAULT_ANGLE_CONSTANT = 0.5
DEFAULT_LEVEL = 1
METHODS = ("flux_sphere", "flux_polyhedron", "polyhedral")


def sphere_volume_constant(k: int) -> float:
    """Volume of the unit k-sphere, 2 pi^((k+1)/2) / Gamma((k+1)/2)."""
    if k < 1:
        raise ValidationError(f"sphere dimension must be >= 1, got {k}")
    return float(2.0 * math.pi ** ((k + 1) / 2.0) / gamma((k + 1) / 2.0))


@dataclass(frozen=True)
class Sphere:
    dim: int
    radius: float

    @property
    def label(self) -> str:
        return f"sphere:{self.dim}:{self.radius:g}"

    @property
    def scale(self) -> float:
        return self.radius

    @property
    def inner_radius(self) -> float:
        return self.radius


Surface = Union[Sphere, Polyhedron]


@dataclass(frozen=True)
class MassReport:
    method: str
    geometry: str
    scale: float
    face_integral: float
    edge_integral: float
    mass_estimate: float
    quad_error: float
    dim: int
    omega: float

    def row(self) -> dict:
        """Flat record with the column names used by the CLI."""
        return {
            "method": self.method,
            "geometry": self.geometry,
            "scale": self.scale,
            "face_integral": self.face_integral,
            "edge_integral": self.edge_integral,
            "mass": self.mass_estimate,
            "quad_error": self.quad_error,
        }


@dataclass
class ConvergenceTable:
    scales: tuple
    reports: dict  # method -> list of MassReport, aligned with scales
    fitted_order: dict  # method -> order of |estimate - limit|
    limit: dict  # method -> Richardson-extrapolated limit
    extrapolation_order: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.scales, self.scales[1:])):
            raise ValidationError("convergence scales must be strictly increasing")

    def estimates(self, method: str) -> list[float]:
        return [r.mass_estimate for r in self.reports[method]]


# --------------------------------------------------------------------------
# helpers


def _check_surface(field_: MetricField, surface: Surface) -> None:
    if surface.dim != field_.dim:
        raise DimensionError(f"surface dimension {surface.dim} != field dimension {field_.dim}")
    if surface.inner_radius <= field_.inner_radius:
        raise DomainError(
            f"{surface.label} reaches radius {surface.inner_radius:g}, inside the cutoff "
            f"{field_.inner_radius:g}"
        )
    if surface.inner_radius <= field_.small_beyond:
        log.warning(
            "%s reaches radius %g where |h| may exceed the smallness bound (safe beyond %g)",
            surface.label,
            surface.inner_radius,
            field_.small_beyond,
        )


def _paired_integral(rule_for: Callable[[int], QuadratureRule], f, level: int) -> tuple[float, float]:
    """Integral at ``level`` and its gap to the neighbouring level.

    The neighbour is ``level - 1`` when it exists, otherwise ``level + 1``.
    """
    fine = rule_for(level)
    value = float(np.dot(fine.weights, evaluate(fine, f)))
    other_rule = rule_for(level - 1 if level > 0 else level + 1)
    other = float(np.dot(other_rule.weights, evaluate(other_rule, f)))
    return value, abs(value - other)


def _run(tasks: list[Callable[[], tuple[float, float]]], threads: int) -> list[tuple[float, float]]:
    if threads <= 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(t) for t in tasks]
        return [fut.result() for fut in futures]  # reduction in submission order


def _task(rule_for, f, level):
    return lambda: _paired_integral(rule_for, f, level)


def _face_rules(face):
    return lambda lv: face_rule(face, lv)


def _edge_rules(edge):
    return lambda lv: edge_rule(edge, lv)


def _flux_through(field_: MetricField, normal: Array):
    return lambda x: flux_density(field_, x, normal)


def _curvature_integrand(field_: MetricField, face):
    def f(x):
        return -extrinsic.curvature_density(field_, face, x)

    return f


def _defect_integrand(field_: MetricField, edge):
    def f(x):
        return extrinsic.angle_defect(field_, edge, x) * extrinsic.induced_density(field_, edge, x)

    return f


def flux_density(field_: MetricField, x: Array, normal: Array) -> Array:
    """(d_i g_ij - d_j g_ii) nu_bar^j from coordinate partials only."""
    d = field_.dmetric(x)
    div = np.einsum("...iij->...j", d)
    grad_trace = np.einsum("...jii->...j", d)
    return np.einsum("...j,...j->...", div - grad_trace, normal)


# --------------------------------------------------------------------------
# mass functionals


def adm_flux_mass(
    field_: MetricField, surface: Surface, level: int = DEFAULT_LEVEL, threads: int = 1
) -> MassReport:
    """Flux of ``g_ij,i - g_ii,j`` through a round sphere or a polyhedron boundary."""
    _check_surface(field_, surface)
    n = field_.dim
    omega = sphere_volume_constant(n - 1)
    if isinstance(surface, Sphere):
        method = "flux_sphere"
        R = surface.radius

        def radial(x):
            return flux_density(field_, x, x / R)

        tasks = [_task(lambda lv: sphere_rule(n, R, lv), radial, level)]
    else:
        method = "flux_polyhedron"
        tasks = [
            _task(_face_rules(face), _flux_through(field_, face.unit_normal), level)
            for face in surface.faces
        ]
    parts = _run(tasks, threads)
    flux = math.fsum(v for v, _ in parts)
    err = math.fsum(e for _, e in parts)
    norm = 2.0 * (n - 1) * omega
    return MassReport(method, surface.label, surface.scale, flux, 0.0, flux / norm, err / norm, n, omega)


def boundary_integrals(
    field_: MetricField, P: Polyhedron, level: int, c: float, threads: int = 1
) -> tuple[float, float, float]:
    """(-sum int_F H dsigma, sum int_E (alpha - alpha_bar) dmu, quadrature error)."""
    ok, bad = validate_angles(P, c)
    if not ok:
        worst = min(v["sin_alpha_bar"] for v in bad)
        raise AngleConditionError(
            f"{len(bad)} edge(s) of {P.label} violate |sin alpha_bar| >= {c:g} "
            f"(smallest {worst:.6g})",
            violations=bad,
        )
    _check_surface(field_, P)
    tasks = [_task(_face_rules(f), _curvature_integrand(field_, f), level) for f in P.faces]
    nf = len(tasks)
    tasks += [_task(_edge_rules(e), _defect_integrand(field_, e), level) for e in P.edges]
    parts = _run(tasks, threads)
    face_integral = math.fsum(v for v, _ in parts[:nf])
    edge_integral = math.fsum(v for v, _ in parts[nf:])
    err = math.fsum(e for _, e in parts)
    return face_integral, edge_integral, err


def polyhedral_mass(
    field_: MetricField,
    P: Polyhedron,
    level: int = DEFAULT_LEVEL,
    c: float = DEFAULT_ANGLE_CONSTANT,
    threads: int = 1,
) -> MassReport:
    """(-int H dsigma + int (alpha - alpha_bar) dmu) / ((n - 1) omega_(n-1))."""
    n = field_.dim
    omega = sphere_volume_constant(n - 1)
    face_integral, edge_integral, err = boundary_integrals(field_, P, level, c, threads)
    norm = (n - 1) * omega
    return MassReport(
        "polyhedral",
        P.label,
        P.scale,
        face_integral,
        edge_integral,
        (face_integral + edge_integral) / norm,
        err / norm,
        n,
        omega,
    )


def gromov_quantity(
    field_: MetricField, P: Polyhedron, level: int = DEFAULT_LEVEL, c: float = DEFAULT_ANGLE_CONSTANT
) -> float:
    """Un-normalized face plus edge total; nonnegative for nonnegative scalar curvature."""
    face_integral, edge_integral, _ = boundary_integrals(field_, P, level, c, 1)
    return face_integral + edge_integral


def convergence_study(
    field_: MetricField,
    base: Polyhedron,
    scales: Sequence[float],
    level: int = DEFAULT_LEVEL,
    c: float = DEFAULT_ANGLE_CONSTANT,
    methods: Sequence[str] = ("flux_polyhedron", "polyhedral"),
    threads: int = 1,
) -> ConvergenceTable:
    """Run each method on ``scale(base, s)`` and extrapolate to infinite size."""
    scales = tuple(float(s) for s in scales)
    if len(scales) < 2:
        raise ValidationError("a convergence study needs at least two scales")
    if any(b <= a for a, b in zip(scales, scales[1:])):
        raise ValidationError("convergence scales must be strictly increasing")
    unknown = set(methods) - {"flux_polyhedron", "polyhedral"}
    if unknown:
        raise ValidationError(f"unsupported convergence method(s): {sorted(unknown)}")
    reports: dict = {m: [] for m in methods}
    for s in scales:
        P = scale_polyhedron(base, s)
        for m in methods:
            if m == "polyhedral":
                reports[m].append(polyhedral_mass(field_, P, level, c, threads))
            else:
                reports[m].append(adm_flux_mass(field_, P, level, threads))
    sizes = [scale_polyhedron(base, s).scale for s in scales]
    fitted, limits, orders = {}, {}, {}
    for m in methods:
        est = [r.mass_estimate for r in reports[m]]
        if len(est) >= 3:
            q = estimate_order(sizes, est)
        else:
            q = 1.0
        orders[m] = q
        if math.isfinite(q) and q > 0:
            limits[m] = richardson_limit(sizes[-2:], est[-2:], q)
        else:
            limits[m] = est[-1]
        gaps = [abs(e - limits[m]) for e in est]
        fitted[m] = fit_decay_order(sizes, gaps) if max(gaps) > 0 else float("nan")
    return ConvergenceTable(tuple(sizes), reports, fitted, limits, orders)
