"""Asymptotically flat metrics ``g = delta + h`` on coordinate space.

Every coefficient callable is vectorised over leading axes: a point array of
shape ``(..., n)`` maps to ``(..., n, n)`` for ``g_ij``, ``(..., n, n, n)``
for ``d_k g_ij`` (index order ``[k, i, j]``) and ``(..., n, n, n, n)`` for
``d_l d_k g_ij`` (index order ``[l, k, i, j]``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, DomainError, SmallnessError, UnknownIdError, ValidationError

Array = np.ndarray
CoeffFn = Callable[[Array], Array]

FD_RELATIVE_STEP = 1e-4


def smallness_bound(n: int) -> float:
    """The constant eps(n) = 1 / (2 (n - 1)) bounding |h| outside the cutoff."""
    return 1.0 / (2.0 * (n - 1))


def _radius(x: Array) -> Array:
    return np.sqrt(np.einsum("...i,...i->...", x, x))


def _fd_derivative(fn: CoeffFn, x: Array, dim: int) -> Array:
    x = np.asarray(x, dtype=float)
    r = _radius(x)
    h = FD_RELATIVE_STEP * r
    base = fn(x)
    tail = base.ndim - (x.ndim - 1)
    hb = h.reshape(h.shape + (1,) * tail)
    parts = []
    for k in range(dim):
        step = np.zeros_like(x)
        step[..., k] = h
        parts.append((fn(x + step) - fn(x - step)) / (2.0 * hb))
    return np.stack(parts, axis=x.ndim - 1)


@dataclass(frozen=True)
class MetricField:
    """A Riemannian metric given by closed-form coefficient functions.

    ``decay_order`` is ``None`` for a metric with no perturbation at all
    (infinite decay); it is never stored as a float infinity.
    ``conformally_flat`` promises coefficients of the form ``psi(x) * delta``,
    which lets the inverse and determinant skip the dense linear algebra.
    """

    dim: int
    coeff: CoeffFn
    dcoeff: Optional[CoeffFn] = None
    d2coeff: Optional[CoeffFn] = None
    decay_order: Optional[float] = None
    inner_radius: float = 1.0
    name: str = ""
    analytic_mass: Optional[float] = None
    conformally_flat: bool = False
    smallness_radius: Optional[float] = None
    params: dict = field(default_factory=dict, compare=False)

    @property
    def is_flat(self) -> bool:
        return self.decay_order is None

    @property
    def small_beyond(self) -> float:
        """Radius beyond which |h| < eps(n) is guaranteed."""
        if self.smallness_radius is None:
            return self.inner_radius
        return max(self.smallness_radius, self.inner_radius)

    def check_domain(self, x: Array) -> None:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionError(f"point dimension {x.shape[-1]} != field dimension {self.dim}")
        r = _radius(x)
        if np.any(r <= self.inner_radius):
            bad = np.asarray(x).reshape(-1, self.dim)[np.argmin(r.reshape(-1))]
            raise DomainError(
                f"point {bad.tolist()} lies inside the inner cutoff radius {self.inner_radius}"
            )

    def metric(self, x: Array) -> Array:
        self.check_domain(x)
        return self.coeff(np.asarray(x, dtype=float))

    def dmetric(self, x: Array) -> Array:
        self.check_domain(x)
        x = np.asarray(x, dtype=float)
        if self.dcoeff is not None:
            return self.dcoeff(x)
        return _fd_derivative(self.coeff, x, self.dim)

    def d2metric(self, x: Array) -> Array:
        self.check_domain(x)
        x = np.asarray(x, dtype=float)
        if self.d2coeff is not None:
            return self.d2coeff(x)
        first = self.dcoeff if self.dcoeff is not None else (
            lambda y: _fd_derivative(self.coeff, y, self.dim)
        )
        return _fd_derivative(first, x, self.dim)

    def inverse(self, x: Array, g: Optional[Array] = None) -> Array:
        """g^ij at ``x``; pass ``g`` when the coefficients are already at hand."""
        g = self.metric(x) if g is None else g
        if self.conformally_flat:
            return np.eye(self.dim) / g[..., :1, :1]
        return np.linalg.inv(g)

    def determinant(self, x: Array, g: Optional[Array] = None) -> Array:
        g = self.metric(x) if g is None else g
        if self.conformally_flat:
            return g[..., 0, 0] ** self.dim
        return np.linalg.det(g)

    def perturbation(self, x: Array) -> Array:
        return self.metric(x) - np.eye(self.dim)

    def perturbation_norm(self, x: Array) -> Array:
        """|h|_gbar, the Frobenius norm of ``g - delta``."""
        h = self.perturbation(x)
        return np.sqrt(np.einsum("...ij,...ij->...", h, h))


def christoffel(field_: MetricField, x: Array) -> Array:
    """Gamma^k_ij = 1/2 g^kl (d_i g_lj + d_j g_il - d_l g_ij), index ``[k, i, j]``."""
    ginv = field_.inverse(x)
    d = field_.dmetric(x)
    # d[..., a, b, c] = d_a g_bc
    lower = 0.5 * (
        np.einsum("...ilj->...lij", d) + np.einsum("...jil->...lij", d) - d
    )
    return np.einsum("...kl,...lij->...kij", ginv, lower)


# --------------------------------------------------------------------------
# catalog constructors


def make_euclidean(n: int, inner_radius: float = 1e-3) -> MetricField:
    if n < 3:
        raise DimensionError(f"dimension must be >= 3, got {n}")
    return _euclidean(n, inner_radius, name=f"euclidean:{n}")


def _euclidean(n: int, inner_radius: float, name: str) -> MetricField:
    eye = np.eye(n)

    def coeff(x):
        return np.broadcast_to(eye, x.shape[:-1] + (n, n)).copy()

    def dcoeff(x):
        return np.zeros(x.shape[:-1] + (n, n, n))

    def d2coeff(x):
        return np.zeros(x.shape[:-1] + (n, n, n, n))

    return MetricField(
        dim=n,
        coeff=coeff,
        dcoeff=dcoeff,
        d2coeff=d2coeff,
        decay_order=None,
        inner_radius=inner_radius,
        name=name,
        analytic_mass=0.0,
        conformally_flat=True,
        params={"n": n},
    )


def make_schwarzschild_isotropic(n: int, m: float) -> MetricField:
    """Isotropic Schwarzschild slice ``g = u^(4/(n-2)) delta``, ``u = 1 + m / (2 r^(n-2))``.

    The inner cutoff is the horizon radius ``(m/2)^(1/(n-2))``. The radius
    where ``|h|`` drops below eps(n) lies further out and is recorded as
    ``smallness_radius``.
    """
    if n < 3:
        raise DimensionError(f"dimension must be >= 3, got {n}")
    if m < 0:
        raise ValidationError(f"mass parameter must be nonnegative, got {m}")
    if m == 0:
        f = make_euclidean(n)
        return replace(f, name=f"schwarzschild:{n}:{m:g}", params={"n": n, "m": 0.0})

    q = 4.0 / (n - 2)
    c = 0.5 * m * (n - 2)
    eye = np.eye(n)
    # |h|_F = sqrt(n) (u^q - 1) = eps(n)
    u_edge = (1.0 + smallness_bound(n) / math.sqrt(n)) ** (1.0 / q)
    r_small = (m / (2.0 * (u_edge - 1.0))) ** (1.0 / (n - 2))
    r0 = (0.5 * m) ** (1.0 / (n - 2))

    def parts(x):
        r = _radius(x)
        u = 1.0 + 0.5 * m * r ** (2 - n)
        du = -c * r[..., None] ** (-n) * x
        return r, u, du

    def coeff(x):
        _, u, _ = parts(x)
        return (u**q)[..., None, None] * eye

    def dcoeff(x):
        _, u, du = parts(x)
        dpsi = (q * u ** (q - 1))[..., None] * du
        return dpsi[..., :, None, None] * eye

    def d2coeff(x):
        r, u, du = parts(x)
        ddu = -c * (
            r[..., None, None] ** (-n) * eye
            - n * r[..., None, None] ** (-n - 2) * np.einsum("...k,...l->...kl", x, x)
        )
        ddpsi = (q * (q - 1) * u ** (q - 2))[..., None, None] * np.einsum(
            "...k,...l->...kl", du, du
        ) + (q * u ** (q - 1))[..., None, None] * ddu
        return ddpsi[..., :, :, None, None] * eye

    return MetricField(
        dim=n,
        coeff=coeff,
        dcoeff=dcoeff,
        d2coeff=d2coeff,
        decay_order=float(n - 2),
        inner_radius=r0,
        smallness_radius=r_small,
        name=f"schwarzschild:{n}:{m:g}",
        analytic_mass=float(m),
        conformally_flat=True,
        params={"n": n, "m": float(m)},
    )


def _symmetrize_ij(t: Array) -> Array:
    return 0.5 * (t + np.swapaxes(t, 0, 1))


def perturbation_profile(n: int, seed: int) -> tuple[Array, Array, Array]:
    """Coefficient tensors of the angular profile ``s_ij(w)``.

    ``s_ij(w) = C0_ij + C1_ijk w_k + C2_ijkl w_k w_l`` on unit vectors ``w``:
    harmonics of degree <= 2 with Philox-generated coefficients. Scaled so
    that ``sum ||C_d||_F = 1``, hence ``|s|_F <= 1`` on the unit sphere.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    c0 = _symmetrize_ij(rng.standard_normal((n, n)))
    c1 = _symmetrize_ij(rng.standard_normal((n, n, n)))
    c2 = rng.standard_normal((n, n, n, n))
    c2 = _symmetrize_ij(0.5 * (c2 + np.swapaxes(c2, 2, 3)))
    total = sum(np.linalg.norm(c.ravel()) for c in (c0, c1, c2))
    return c0 / total, c1 / total, c2 / total


def make_perturbation(
    n: int, p: float, amplitude: float, seed: int, inner_radius: float = 1.0
) -> MetricField:
    """``h_ij = amplitude * s_ij(x/|x|) * |x|^(-p)`` with analytic derivatives.

    Writing ``w = x/r``, the field is a sum of terms ``P(x) r^q`` with ``P`` a
    polynomial of degree 0, 1, 2 and ``q = -p, -p-1, -p-2``.
    """
    if n < 3:
        raise DimensionError(f"dimension must be >= 3, got {n}")
    if p <= (n - 2) / 2:
        raise ValidationError(f"decay order p={p} must exceed (n-2)/2 = {(n - 2) / 2}")
    bound = amplitude * inner_radius ** (-p)
    if abs(bound) >= smallness_bound(n):
        raise SmallnessError(
            f"amplitude {amplitude} gives |h| up to {abs(bound):.4g} at r0={inner_radius}, "
            f"not below eps({n}) = {smallness_bound(n):.4g}"
        )
    name = f"perturb:{n}:{p:g}:{amplitude:g}:{seed}"
    params = {"n": n, "p": float(p), "amplitude": float(amplitude), "seed": int(seed)}
    if amplitude == 0:
        return replace(_euclidean(n, inner_radius, name), params=params)

    c0, c1, c2 = perturbation_profile(n, seed)
    c0, c1, c2 = amplitude * c0, amplitude * c1, amplitude * c2
    eye = np.eye(n)
    c2s = c2 + np.einsum("ijkl->ijlk", c2)  # d_a d_b of C2_ijkl x_k x_l

    def radial(x, q):
        r = _radius(x)
        phi = r**q
        dphi = (q * r ** (q - 2))[..., None] * x
        ddphi = (q * r ** (q - 2))[..., None, None] * eye + (
            q * (q - 2) * r ** (q - 4)
        )[..., None, None] * np.einsum("...a,...b->...ab", x, x)
        return phi, dphi, ddphi

    def polys(x):
        # (value [..., i, j], gradient [..., a, i, j], hessian [..., a, b, i, j])
        shape = x.shape[:-1]
        p0 = (np.broadcast_to(c0, shape + (n, n)), np.zeros(shape + (n, n, n)), None)
        p1 = (np.einsum("ijk,...k->...ij", c1, x), np.broadcast_to(np.einsum("ijk->kij", c1), shape + (n, n, n)), None)
        p2 = (
            np.einsum("ijkl,...k,...l->...ij", c2, x, x),
            np.einsum("ijal,...l->...aij", c2s, x),
            np.einsum("ijab->abij", c2s),
        )
        return ((p0, -p), (p1, -p - 1), (p2, -p - 2))

    def coeff(x):
        h = sum(P[0] * radial(x, q)[0][..., None, None] for P, q in polys(x))
        return eye + h

    def dcoeff(x):
        out = 0.0
        for (val, grad, _), q in polys(x):
            phi, dphi, _ = radial(x, q)
            out = out + grad * phi[..., None, None, None] + np.einsum("...a,...ij->...aij", dphi, val)
        return out

    def d2coeff(x):
        out = 0.0
        for (val, grad, hess), q in polys(x):
            phi, dphi, ddphi = radial(x, q)
            term = np.einsum("...ab,...ij->...abij", ddphi, val)
            term = term + np.einsum("...a,...bij->...abij", dphi, grad)
            term = term + np.einsum("...b,...aij->...abij", dphi, grad)
            if hess is not None:
                term = term + hess * phi[..., None, None, None, None]
            out = out + term
        return out

    return MetricField(
        dim=n,
        coeff=coeff,
        dcoeff=dcoeff,
        d2coeff=d2coeff,
        decay_order=float(p),
        inner_radius=inner_radius,
        name=name,
        analytic_mass=None,
        conformally_flat=False,
        params=params,
    )


def with_corrupted_derivative(field_: MetricField, factor: float = 1.5) -> MetricField:
    """Fault-injection hook: scale the analytic first derivative by ``factor``."""
    base = field_.dcoeff if field_.dcoeff is not None else (
        lambda y: _fd_derivative(field_.coeff, y, field_.dim)
    )

    def bad(x):
        d = base(x)
        if not np.any(d):
            # flat metric: inject a derivative that decays like r^-2
            r = _radius(x)
            d = d + (r ** -2.0)[..., None, None, None]
        return factor * d

    return replace(field_, dcoeff=bad, name=field_.name + "+corrupt")


# --------------------------------------------------------------------------
# catalog ids


@dataclass(frozen=True)
class MetricCatalogEntry:
    name: str
    dim: int
    m: Optional[float] = None
    p: Optional[float] = None
    amplitude: Optional[float] = None
    seed: Optional[int] = None

    @property
    def analytic_mass(self) -> Optional[float]:
        if self.name == "euclidean":
            return 0.0
        if self.name == "schwarzschild":
            return self.m
        if self.name == "perturb" and self.amplitude == 0:
            return 0.0
        return None

    @property
    def id(self) -> str:
        if self.name == "euclidean":
            return f"euclidean:{self.dim}"
        if self.name == "schwarzschild":
            return f"schwarzschild:{self.dim}:{self.m:g}"
        return f"perturb:{self.dim}:{self.p:g}:{self.amplitude:g}:{self.seed}"

    def build(self) -> MetricField:
        if self.name == "euclidean":
            return make_euclidean(self.dim)
        if self.name == "schwarzschild":
            return make_schwarzschild_isotropic(self.dim, self.m)
        return make_perturbation(self.dim, self.p, self.amplitude, self.seed)

    @classmethod
    def parse(cls, ident: str) -> "MetricCatalogEntry":
        parts = ident.strip().split(":")
        try:
            kind = parts[0]
            if kind == "euclidean" and len(parts) == 2:
                return cls("euclidean", int(parts[1]))
            if kind == "schwarzschild" and len(parts) == 3:
                return cls("schwarzschild", int(parts[1]), m=float(parts[2]))
            if kind == "perturb" and len(parts) == 5:
                return cls(
                    "perturb",
                    int(parts[1]),
                    p=float(parts[2]),
                    amplitude=float(parts[3]),
                    seed=int(parts[4]),
                )
        except ValueError as exc:
            raise UnknownIdError(f"malformed field id {ident!r}: {exc}") from None
        raise UnknownIdError(f"unknown field id {ident!r}")


def field_from_id(ident: str) -> MetricField:
    return MetricCatalogEntry.parse(ident).build()


DEFAULT_FIELDS = (
    "euclidean:3",
    "euclidean:4",
    "euclidean:5",
    "schwarzschild:3:1",
    "schwarzschild:4:1",
    "perturb:3:1:0.1:7",
    "perturb:4:1.5:0.1:7",
)


# --------------------------------------------------------------------------
# sampled invariants


def sample_directions(n: int, count: int, seed: int = 0) -> Array:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sample_points(n: int, count: int, r_min: float, r_max: float, seed: int = 0) -> Array:
    """Random points with log-uniform radius in ``[r_min, r_max]``."""
    rng = np.random.default_rng(seed + 1)
    radii = np.exp(rng.uniform(np.log(r_min), np.log(r_max), count))
    return sample_directions(n, count, seed) * radii[:, None]


def decay_profile(field_: MetricField, radii, direction=None) -> dict[str, Array]:
    """Norms of h, dh, ddh along a ray, for decay-order fits."""
    n = field_.dim
    if direction is None:
        direction = sample_directions(n, 1, seed=3)[0]
    x = np.asarray(radii, dtype=float)[:, None] * np.asarray(direction)[None, :]
    dh = field_.dmetric(x)
    ddh = field_.d2metric(x)
    return {
        "h": field_.perturbation_norm(x),
        "dh": np.sqrt(np.einsum("...kij,...kij->...", dh, dh)),
        "ddh": np.sqrt(np.einsum("...lkij,...lkij->...", ddh, ddh)),
    }


def is_positive_definite(field_: MetricField, x: Array) -> Array:
    return np.all(np.linalg.eigvalsh(field_.metric(x)) > 0.0, axis=-1)
