"""Spherical geometry on S^d embedded in R^{d+1}.

Points are plain numpy arrays of shape ``(d+1,)`` or ``(n, d+1)``; the
helpers here normalise, measure and move them.  All functions are pure.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, gammaln

__all__ = [
    "Cap",
    "GeodesicArc",
    "as_points",
    "cap_measure",
    "geodesic_distance",
    "geodesic_point",
    "mc_sphere_sample",
    "pairwise_distances",
    "radial_map",
    "sphere_area",
    "tangent_basis",
    "tangent_lift",
    "tangent_project",
]


def as_points(x) -> np.ndarray:
    """Return ``x`` as float array(s) renormalised onto the unit sphere."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 2:
        raise ValueError("sphere points need at least 2 coordinates (d >= 1)")
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("zero vector is not a sphere point")
    return x / norm


def _check_dims(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}")


def geodesic_distance(x, y):
    """Great-circle distance between unit vectors.

    Evaluated as ``2 atan2(|x - y|, |x + y|)``, which keeps full relative
    accuracy for tiny and near-antipodal angles where ``arccos`` does not.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_dims(x, y)
    return 2.0 * np.arctan2(np.linalg.norm(x - y, axis=-1), np.linalg.norm(x + y, axis=-1))


def pairwise_distances(points) -> np.ndarray:
    """Matrix of geodesic distances between rows of ``points``."""
    p = np.asarray(points, dtype=float)
    return geodesic_distance(p[:, None, :], p[None, :, :])


def tangent_project(x, z):
    """Orthogonal projection of ``z`` onto the tangent space at ``x``."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    _check_dims(x, z)
    return z - np.sum(x * z, axis=-1, keepdims=True) * x


def tangent_lift(x, u):
    """Inverse of :func:`tangent_project` on the open hemisphere around ``x``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    _check_dims(x, u)
    sq = np.sum(u * u, axis=-1, keepdims=True)
    if np.any(sq > 1.0 + 1e-12):
        raise ValueError("|u| > 1: point lies outside the hemisphere chart")
    return u + np.sqrt(np.clip(1.0 - sq, 0.0, None)) * x


def radial_map(w):
    """Radial projection ``w / |w|`` onto the sphere."""
    w = np.asarray(w, dtype=float)
    norm = np.linalg.norm(w, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("radial projection of the zero vector is undefined")
    return w / norm


def tangent_basis(x) -> np.ndarray:
    """Orthonormal basis of the tangent space at ``x`` as columns, shape (..., d+1, d)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    n, dim = xs.shape
    # Householder reflection swapping x and -sign(x_k) e_k; the remaining
    # columns span x-perp.  Adding (not subtracting) e_k avoids cancellation.
    k = np.argmax(np.abs(xs), axis=1)
    out = np.empty((n, dim, dim - 1))
    for i in range(n):
        v = xs[i].copy()
        e = np.zeros(dim)
        e[k[i]] = 1.0
        sgn = 1.0 if v[k[i]] >= 0 else -1.0
        h = v + sgn * e
        H = np.eye(dim) - 2.0 * np.outer(h, h) / (h @ h)
        cols = [j for j in range(dim) if j != k[i]]
        out[i] = H[:, cols]
    return out[0] if single else out


@dataclass(frozen=True)
class Cap:
    """Closed spherical cap ``A(center, radius)``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not 0.0 <= self.radius <= np.pi:
            raise ValueError("cap radius must lie in [0, pi]")
        object.__setattr__(self, "center", as_points(self.center))

    def contains(self, z, tol: float = 0.0):
        return geodesic_distance(self.center, z) <= self.radius + tol

    @property
    def measure(self) -> float:
        return cap_measure(self.center.shape[0] - 1, self.radius)


@dataclass(frozen=True)
class GeodesicArc:
    """Shortest great-circle arc from ``start`` to ``end``, unit-interval parametrised."""

    start: np.ndarray
    end: np.ndarray

    def __post_init__(self):
        s = as_points(self.start)
        e = as_points(self.end)
        _check_dims(s, e)
        if float(np.dot(s, e)) <= -1.0 + 1e-12:
            raise ValueError("antipodal endpoints: geodesic is not unique")
        object.__setattr__(self, "start", s)
        object.__setattr__(self, "end", e)

    @property
    def length(self) -> float:
        return float(geodesic_distance(self.start, self.end))

    def __call__(self, h):
        return geodesic_point(self, h)


def _slerp(a: np.ndarray, b: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Vectorised slerp; rows of ``a``, ``b`` paired with entries of ``h``."""
    c = np.clip(np.sum(a * b, axis=-1), -1.0, 1.0)
    theta = np.arccos(c)
    h = np.asarray(h, dtype=float)
    # explicit orthonormal frame is accurate for tiny angles too
    u = b - c[..., None] * a
    un = np.linalg.norm(u, axis=-1, keepdims=True)
    safe = un[..., 0] > 1e-300
    u = np.where(safe[..., None], u / np.where(un > 0, un, 1.0), 0.0)
    ang = (h * theta)[..., None]
    return np.cos(ang) * a + np.sin(ang) * u


def geodesic_point(arc: GeodesicArc, h):
    """Point at fraction ``h`` of the arc length (equal-speed parametrisation)."""
    h_arr = np.asarray(h, dtype=float)
    if np.any((h_arr < 0) | (h_arr > 1)):
        raise ValueError("geodesic parameter must lie in [0, 1]")
    if h_arr.ndim == 0:
        return _slerp(arc.start, arc.end, h_arr)
    a = np.broadcast_to(arc.start, h_arr.shape + arc.start.shape)
    b = np.broadcast_to(arc.end, h_arr.shape + arc.end.shape)
    return _slerp(a, b, h_arr)


def slerp_many(a, b, h) -> np.ndarray:
    """Row-wise geodesic points ``gamma_[a_i, b_i](h_i)``; no range checks."""
    return _slerp(np.asarray(a, float), np.asarray(b, float), np.asarray(h, float))


def sphere_area(d: int) -> float:
    """Unnormalised surface measure of S^d, 2 pi^{(d+1)/2} / Gamma((d+1)/2)."""
    return float(np.exp(np.log(2.0) + 0.5 * (d + 1) * np.log(np.pi) - gammaln(0.5 * (d + 1))))


def cap_measure(d: int, radius: float) -> float:
    """Normalised measure of a cap of geodesic radius ``radius`` on S^d.

    The sine-power integral reduces to a regularised incomplete beta function
    in ``u = (1 - cos r) / 2``.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if not 0.0 <= radius <= np.pi:
        raise ValueError("radius must lie in [0, pi]")
    u = 0.5 * (1.0 - np.cos(radius))
    return float(betainc(0.5 * d, 0.5 * d, u))


def mc_sphere_sample(d: int, count: int, seed: int) -> np.ndarray:
    """``count`` i.i.d. uniform points on S^d (normalised Gaussian deviates)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(np.uint64(seed % 2**64))
    g = rng.standard_normal((count, d + 1))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def fibonacci_sphere(n: int) -> np.ndarray:
    """Quasi-uniform spiral points on S^2."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    phi = np.pi * (1.0 + np.sqrt(5.0)) * i
    rho = np.sqrt(1.0 - z * z)
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
