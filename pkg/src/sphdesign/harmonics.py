"""Mean-zero polynomial space P_t on S^d and its reproducing kernel.

The kernel ``K_t(x . y) = G_x(y)`` comes from the addition theorem,
``K_t(s) = sum_{k=1}^t dim H_k * R_k(s)`` with ``R_k`` the Gegenbauer
polynomial of index ``(d-1)/2`` normalised by ``R_k(1) = 1``.  Kernel code
works in every dimension.  Explicit polynomials (coefficients in a real
orthonormal spherical-harmonic basis) are available on S^2 only.

Basis convention on S^2: colatitude from ``x[2]``, longitude
``atan2(x[1], x[0])``, no Condon-Shortley phase, normalised so that
``int Y^2 dmu = 1`` for the probability measure ``mu``.  Ordering is
degree-major, order-minor: ``(1,-1), (1,0), (1,1), (2,-2), ...``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

__all__ = [
    "HarmonicSpace",
    "KernelValue",
    "Poly",
    "UnsupportedDimensionError",
    "basis_gradients",
    "basis_values",
    "exact_rule",
    "kernel_features",
    "kernel_feature_gradients",
    "kernel_second_derivative",
    "eval_poly",
    "grad_l1_norm",
    "inner_product",
    "integrate_abs",
    "kernel",
    "kernel_derivative",
    "linear_poly",
    "random_poly",
    "sphere_quadrature",
    "spherical_gradient",
]

MAX_DEGREE = 100


class UnsupportedDimensionError(ValueError):
    """Raised when an explicit-basis operation is requested for d != 2."""


@dataclass(frozen=True)
class HarmonicSpace:
    """Polynomials of degree ``<= t`` on S^d with zero mean."""

    d: int
    t: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if not 0 <= self.t <= MAX_DEGREE:
            raise ValueError(f"degree must lie in [0, {MAX_DEGREE}]")

    @property
    def dims(self) -> list[int]:
        """``dim H_k`` for ``k = 1..t``."""
        d = self.d
        return [(2 * k + d - 1) * comb(k + d - 1, k) // (k + d - 1) for k in range(1, self.t + 1)]

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    def require_explicit(self):
        if self.d != 2:
            raise UnsupportedDimensionError("explicit harmonic basis is implemented for d = 2 only")


@dataclass
class KernelValue:
    """Per-degree kernel slices ``Z_k(s)`` (axis 0, ``k = 1..t``) and their sum."""

    per_degree: np.ndarray
    total: np.ndarray


def _check_s(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if np.any(np.abs(s) > 1.0 + 1e-12):
        raise ValueError("kernel argument must lie in [-1, 1]")
    return np.clip(s, -1.0, 1.0)


def _gegenbauer(d: int, t: int, s: np.ndarray, order: int = 0) -> np.ndarray:
    """``R_k^{(order)}(s)`` for ``k = 0..t``; shape ``(t+1,) + s.shape``."""
    a = 0.5 * (d - 1)
    R = np.empty((t + 1,) + s.shape)
    dR = np.empty_like(R) if order >= 1 else None
    d2R = np.empty_like(R) if order >= 2 else None
    R[0] = 1.0
    if order >= 1:
        dR[0] = 0.0
    if order >= 2:
        d2R[0] = 0.0
    if t >= 1:
        R[1] = s
        if order >= 1:
            dR[1] = 1.0
        if order >= 2:
            d2R[1] = 0.0
    for k in range(1, t):
        c1 = 2.0 * (k + a) / (k + 2.0 * a)
        c2 = k / (k + 2.0 * a)
        R[k + 1] = c1 * s * R[k] - c2 * R[k - 1]
        if order >= 1:
            dR[k + 1] = c1 * (R[k] + s * dR[k]) - c2 * dR[k - 1]
        if order >= 2:
            d2R[k + 1] = c1 * (2.0 * dR[k] + s * d2R[k]) - c2 * d2R[k - 1]
    return (R, dR, d2R)[order]


def kernel(space: HarmonicSpace, s) -> KernelValue:
    """Reproducing kernel of P_t at cosine ``s`` (scalar or array)."""
    s = _check_s(s)
    dims = np.array(space.dims, dtype=float).reshape((-1,) + (1,) * s.ndim)
    R = _gegenbauer(space.d, space.t, s)
    Z = dims * R[1:]
    return KernelValue(Z, Z.sum(axis=0))


def _kernel_deriv(space: HarmonicSpace, s, order: int) -> np.ndarray:
    s = _check_s(s)
    dims = np.array(space.dims, dtype=float).reshape((-1,) + (1,) * s.ndim)
    return (dims * _gegenbauer(space.d, space.t, s, order)[1:]).sum(axis=0)


def kernel_derivative(space: HarmonicSpace, s) -> np.ndarray:
    """``dK_t/ds``."""
    return _kernel_deriv(space, s, 1)


def kernel_second_derivative(space: HarmonicSpace, s) -> np.ndarray:
    return _kernel_deriv(space, s, 2)


@lru_cache(maxsize=64)
def exact_rule(d: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Positive rule on S^d integrating polynomials of degree ``<= degree`` exactly.

    Nested product: Gauss-Jacobi in the last coordinate (weight
    ``(1 - s^2)^{(d-2)/2}``) over a rule on S^{d-1}; equispaced angles on S^1.
    Weights sum to 1.
    """
    if d == 1:
        m = degree + 1
        a = 2 * np.pi * np.arange(m) / m
        pts, wts = np.column_stack([np.cos(a), np.sin(a)]), np.full(m, 1.0 / m)
    else:
        n = degree // 2 + 1
        s, w = roots_jacobi(n, 0.5 * (d - 2), 0.5 * (d - 2))
        w = w / w.sum()
        sub, sw = exact_rule(d - 1, degree)
        r = np.sqrt(1.0 - s**2)
        pts = np.concatenate([np.column_stack([ri * sub, np.full(len(sub), si)])
                              for si, ri in zip(s, r)])
        wts = np.concatenate([wi * sw for wi in w])
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def kernel_features(space: HarmonicSpace, x, per_degree: bool = False) -> np.ndarray:
    """Feature map with ``Phi(x) . Phi(y) = K_t(x . y)``.

    ``Phi_q(x) = sqrt(w_q) K_t(x . y_q)`` for an exact degree-``2t`` rule
    ``(y_q, w_q)``; the reproducing property makes the Gram identity exact.
    With ``per_degree`` the per-degree slices ``sqrt(w_q) Z_k(x . y_q)`` are
    returned with shape ``(t, n, Q)``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    yq, wq = exact_rule(space.d, 2 * space.t)
    kv = kernel(space, x @ yq.T)
    sw = np.sqrt(wq)
    return kv.per_degree * sw if per_degree else kv.total * sw


def kernel_feature_gradients(space: HarmonicSpace, x) -> np.ndarray:
    """Ambient derivatives ``d Phi_q / dx`` at ``x``, shape ``(n, Q, d+1)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    yq, wq = exact_rule(space.d, 2 * space.t)
    A = kernel_derivative(space, x @ yq.T) * np.sqrt(wq)
    return A[:, :, None] * yq[None, :, :]


# --------------------------------------------------------------------------
# explicit basis on S^2
# --------------------------------------------------------------------------

def _legendre_table(t: int, s: np.ndarray, sin_t: np.ndarray) -> dict:
    """Normalised associated Legendre functions with ``int_{-1}^1 p_lm^2 = 2``."""
    p = {(0, 0): np.ones_like(s)}
    for m in range(1, t + 1):
        p[m, m] = np.sqrt((2 * m + 1) / (2 * m)) * sin_t * p[m - 1, m - 1]
    for m in range(0, t):
        p[m + 1, m] = np.sqrt(2 * m + 3) * s * p[m, m]
    for m in range(0, t + 1):
        for l in range(m + 2, t + 1):
            a = np.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = np.sqrt((2 * l + 1) * ((l - 1) ** 2 - m * m) / ((2 * l - 3) * (l * l - m * m)))
            p[l, m] = a * s * p[l - 1, m] - b * p[l - 2, m]
    return p


def basis_values(t: int, x) -> np.ndarray:
    """Real orthonormal harmonics of degrees ``1..t`` at points ``x`` (n, 3)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != 3:
        raise UnsupportedDimensionError("explicit basis needs points on S^2")
    s = x[:, 2]
    sin_t = np.hypot(x[:, 0], x[:, 1])
    phi = np.arctan2(x[:, 1], x[:, 0])
    p = _legendre_table(t, s, sin_t)
    cols = []
    r2 = np.sqrt(2.0)
    for l in range(1, t + 1):
        for m in range(-l, l + 1):
            if m < 0:
                cols.append(r2 * p[l, -m] * np.sin(-m * phi))
            elif m == 0:
                cols.append(p[l, 0])
            else:
                cols.append(r2 * p[l, m] * np.cos(m * phi))
    return np.column_stack(cols) if cols else np.zeros((x.shape[0], 0))


@lru_cache(maxsize=32)
def sphere_quadrature(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on S^2 (Gauss-Legendre in cos(colatitude) x 2n longitudes).

    Exact for polynomials of degree ``<= 2n - 1``; weights sum to 1.
    """
    s, w = leggauss(n)
    phi = (np.arange(2 * n) + 0.5) * np.pi / n
    S, PHI = np.meshgrid(s, phi, indexing="ij")
    r = np.sqrt(1.0 - S**2)
    pts = np.column_stack([(r * np.cos(PHI)).ravel(), (r * np.sin(PHI)).ravel(), S.ravel()])
    wts = (np.repeat(w, 2 * n) / (4.0 * n))
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def exact_quadrature(t: int) -> tuple[np.ndarray, np.ndarray]:
    """Product rule integrating every polynomial of degree ``<= 2t`` exactly."""
    return sphere_quadrature(t + 1)


@lru_cache(maxsize=64)
def _quad_basis(t: int):
    pts, wts = exact_quadrature(t)
    return pts, wts, basis_values(t, pts)


def basis_gradients(t: int, x) -> np.ndarray:
    """Spherical gradients of the basis, shape ``(n, total_dim, 3)``.

    Uses ``grad Y(x) = int K_t'(x.y) (y - (x.y) x) Y(y) dmu(y)``, which an
    exact degree-``2t`` rule evaluates without error.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != 3:
        raise UnsupportedDimensionError("explicit basis needs points on S^2")
    space = HarmonicSpace(2, t)
    yq, wq, Yq = _quad_basis(t)
    c = x @ yq.T
    A = kernel_derivative(space, c) * wq
    first = np.einsum("nq,qk,qa->nka", A, Yq, yq)
    second = np.einsum("nq,qk->nk", A * c, Yq)
    return first - second[:, :, None] * x[:, None, :]


@dataclass
class Poly:
    """Element of P_t on S^2 given by orthonormal-basis coefficients."""

    space: HarmonicSpace
    coeffs: np.ndarray = field(default=None)

    def __post_init__(self):
        self.space.require_explicit()
        if self.coeffs is None:
            self.coeffs = np.zeros(self.space.total_dim)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.total_dim,):
            raise ValueError(f"expected {self.space.total_dim} coefficients")

    def __call__(self, x):
        return eval_poly(self, x)

    def __add__(self, other: "Poly") -> "Poly":
        _same_space(self, other)
        return Poly(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other: "Poly") -> "Poly":
        _same_space(self, other)
        return Poly(self.space, self.coeffs - other.coeffs)

    def __mul__(self, c: float) -> "Poly":
        return Poly(self.space, self.coeffs * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "Poly":
        return Poly(self.space, -self.coeffs)

    def to_dict(self) -> dict:
        return {"d": self.space.d, "t": self.space.t, "basis": "real-sh-degree-major",
                "coeffs": [float(c) for c in self.coeffs]}

    @classmethod
    def from_dict(cls, data: dict) -> "Poly":
        return cls(HarmonicSpace(int(data["d"]), int(data["t"])), np.array(data["coeffs"]))

    @classmethod
    def kernel_slice(cls, space: HarmonicSpace, x) -> "Poly":
        """``G_x``: its coefficients are the basis values at ``x``."""
        return cls(space, basis_values(space.t, np.asarray(x)[None, :])[0])


def _same_space(p: Poly, q: Poly):
    if p.space != q.space:
        raise ValueError("polynomials live in different spaces")


def linear_poly(e) -> Poly:
    """``x -> (e, x)`` as an element of P_1."""
    e = np.asarray(e, dtype=float)
    return Poly(HarmonicSpace(2, 1), np.array([e[1], e[2], e[0]]) / np.sqrt(3.0))


def eval_poly(P: Poly, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    vals = basis_values(P.space.t, np.atleast_2d(x)) @ P.coeffs
    return float(vals[0]) if x.ndim == 1 else vals


def spherical_gradient(P: Poly, x) -> np.ndarray:
    """Gradient of ``P(x/|x|)``; tangent to the sphere at ``x``."""
    x = np.asarray(x, dtype=float)
    g = _gradient_field(P, np.atleast_2d(x))
    return g[0] if x.ndim == 1 else g


def inner_product(P: Poly, Q: Poly, method: str = "coeffs") -> float:
    """L2(mu) inner product, from coefficients or from an exact quadrature rule."""
    _same_space(P, Q)
    if method == "coeffs":
        return float(P.coeffs @ Q.coeffs)
    if method == "quadrature":
        pts, wts, Y = _quad_basis(P.space.t)
        return float(wts @ ((Y @ P.coeffs) * (Y @ Q.coeffs)))
    raise ValueError(f"unknown method {method!r}")


def _gradient_field(P: Poly, x: np.ndarray, chunk: int = 65536) -> np.ndarray:
    """Row-wise ``grad P`` at many points through the kernel quadrature."""
    yq, wq, Yq = _quad_basis(P.space.t)
    vals = wq * (Yq @ P.coeffs)
    out = np.empty_like(x)
    for a in range(0, x.shape[0], chunk):
        xs = x[a:a + chunk]
        c = xs @ yq.T
        A = kernel_derivative(P.space, c) * vals
        out[a:a + chunk] = A @ yq - (A * c).sum(axis=1)[:, None] * xs
    return out


_GRID_CACHE_LIMIT = 20_000_000  # float entries kept per cached gradient table


@lru_cache(maxsize=8)
def _grid_basis_gradients(t: int, n: int) -> np.ndarray:
    pts, _ = sphere_quadrature(n)
    return basis_gradients(t, pts).reshape(pts.shape[0], -1)


def _grid_gradient_norms(P: Poly, n: int) -> np.ndarray:
    pts, _ = sphere_quadrature(n)
    if pts.shape[0] * P.space.total_dim * 3 <= _GRID_CACHE_LIMIT:
        G = _grid_basis_gradients(P.space.t, n).reshape(pts.shape[0], -1, 3)
        return np.linalg.norm(np.einsum("nka,k->na", G, P.coeffs), axis=1)
    return np.linalg.norm(_gradient_field(P, pts), axis=1)


def grad_l1_norm(P: Poly, rtol: float = 1e-6, n_start: int = 64, n_max: int = 1024) -> float:
    """``int |grad P| dmu`` with grid doubling until two levels agree to ``rtol``.

    The integrand has conical kinks at critical points of ``P``, so the product
    rule converges algebraically; doubling stops once successive levels agree.
    """
    if not np.any(P.coeffs):
        return 0.0
    prev = None
    n = n_start
    while True:
        _, wts = sphere_quadrature(n)
        val = float(wts @ _grid_gradient_norms(P, n))
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return val
        if n >= n_max:
            return val
        prev = val
        n *= 2


def _circle_integral_abs(P: Poly, phi: float, deg: int, nodes: np.ndarray,
                         weights: np.ndarray) -> float:
    """``int_0^{2 pi} |P(x(theta))| |sin theta| dtheta`` on the great circle at longitude ``phi``."""
    L = 2 * deg + 2
    th = 2 * np.pi * np.arange(L) / L

    def circle(theta):
        st = np.sin(theta)
        return np.column_stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])

    vals = basis_values(P.space.t, circle(th)) @ P.coeffs
    c = np.fft.fft(vals) / L
    # z^deg * sum_{k=-deg}^{deg} c_k z^k, highest power first
    coeffs = np.array([c[k % L] for k in range(deg, -deg - 1, -1)])
    breaks = [0.0, np.pi, 2 * np.pi]
    if np.any(np.abs(coeffs) > 1e-14 * np.abs(coeffs).max()):
        roots = np.roots(coeffs)
        on_circle = roots[np.abs(np.abs(roots) - 1.0) < 1e-6]
        breaks.extend(np.mod(np.angle(on_circle), 2 * np.pi).tolist())
    breaks = np.unique(np.clip(breaks, 0.0, 2 * np.pi))
    a, b = breaks[:-1], breaks[1:]
    keep = b - a > 1e-14
    a, b = a[keep], b[keep]
    theta = (0.5 * (a + b))[:, None] + (0.5 * (b - a))[:, None] * nodes[None, :]
    f = np.abs(basis_values(P.space.t, circle(theta.ravel())) @ P.coeffs) * np.abs(np.sin(theta.ravel()))
    return float(((0.5 * (b - a))[:, None] * weights[None, :] * f.reshape(theta.shape)).sum())


def integrate_abs(P: Poly, rtol: float = 1e-10, m_start: int = 32, m_max: int = 2048) -> float:
    """``int |P| dmu`` on S^2.

    Along each great circle through the poles ``P`` is a trigonometric
    polynomial; its zeros are located from the companion matrix and the
    integrand is integrated piecewise by Gauss-Legendre.  The longitude
    direction uses the periodic trapezoid rule with doubling.
    """
    if not np.any(P.coeffs):
        return 0.0
    deg = P.space.t
    nodes, weights = leggauss(max(24, 2 * deg + 8))
    prev = None
    M = m_start
    while True:
        phis = 2 * np.pi * np.arange(M // 2) / M
        total = sum(_circle_integral_abs(P, ph, deg, nodes, weights) for ph in phis)
        val = total * (2 * np.pi / M) / (4 * np.pi)
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return val
        if M >= m_max:
            return val
        prev = val
        M *= 2


def random_poly(space: HarmonicSpace, seed: int, normalization: str = "unit-coeff") -> Poly:
    """Gaussian random polynomial, scaled to unit coefficient norm or onto the
    boundary ``{int |grad P| dmu = 1}``."""
    space.require_explicit()
    rng = np.random.default_rng(seed)
    while True:
        c = rng.standard_normal(space.total_dim)
        if np.any(c):
            break
    P = Poly(space, c / np.linalg.norm(c))
    if normalization == "unit-coeff":
        return P
    if normalization == "boundary":
        return P * (1.0 / grad_l1_norm(P))
    raise ValueError(f"unknown normalization {normalization!r}")
