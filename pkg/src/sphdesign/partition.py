"""Convex area-regular partitions of S^d for arbitrary cell counts.

A polytope ``Q(lam, mu)`` (a box when ``lam == mu``) is radially projected
onto the sphere; each of its ``2d + 2`` facets becomes a geodesically convex
region whose pull-back measure is then cut into equal-mass boxes by
:func:`sphdesign.rectpart.partition_rect`.  Facet ``f`` (0-based) lies on the
hyperplane where cube coordinate ``f // 2`` equals ``+1`` (even ``f``) or
``-1`` (odd ``f``); coordinate 0 is the polar axis.

Every cell is the intersection of the sphere with a pointed polyhedral cone
``{x : (n_j, x) >= 0}``.  Containment, depth, inscribed caps and linear
maximisation are all computed exactly from the cone normals ``n_j``.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import geom
from .rectpart import DensityMeasure, Rect, RectPartition, partition_rect

log = logging.getLogger(__name__)

__all__ = [
    "Cell",
    "ConvexPartition",
    "PolytopeFrame",
    "build_partition",
    "cell_contains",
    "facet_counts",
    "facet_density",
    "incenter",
    "partition_norm",
    "polar_facet_mass",
    "project_to_cone",
    "solve_lambda_even",
    "solve_lambda_mu_odd",
]

SCHEMA_VERSION = 1
CONTAINS_TOL = 1e-9


# --------------------------------------------------------------------------
# polytope frame
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PolytopeFrame:
    """Polytope ``Q(lam, mu)`` with per-facet cell counts.

    ``counts[f]`` cells go to facet ``f``; ``facet_masses = counts / N``.
    """

    d: int
    N: int
    lam: float
    mu: float
    counts: tuple
    in_nominal_bracket: bool = True
    fallback: bool = False

    @property
    def parity(self) -> str:
        return "even" if self.N % 2 == 0 else "odd"

    @property
    def facet_masses(self) -> np.ndarray:
        return np.array(self.counts, dtype=float) / self.N

    @property
    def coeffs(self) -> tuple[float, float, float, float]:
        """``(A, B, C, D)`` with ``phi(t0, t) = (A t0 + B, (C t0 + D) t)``."""
        sl = math.sqrt(1.0 - self.lam**2)
        sm = math.sqrt(1.0 - self.mu**2)
        rd = math.sqrt(self.d)
        return (0.5 * (self.lam + self.mu), 0.5 * (self.lam - self.mu),
                (sl - sm) / (2.0 * rd), (sl + sm) / (2.0 * rd))

    def phi(self, t) -> np.ndarray:
        """Map the cube ``[-1, 1]^{d+1}`` onto ``Q(lam, mu)``."""
        t = np.atleast_2d(np.asarray(t, dtype=float))
        A, B, C, D = self.coeffs
        scale = C * t[:, 0] + D
        return np.column_stack([A * t[:, 0] + B, scale[:, None] * t[:, 1:]])

    def chart_to_cube(self, facet: int, tau) -> np.ndarray:
        tau = np.atleast_2d(np.asarray(tau, dtype=float))
        axis, sign = divmod(facet, 2)
        return np.insert(tau, axis, -1.0 if sign else 1.0, axis=1)

    def chart_to_polytope(self, facet: int, tau) -> np.ndarray:
        return self.phi(self.chart_to_cube(facet, tau))

    def chart_to_sphere(self, facet: int, tau) -> np.ndarray:
        return geom.radial_map(self.chart_to_polytope(facet, tau))

    def sphere_to_chart(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Facet index and chart coordinates of sphere points (ray/facet intersection)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n, dim = x.shape
        A, B, C, D = self.coeffs
        beta = D - C * B / A
        scales = np.full((n, 2 * dim), np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            scales[:, 0] = np.where(x[:, 0] > 0, self.lam / x[:, 0], np.inf)
            scales[:, 1] = np.where(x[:, 0] < 0, self.mu / -x[:, 0], np.inf)
            for a in range(1, dim):
                for sgn, f in ((1.0, 2 * a), (-1.0, 2 * a + 1)):
                    den = sgn * x[:, a] - (C / A) * x[:, 0]
                    scales[:, f] = np.where(den > 0, beta / den, np.inf)
        facet = np.argmin(scales, axis=1)
        s = scales[np.arange(n), facet]
        w = s[:, None] * x
        t = np.empty_like(w)
        t[:, 0] = (w[:, 0] - B) / A
        t[:, 1:] = w[:, 1:] / (C * t[:, 0] + D)[:, None]
        axis = facet // 2
        t[np.arange(n), axis] = np.where(facet % 2 == 0, 1.0, -1.0)
        mask = np.ones_like(t, dtype=bool)
        mask[np.arange(n), axis] = False
        tau = np.clip(t[mask].reshape(n, dim - 1), -1.0, 1.0)
        return facet, tau

    def jacobian(self, facet: int, tau) -> np.ndarray:
        """``|det[w, dw/dtau_1, ..., dw/dtau_d]|`` of the facet chart."""
        tau = np.atleast_2d(np.asarray(tau, dtype=float))
        d = self.d
        sl = math.sqrt(1.0 - self.lam**2)
        sm = math.sqrt(1.0 - self.mu**2)
        rd = math.sqrt(d)
        if facet == 0:
            return np.full(tau.shape[0], self.lam * (sl / rd) ** d)
        if facet == 1:
            return np.full(tau.shape[0], self.mu * (sm / rd) ** d)
        _, _, C, D = self.coeffs
        c = C * tau[:, 0] + D
        return c ** (d - 1) * (self.lam * sm + self.mu * sl) / (2.0 * rd)

    def to_dict(self) -> dict:
        return {"d": self.d, "N": self.N, "lambda": self.lam, "mu": self.mu,
                "counts": list(self.counts), "in_nominal_bracket": self.in_nominal_bracket,
                "fallback": self.fallback}


def _triangle_solid_angle(a, b, c) -> np.ndarray:
    num = np.abs(np.einsum("...i,...i->...", a, np.cross(b, c)))
    den = 1.0 + np.einsum("...i,...i->...", a, b) + np.einsum("...i,...i->...", b, c) \
        + np.einsum("...i,...i->...", c, a)
    return 2.0 * np.arctan2(num, den)


def _quad_mass_s2(frame: PolytopeFrame, facet: int, lo, hi) -> float:
    """Exact normalised area of the image of a chart box on S^2."""
    corners = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    v = frame.chart_to_sphere(facet, corners)
    omega = _triangle_solid_angle(v[0], v[1], v[2]) + _triangle_solid_angle(v[0], v[2], v[3])
    return float(omega / (4.0 * np.pi))


def facet_density(frame: PolytopeFrame, facet: int, exact: bool = True,
                  estimate_uniformity: bool = True) -> DensityMeasure:
    """Pull-back of the normalised sphere measure to the chart ``[-1, 1]^d`` of ``facet``.

    Density is ``|det[w, dw]| / (|w|^{d+1} omega_d)``.  On S^2 box masses are
    exact spherical-quadrilateral areas unless ``exact=False``.
    """
    d = frame.d
    omega = geom.sphere_area(d)
    if frame.jacobian(facet, np.zeros((1, d)))[0] <= 0:
        raise ValueError("degenerate facet")

    def density(tau):
        w = frame.chart_to_polytope(facet, tau)
        r = np.linalg.norm(w, axis=1)
        return frame.jacobian(facet, tau) / (r ** (d + 1) * omega)

    box_mass = None
    if exact and d == 2:
        def box_mass(lo, hi):
            return _quad_mass_s2(frame, facet, lo, hi)

    dom = Rect.cube(d)
    meas = DensityMeasure(d, density, domain=dom, box_mass=box_mass)
    if estimate_uniformity:
        meas.uniformity_bound = meas.estimate_uniformity(dom, samples=512, seed=facet)
    return meas


# --------------------------------------------------------------------------
# choosing lambda / mu
# --------------------------------------------------------------------------

def polar_facet_mass(d: int, lam: float) -> float:
    """Measure of the radial image of the facet ``x_0 = lam`` of ``P(a_lam)``."""
    frame = PolytopeFrame(d, 2, lam, lam, (1,) * (2 * d + 2))
    return facet_density(frame, 0, estimate_uniformity=False).mass(Rect.cube(d))


def _nominal_bracket(d: int) -> tuple[float, float]:
    return 1.0 / math.sqrt(d + 1), 1.0 - 1.0 / (10.0 * d)


def _solve_polar(d: int, target: float) -> tuple[float, bool]:
    """``lam`` with ``polar_facet_mass(d, lam) = target``; flag if inside the standard bracket."""
    if not 0.0 < target < 0.5:
        raise ValueError(f"polar facet mass {target} not attainable")
    lo, hi = _nominal_bracket(d)
    g = lambda lam: polar_facet_mass(d, lam) - target  # noqa: E731
    g_lo, g_hi = g(lo), g(hi)
    if abs(g_lo) <= 1e-13:
        return lo, True
    inside = g_lo >= 0.0 >= g_hi
    if not inside:
        lo, hi = 1e-3, 1.0 - 1e-6
        if not g(lo) >= 0.0 >= g(hi):
            raise ValueError(f"polar facet mass {target} outside reachable range")
    lam = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return lam, inside


def facet_counts(d: int, N: int) -> Optional[tuple[tuple, bool]]:
    """Cells per facet ``(counts, fallback)``, or ``None`` when ``N`` is too small.

    The standard split gives each lateral facet ``floor(N/(2d+2)) + 1`` cells
    and the two polar facets the rest; if a polar facet would be empty the
    lateral count is lowered until both polar facets get at least one cell.
    """
    q = N // (2 * d + 2)
    for lateral in range(q + 1, 0, -1):
        rem = N - 2 * d * lateral
        top, bottom = rem // 2, rem - rem // 2
        if top >= 1:
            return (top, bottom) + (lateral,) * (2 * d), lateral != q + 1
    return None


def solve_lambda_even(d: int, N: int) -> PolytopeFrame:
    """Box frame ``P(a_lam)`` whose polar facets carry the prescribed mass."""
    if N % 2:
        raise ValueError("solve_lambda_even needs even N")
    res = facet_counts(d, N)
    if res is None:
        raise ValueError(f"N={N} too small for a {2 * d + 2}-facet frame")
    counts, fallback = res
    lam, inside = _solve_polar(d, counts[0] / N)
    return PolytopeFrame(d, N, lam, lam, counts, inside, fallback)


def solve_lambda_mu_odd(d: int, N: int) -> PolytopeFrame:
    """Frame ``Q(lam, mu)`` for odd ``N``: top facet one cell lighter than the bottom."""
    if N % 2 == 0:
        raise ValueError("solve_lambda_mu_odd needs odd N")
    res = facet_counts(d, N)
    if res is None:
        raise ValueError(f"N={N} too small for a {2 * d + 2}-facet frame")
    counts, fallback = res
    lam, in_l = _solve_polar(d, counts[0] / N)
    mu, in_m = _solve_polar(d, counts[1] / N)
    return PolytopeFrame(d, N, lam, mu, counts, in_l and in_m, fallback)


# --------------------------------------------------------------------------
# cones
# --------------------------------------------------------------------------

def _min_norm_in_hull(normals: np.ndarray) -> np.ndarray:
    """Minimum-norm point of conv(rows) for a batch ``(n, k, dim)`` of generator sets."""
    n, k, dim = normals.shape
    best = np.full(n, np.inf)
    best_y = np.zeros((n, dim))
    for size in range(1, min(k, dim) + 1):
        for sub in itertools.combinations(range(k), size):
            V = normals[:, sub, :]
            G = V @ V.transpose(0, 2, 1)
            K = np.zeros((n, size + 1, size + 1))
            K[:, :size, :size] = G
            K[:, :size, size] = 1.0
            K[:, size, :size] = 1.0
            rhs = np.zeros((n, size + 1))
            rhs[:, size] = 1.0
            sol = np.einsum("nij,nj->ni", np.linalg.pinv(K), rhs)
            w = sol[:, :size]
            ok = np.all(w >= -1e-12, axis=1) & (np.abs(w.sum(axis=1) - 1.0) < 1e-9)
            y = np.einsum("nk,nkd->nd", w, V)
            val = np.linalg.norm(y, axis=1)
            upd = ok & (val < best - 1e-15)
            best[upd] = val[upd]
            best_y[upd] = y[upd]
    return best_y


def project_to_cone(normals: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Euclidean projection of ``y`` onto ``{z : normals @ z >= 0}``, batched.

    ``normals`` has shape ``(n, k, dim)`` and ``y`` shape ``(n, dim)``.  Active
    sets are enumerated; the closest feasible candidate is the projection.
    """
    n, k, dim = normals.shape
    scale = np.linalg.norm(y, axis=1) + 1e-300
    best = np.full(n, np.inf)
    best_z = np.zeros_like(y)
    subsets = [()]
    for size in range(1, min(k, dim - 1) + 1):
        subsets.extend(itertools.combinations(range(k), size))
    for sub in subsets:
        if sub:
            V = normals[:, sub, :]
            G = V @ V.transpose(0, 2, 1)
            coef = np.einsum("nij,nj->ni", np.linalg.pinv(G), np.einsum("nkd,nd->nk", V, y))
            z = y - np.einsum("nk,nkd->nd", coef, V)
        else:
            z = y.copy()
        feas = np.all(np.einsum("nkd,nd->nk", normals, z) >= -1e-12 * scale[:, None], axis=1)
        dist = np.linalg.norm(z - y, axis=1)
        upd = feas & (dist < best)
        best[upd] = dist[upd]
        best_z[upd] = z[upd]
    return best_z


# --------------------------------------------------------------------------
# cells
# --------------------------------------------------------------------------

@dataclass
class Cell:
    """One partition cell: a chart box on a facet (or a lune) and its cone normals."""

    index: int
    normals: np.ndarray
    facet: Optional[int] = None
    box: Optional[Rect] = None
    frame: Optional[PolytopeFrame] = field(default=None, repr=False)
    lune: Optional[tuple] = None  # (angle_lo, angle_hi) in the (x0, x1)-plane
    measure: float = float("nan")

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    def depth(self, x) -> np.ndarray:
        """Signed geodesic distance to the cell boundary (negative outside)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.normals.shape[0] == 0:
            return np.full(x.shape[0], np.pi)
        return np.arcsin(np.clip(x @ self.normals.T, -1.0, 1.0)).min(axis=1)

    def contains(self, x, tol: float = CONTAINS_TOL) -> np.ndarray:
        return self.depth(x) >= -tol

    def corners(self) -> np.ndarray:
        if self.box is None:
            raise ValueError("lune cells have no chart corners")
        return self.frame.chart_to_sphere(self.facet, self.box.corners())

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Random points of the cell (not area-uniform for chart cells)."""
        if self.box is not None:
            tau = self.box.lo + rng.random((count, self.box.dim)) * (self.box.hi - self.box.lo)
            return self.frame.chart_to_sphere(self.facet, tau)
        out = []
        while sum(len(o) for o in out) < count:
            g = rng.standard_normal((4 * count, self.dim))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            out.append(g[self.contains(g, tol=0.0)])
        return np.vstack(out)[:count]

    def diameter(self) -> float:
        if self.box is None:
            return float(np.pi)
        c = self.corners()
        return float(geom.pairwise_distances(c).max())


def _box_normals(frame: PolytopeFrame, facet: int, box: Rect) -> np.ndarray:
    d = frame.d
    center = frame.chart_to_polytope(facet, box.center[None, :])[0]
    normals = []
    corners = box.corners()
    for j in range(d):
        for side in (box.lower[j], box.upper[j]):
            face = corners[corners[:, j] == side]
            pts = frame.chart_to_polytope(facet, face)
            _, _, vt = np.linalg.svd(pts)
            n = vt[-1]
            if n @ center < 0:
                n = -n
            normals.append(n / np.linalg.norm(n))
    return np.array(normals)


def _lune_normals(d: int, a0: float, a1: float) -> np.ndarray:
    if a1 - a0 >= 2 * np.pi - 1e-12:
        return np.zeros((0, d + 1))
    n0 = np.zeros(d + 1)
    n1 = np.zeros(d + 1)
    n0[:2] = -np.sin(a0), np.cos(a0)
    n1[:2] = np.sin(a1), -np.cos(a1)
    return np.array([n0, n1])


def cell_contains(cell: Cell, x, tol: float = CONTAINS_TOL):
    """Membership of sphere point(s) ``x`` in ``cell`` up to geodesic slack ``tol``."""
    res = cell.contains(x, tol)
    return bool(res[0]) if np.ndim(x) == 1 else res


def incenter(cell: Cell) -> tuple[np.ndarray, float]:
    """Centre and radius of the largest cap inside ``cell``."""
    c, r = _incenters([cell])
    return c[0], float(r[0])


def _incenters(cells: list) -> tuple[np.ndarray, np.ndarray]:
    dim = cells[0].dim
    centers = np.zeros((len(cells), dim))
    radii = np.zeros(len(cells))
    by_k: dict = {}
    for i, cell in enumerate(cells):
        if cell.lune is not None:
            a0, a1 = cell.lune
            if cell.normals.shape[0] == 0:
                centers[i, 0] = 1.0
                radii[i] = np.pi
            else:
                mid = 0.5 * (a0 + a1)
                centers[i, :2] = np.cos(mid), np.sin(mid)
                radii[i] = min(0.5 * (a1 - a0), 0.5 * np.pi)
            continue
        by_k.setdefault(cell.normals.shape[0], []).append(i)
    for k, idx in by_k.items():
        normals = np.stack([cells[i].normals for i in idx])
        y = _min_norm_in_hull(normals)
        norm = np.linalg.norm(y, axis=1)
        centers[idx] = y / norm[:, None]
        radii[idx] = np.arcsin(np.clip(norm, 0.0, 1.0))
    return centers, radii


# --------------------------------------------------------------------------
# partition
# --------------------------------------------------------------------------

@dataclass
class ConvexPartition:
    """``N`` convex cells of equal measure covering S^d."""

    d: int
    N: int
    cells: list
    frame: Optional[PolytopeFrame] = None
    facet_partitions: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    _incenter_cache: Optional[tuple] = field(default=None, repr=False)

    @property
    def construction(self) -> str:
        return "lune" if self.frame is None else "polytope"

    @property
    def parity(self) -> str:
        return "even" if self.N % 2 == 0 else "odd"

    def incenters(self) -> tuple[np.ndarray, np.ndarray]:
        if self._incenter_cache is None:
            self._incenter_cache = _incenters(self.cells)
        return self._incenter_cache

    @property
    def norm_estimate(self) -> float:
        return partition_norm(self)

    def locate(self, x) -> np.ndarray:
        """Index of the cell holding each point; boundary ties go to the lower index."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.frame is None:
            ang = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * np.pi)
            return np.minimum((ang / (2 * np.pi / self.N)).astype(int), self.N - 1)
        facet, tau = self.frame.sphere_to_chart(x)
        out = np.empty(x.shape[0], dtype=int)
        offset = 0
        for f, rp in enumerate(self.facet_partitions):
            sel = facet == f
            if np.any(sel):
                out[sel] = offset + rp.locate(tau[sel])
            offset += rp.N
        return out

    def cell_normals(self) -> np.ndarray:
        return np.stack([c.normals for c in self.cells])

    def to_dict(self, with_constants: bool = True) -> dict:
        data = {
            "schema_version": SCHEMA_VERSION,
            "d": self.d,
            "N": self.N,
            "parity": self.parity,
            "construction": self.construction,
            "lambda": None if self.frame is None else self.frame.lam,
            "mu": None if self.frame is None else self.frame.mu,
            "facets": [],
            "metadata": self.metadata,
        }
        if self.frame is not None:
            for f, rp in enumerate(self.facet_partitions):
                data["facets"].append({
                    "index": f + 1,
                    "count": rp.N,
                    "mass": float(self.frame.facet_masses[f]),
                    "boxes": [p.to_dict() for p in rp.pieces],
                    "tree": rp.tree.to_dict() if rp.tree is not None else None,
                })
        if with_constants:
            data["K_emp"] = partition_norm(self) * self.N ** (1.0 / self.d)
            data["b_emp"] = float(self.incenters()[1].min()) * self.N ** (1.0 / self.d)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ConvexPartition":
        d, N = int(data["d"]), int(data["N"])
        if data.get("construction", "polytope") == "lune":
            return _lune_partition(d, N)
        facets = sorted(data["facets"], key=lambda f: f["index"])
        counts = tuple(int(f["count"]) for f in facets)
        meta = data.get("metadata", {})
        frame = PolytopeFrame(d, N, float(data["lambda"]), float(data["mu"]), counts,
                              bool(meta.get("in_nominal_bracket", True)),
                              bool(meta.get("fallback", False)))
        cells, parts = [], []
        for f, fd in enumerate(facets):
            boxes = [Rect.from_dict(b) for b in fd["boxes"]]
            rp = RectPartition.from_dict({
                "parent": Rect.cube(d).to_dict(),
                "pieces": fd["boxes"],
                "measures": [1.0 / N] * len(boxes),
                "tree": fd.get("tree"),
            })
            parts.append(rp)
            for box in boxes:
                cells.append(Cell(len(cells), _box_normals(frame, f, box), f, box, frame,
                                  measure=1.0 / N))
        return cls(d, N, cells, frame, parts, dict(meta))


def _lune_partition(d: int, N: int) -> ConvexPartition:
    step = 2 * np.pi / N
    cells = [Cell(i, _lune_normals(d, i * step, (i + 1) * step), lune=(i * step, (i + 1) * step),
                  measure=1.0 / N) for i in range(N)]
    return ConvexPartition(d, N, cells, None, [], {"fallback": True, "construction": "lune"})


def _validate_facet_masses(frame: PolytopeFrame, masses: np.ndarray, samples: int,
                           seed: int) -> dict:
    pts = geom.mc_sphere_sample(frame.d, samples, seed)
    facet, _ = frame.sphere_to_chart(pts)
    freq = np.bincount(facet, minlength=2 * frame.d + 2) / samples
    rel = np.abs(freq - masses) / masses
    return {"samples": samples, "seed": seed, "max_rel_error": float(rel.max()),
            "passed": bool(np.all(rel <= 0.02))}


def build_partition(d: int, N: int, validate: bool = True, seed: int = 0,
                    validation_samples: int = 400_000,
                    equal_facets: bool = False) -> ConvexPartition:
    """Convex area-regular partition of S^d into ``N`` cells.

    ``N <= 2d + 1`` cannot give every facet a cell; those counts use equal
    lunes around the ``(x_0, x_1)`` plane (``N = 1`` is the whole sphere).
    With ``equal_facets`` and ``N`` divisible by ``2d + 2`` the frame is the
    cube itself with ``N / (2d + 2)`` cells on every facet.
    """
    if d < 2:
        raise ValueError("build_partition needs d >= 2")
    if N < 1:
        raise ValueError("N must be >= 1")
    if facet_counts(d, N) is None:
        return _lune_partition(d, N)
    if equal_facets and N % (2 * d + 2) == 0:
        lam0 = 1.0 / math.sqrt(d + 1)
        frame = PolytopeFrame(d, N, lam0, lam0, (N // (2 * d + 2),) * (2 * d + 2))
    elif N % 2 == 0:
        frame = solve_lambda_even(d, N)
    else:
        frame = solve_lambda_mu_odd(d, N)
    meta = {"in_nominal_bracket": frame.in_nominal_bracket, "fallback": frame.fallback,
            "counts": list(frame.counts)}
    if not frame.in_nominal_bracket:
        log.info("d=%d N=%d: lambda/mu outside the standard bracket", d, N)
    cells, parts, masses, unif = [], [], [], []
    for f, count in enumerate(frame.counts):
        meas = facet_density(frame, f)
        dom = Rect.cube(d)
        masses.append(meas.mass(dom))
        unif.append(meas.uniformity_bound)
        rp = partition_rect(dom, meas, count)
        parts.append(rp)
        for box, m in zip(rp.pieces, rp.measures):
            cells.append(Cell(len(cells), _box_normals(frame, f, box), f, box, frame, measure=m))
    masses = np.array(masses)
    meta["facet_mass_error"] = float(np.abs(masses - frame.facet_masses).max())
    meta["uniformity"] = [float(u) for u in unif]
    if validate:
        check = _validate_facet_masses(frame, masses, validation_samples, seed)
        meta["density_check"] = check
        if not check["passed"]:
            log.warning("facet density MC check failed: %s", check)
    return ConvexPartition(d, N, cells, frame, parts, meta)


def partition_norm(partition: ConvexPartition) -> float:
    """Largest cell diameter.

    Chart cells are radial images of convex polytopes whose vertices are the
    images of the box corners, so the corner distances give the exact value.
    """
    if partition.frame is None:
        return float(np.pi)
    best = 0.0
    corners_all = [c.corners() for c in partition.cells]
    for c in corners_all:
        best = max(best, float(geom.pairwise_distances(c).max()))
    return best
