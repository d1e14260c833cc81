"""Equal-measure partitions of boxes into axis-parallel sub-boxes.

The recursion slices the last free axis into ``k = floor(N^{1/l})`` slabs
carrying ``s`` or ``s + 1`` shares of the mass and then recurses into each
slab with one axis fewer, so every piece ends up with exactly ``1/N`` of the
total mass and a diameter of order ``N^{-1/m}`` for M-uniform densities.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq

log = logging.getLogger(__name__)

__all__ = [
    "DensityMeasure",
    "Rect",
    "RectPartition",
    "gauss_box",
    "marginal_density",
    "measure_1d_cut",
    "partition_rect",
    "split_counts",
]

MASS_RTOL = 1e-12


@dataclass(frozen=True)
class Rect:
    """Closed axis-parallel box ``[lower_0, upper_0] x ... x [lower_{m-1}, upper_{m-1}]``."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or not lo:
            raise ValueError("lower/upper must be non-empty and of equal length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"degenerate box: {lo} / {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, m: int, half_width: float = 1.0) -> "Rect":
        return cls((-half_width,) * m, (half_width,) * m)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def corners(self) -> np.ndarray:
        m = self.dim
        bits = (np.arange(2**m)[:, None] >> np.arange(m)) & 1
        return np.where(bits == 1, self.hi, self.lo)

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=-1)

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper)}

    @classmethod
    def from_dict(cls, data: dict) -> "Rect":
        return cls(tuple(data["lower"]), tuple(data["upper"]))


_GAUSS_CACHE: dict = {}


def _gauss(n: int):
    if n not in _GAUSS_CACHE:
        _GAUSS_CACHE[n] = leggauss(n)
    return _GAUSS_CACHE[n]


def gauss_box(f: Callable, lower, upper, n: int) -> float:
    """Tensor-product Gauss-Legendre rule with ``n`` nodes per axis."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    m = lower.shape[0]
    x, w = _gauss(n)
    half = 0.5 * (upper - lower)
    mid = 0.5 * (upper + lower)
    grids = np.meshgrid(*[mid[j] + half[j] * x for j in range(m)], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = w
    for _ in range(m - 1):
        wts = np.multiply.outer(wts, w)
    vals = np.asarray(f(pts), dtype=float)
    return float(np.dot(wts.ravel(), vals) * np.prod(half))


def _adaptive_gauss(f, lower, upper, atol, n, depth=0) -> float:
    coarse = gauss_box(f, lower, upper, n)
    fine = gauss_box(f, lower, upper, n + 8)
    if abs(coarse - fine) <= atol or depth >= 10:
        return fine
    j = int(np.argmax(upper - lower))
    mid = 0.5 * (lower[j] + upper[j])
    up_left = upper.copy()
    up_left[j] = mid
    lo_right = lower.copy()
    lo_right[j] = mid
    return (_adaptive_gauss(f, lower, up_left, 0.5 * atol, n, depth + 1)
            + _adaptive_gauss(f, lo_right, upper, 0.5 * atol, n, depth + 1))


class DensityMeasure:
    """Absolutely continuous measure ``alpha(x) dx`` on an m-dimensional box.

    ``density`` maps an ``(n, m)`` array to ``n`` values.  ``box_mass``, when
    given, returns the exact mass of ``[lower, upper]`` and replaces the
    adaptive Gauss cubature used otherwise.
    """

    def __init__(
        self,
        dim: int,
        density: Callable[[np.ndarray], np.ndarray],
        domain: Optional[Rect] = None,
        uniformity_bound: Optional[float] = None,
        box_mass: Optional[Callable[[np.ndarray, np.ndarray], float]] = None,
        quad_order: int = 12,
        strictly_positive: bool = True,
    ):
        self.dim = dim
        self.density = density
        self.domain = domain
        self.uniformity_bound = uniformity_bound
        self._box_mass = box_mass
        self.quad_order = quad_order
        self.strictly_positive = strictly_positive

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.asarray(self.density(x), dtype=float)

    def mass(self, lower, upper=None) -> float:
        if isinstance(lower, Rect):
            lower, upper = lower.lo, lower.hi
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if np.any(upper <= lower):
            return 0.0
        if self._box_mass is not None:
            return float(self._box_mass(lower, upper))
        scale = abs(gauss_box(self.density, lower, upper, self.quad_order))
        return _adaptive_gauss(self.density, lower, upper, MASS_RTOL * max(scale, 1e-300),
                               self.quad_order)

    def estimate_uniformity(self, rect: Optional[Rect] = None, samples: int = 4096,
                            seed: int = 0) -> float:
        """Sampled lower estimate of M = sup alpha / inf alpha."""
        rect = rect or self.domain
        if rect is None:
            raise ValueError("no domain to sample")
        rng = np.random.default_rng(seed)
        pts = rect.lo + rng.random((samples, self.dim)) * (rect.hi - rect.lo)
        pts = np.vstack([pts, rect.corners(), rect.center[None, :]])
        vals = self(pts)
        return float(vals.max() / vals.min())


def split_counts(N: int, l: int) -> tuple[int, int, int]:
    """``k = floor(N^{1/l})``, ``s = floor(N/k)``, ``r = N - k s``."""
    if N < 1 or l < 1:
        raise ValueError("need N >= 1 and l >= 1")
    k = max(1, int(round(N ** (1.0 / l))))
    while k**l > N:
        k -= 1
    while (k + 1) ** l <= N:
        k += 1
    s = N // k
    return k, s, N - k * s


def _cut(mass_upto: Callable[[float], float], lo: float, hi: float, target: float,
         total: float, smallest: bool) -> float:
    """Point ``c`` in ``[lo, hi]`` with ``mass_upto(c) = target``."""
    if target <= 0.0:
        return lo
    if target > total * (1.0 + 1e-12):
        raise ValueError(f"target mass {target} exceeds available mass {total}")
    if target >= total:
        return hi
    xtol = 4e-16 * max(1.0, abs(lo), abs(hi))
    if not smallest:
        return brentq(lambda c: mass_upto(c) - target, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps,
                      maxiter=200)
    a, b = lo, hi
    while b - a > xtol:
        mid = 0.5 * (a + b)
        if mass_upto(mid) >= target:
            b = mid
        else:
            a = mid
    return b


def measure_1d_cut(measure: DensityMeasure, interval, target_mass: float) -> float:
    """Cut point ``c`` of ``interval = (low, high)`` with mass of ``[low, c]`` equal to ``target_mass``."""
    lo, hi = float(interval[0]), float(interval[1])
    total = measure.mass([lo], [hi])
    return _cut(lambda c: measure.mass([lo], [c]), lo, hi, target_mass, total,
                smallest=not measure.strictly_positive)


def marginal_density(measure: DensityMeasure, rect: Rect, slab, axis: Optional[int] = None,
                     nodes: int = 24) -> DensityMeasure:
    """Integrate ``measure`` over ``slab`` along ``axis`` (default: last axis).

    The returned measure lives on ``rect`` with ``axis`` removed; its exact box
    masses are masses of the parent on ``box x slab``.
    """
    m = rect.dim
    axis = m - 1 if axis is None else axis
    t0, t1 = float(slab[0]), float(slab[1])
    if not t1 > t0:
        raise ValueError("empty slab")
    if t0 < rect.lower[axis] - 1e-12 or t1 > rect.upper[axis] + 1e-12:
        raise ValueError("slab outside the box along the chosen axis")
    if m == 1:
        raise ValueError("cannot marginalise a one-dimensional measure")
    x, w = _gauss(nodes)
    tq = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * x
    wq = 0.5 * (t1 - t0) * w

    def density(pts):
        pts = np.atleast_2d(pts)
        n = pts.shape[0]
        full = np.insert(np.repeat(pts, nodes, axis=0), axis, np.tile(tq, n), axis=1)
        vals = measure(full).reshape(n, nodes)
        return vals @ wq

    def box_mass(lo, hi):
        return measure.mass(np.insert(lo, axis, t0), np.insert(hi, axis, t1))

    keep = [j for j in range(m) if j != axis]
    sub = Rect(tuple(rect.lower[j] for j in keep), tuple(rect.upper[j] for j in keep))
    M = measure.uniformity_bound
    return DensityMeasure(m - 1, density, domain=sub,
                          uniformity_bound=None if M is None else 2.0 * M * M,
                          box_mass=box_mass, strictly_positive=measure.strictly_positive)


@dataclass
class _Node:
    axis: int
    edges: np.ndarray
    children: list  # _Node or int piece index

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "edges": [float(e) for e in self.edges],
            "children": [c.to_dict() if isinstance(c, _Node) else int(c) for c in self.children],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "_Node":
        kids = [c if isinstance(c, int) else cls.from_dict(c) for c in data["children"]]
        return cls(int(data["axis"]), np.array(data["edges"], dtype=float), kids)


@dataclass
class RectPartition:
    """``N`` closed boxes tiling ``parent`` with their measures."""

    parent: Rect
    pieces: list
    measures: np.ndarray
    tree: Optional[_Node] = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return len(self.pieces)

    def locate(self, x) -> np.ndarray:
        """Index of the piece holding each row of ``x``; shared facets go to the smaller index.

        Points outside the parent are clamped onto it.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        x = np.clip(x, self.parent.lo, self.parent.hi)
        out = np.full(x.shape[0], -1, dtype=int)
        if self.tree is None:
            for idx in range(self.N - 1, -1, -1):
                out[self.pieces[idx].contains(x)] = idx
            return out
        self._descend(self.tree, x, np.arange(x.shape[0]), out)
        return out

    def _descend(self, node, x, rows, out):
        if isinstance(node, int):
            out[rows] = node
            return
        slot = np.searchsorted(node.edges[1:-1], x[rows, node.axis], side="left")
        for j, child in enumerate(node.children):
            sel = rows[slot == j]
            if sel.size:
                self._descend(child, x, sel, out)

    def to_dict(self) -> dict:
        data = {
            "parent": self.parent.to_dict(),
            "pieces": [p.to_dict() for p in self.pieces],
            "measures": [float(v) for v in self.measures],
        }
        if self.tree is not None:
            data["tree"] = self.tree.to_dict() if isinstance(self.tree, _Node) else self.tree
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RectPartition":
        tree = data.get("tree")
        if isinstance(tree, dict):
            tree = _Node.from_dict(tree)
        return cls(Rect.from_dict(data["parent"]), [Rect.from_dict(p) for p in data["pieces"]],
                   np.array(data["measures"], dtype=float), tree)


def _split_box(measure: DensityMeasure, lo: np.ndarray, hi: np.ndarray, free: int, N: int,
               pieces: list):
    """Partition box ``[lo, hi]`` by cutting axes ``free-1, ..., 0``.

    Axes ``>= free`` are already fixed to a slab, so masses of sub-boxes are
    exactly the marginal masses of the lower-dimensional problem.
    """
    if N == 1:
        pieces.append((lo.copy(), hi.copy()))
        return len(pieces) - 1
    axis = free - 1
    total = measure.mass(lo, hi)
    if free == 1:
        counts = [1] * N
    else:
        k, s, r = split_counts(N, free)
        counts = [s + 1] * r + [s] * (k - r)

    def mass_upto(c):
        h = hi.copy()
        h[axis] = c
        return measure.mass(lo, h)

    edges = [lo[axis]]
    acc = 0
    for cnt in counts[:-1]:
        acc += cnt
        edges.append(_cut(mass_upto, edges[-1], hi[axis], total * acc / N, total,
                          smallest=not measure.strictly_positive))
    edges.append(hi[axis])
    children = []
    for j, cnt in enumerate(counts):
        slo, shi = lo.copy(), hi.copy()
        slo[axis], shi[axis] = edges[j], edges[j + 1]
        if free == 1:
            pieces.append((slo, shi))
            children.append(len(pieces) - 1)
        else:
            children.append(_split_box(measure, slo, shi, free - 1, cnt, pieces))
    return _Node(axis, np.array(edges), children)


def partition_rect(rect: Rect, measure: DensityMeasure, N: int) -> RectPartition:
    """Split ``rect`` into ``N`` axis-parallel boxes of equal ``measure``-mass."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if measure.dim != rect.dim:
        raise ValueError("measure and box dimensions differ")
    raw: list = []
    tree = _split_box(measure, rect.lo, rect.hi, rect.dim, N, raw)
    if isinstance(tree, int):
        tree = None
    pieces = []
    for lo, hi in raw:
        # zero-width slabs only arise from failed integration
        if np.any(hi <= lo):
            raise ArithmeticError("cut search produced an empty piece; density not integrable?")
        pieces.append(Rect(tuple(lo), tuple(hi)))
    masses = np.array([measure.mass(p) for p in pieces])
    return RectPartition(rect, pieces, masses, tree)
