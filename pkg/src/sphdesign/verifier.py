"""Certificates for designs and partitions.

Constant-free identities (design residual, equal areas, convexity) produce
pass/fail verdicts.  Inequalities whose constants are not explicit
(Marcinkiewicz-Zygmund ratios, separation and diameter constants) are
reported as measured numbers only.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from math import comb

import numpy as np

from .designer import design_residual
from .geom import fibonacci_sphere, mc_sphere_sample, pairwise_distances, slerp_many
from .harmonics import HarmonicSpace, Poly, grad_l1_norm, integrate_abs, kernel, spherical_gradient
from .partition import Cell, ConvexPartition, _box_normals, partition_norm
from .rectpart import Rect

__all__ = [
    "DesignReport",
    "MZReport",
    "PartitionReport",
    "SCHEMA_VERSION",
    "corrupt_partition",
    "csv_summary",
    "faraday_potential",
    "lower_bound",
    "mz_check",
    "verify_design",
    "verify_partition",
]

SCHEMA_VERSION = 1
CSV_COLUMNS = ["d", "t", "N", "residual", "min_sep", "min_sep_scaled", "K_emp", "b_emp",
               "ratio_abs", "ratio_grad"]


def lower_bound(d: int, t: int) -> int:
    """Minimal size of a t-design on S^d forced by the dimension count.

    ``t = 2k``: ``C(d+k, d) + C(d+k-1, d)``; ``t = 2k+1``: ``2 C(d+k, d)``.
    ``t = 0`` returns 1 by convention.
    """
    if d < 1 or t < 0:
        raise ValueError("need d >= 1 and t >= 0")
    if t == 0:
        return 1
    k, odd = divmod(t, 2)
    if odd:
        return 2 * comb(d + k, d)
    return comb(d + k, d) + comb(d + k - 1, d)


# --------------------------------------------------------------------------
# designs
# --------------------------------------------------------------------------

@dataclass
class DesignReport:
    d: int
    t: int
    N: int
    tolerance: float
    residual_total: float
    residual_per_degree: list
    is_design: bool
    min_separation: float
    separation_scaled: float
    crosscheck_max: float = 0.0
    crosscheck_bound: float = 0.0
    crosscheck_pass: bool = True
    lower_bound: int = 0

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **_jsonable(asdict(self))}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _min_sep(points: np.ndarray) -> float:
    if points.shape[0] < 2:
        return float("nan")
    D = pairwise_distances(points)
    np.fill_diagonal(D, np.inf)
    return float(D.min())


def verify_design(space: HarmonicSpace, points, tolerance: float = 1e-9, seed: int = 0,
                  n_random: int = 20) -> DesignReport:
    """Residual verdict plus an independent check on random kernel slices.

    For ``y`` uniform, ``|(1/N) sum_i G_y(x_i)| <= r sqrt(K_t(1))`` by
    Cauchy-Schwarz, so a design passes the slice test at the same tolerance.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != space.d + 1:
        raise ValueError("points do not live on S^d for this space")
    N = pts.shape[0]
    total, per = design_residual(space, pts)
    ys = mc_sphere_sample(space.d, n_random, seed)
    means = kernel(space, np.clip(ys @ pts.T, -1.0, 1.0)).total.mean(axis=1)
    k1 = float(kernel(space, 1.0).total) if space.t else 0.0
    bound = tolerance * np.sqrt(k1) * (1 + 1e-9) + 1e-14
    cmax = float(np.abs(means).max()) if space.t else 0.0
    sep = _min_sep(pts)
    return DesignReport(
        d=space.d, t=space.t, N=N, tolerance=tolerance,
        residual_total=total, residual_per_degree=per,
        is_design=bool(total <= tolerance),
        min_separation=sep, separation_scaled=sep * N ** (1.0 / space.d),
        crosscheck_max=cmax, crosscheck_bound=float(bound), crosscheck_pass=bool(cmax <= bound),
        lower_bound=lower_bound(space.d, space.t),
    )


# --------------------------------------------------------------------------
# partitions
# --------------------------------------------------------------------------

@dataclass
class PartitionReport:
    d: int
    N: int
    samples: int
    frequencies: list
    z_scores: list
    max_abs_z: float
    uncovered: int
    equal_area_pass: bool
    convexity_pairs: int
    convexity_failures: int
    norm: float
    norm_scaled: float
    min_inradius_scaled: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = self.equal_area_pass and self.convexity_failures == 0

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **_jsonable(asdict(self))}


def cell_frequencies(partition: ConvexPartition, samples: int, seed: int,
                     chunk: int = 250_000) -> tuple[np.ndarray, int]:
    """Share of uniform samples inside each cell, checked against the cell itself."""
    counts = np.zeros(partition.N, dtype=np.int64)
    uncovered = 0
    rng_seed = seed
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        x = mc_sphere_sample(partition.d, m, rng_seed)
        rng_seed += 1
        idx = partition.locate(x)
        ok = np.zeros(m, dtype=bool)
        for i in np.unique(idx):
            sel = idx == i
            ok[sel] = partition.cells[i].contains(x[sel])
        np.add.at(counts, idx[ok], 1)
        uncovered += int(np.sum(~ok))
        done += m
    return counts / samples, uncovered


def convexity_failures(partition: ConvexPartition, pairs: int, seed: int,
                       tol: float = 1e-9) -> int:
    """Geodesic midpoints of random in-cell pairs that leave the cell."""
    rng = np.random.default_rng(seed)
    bad = 0
    for cell in partition.cells:
        a = cell.sample(pairs, rng)
        b = cell.sample(pairs, rng)
        keep = np.sum(a * b, axis=1) > -1.0 + 1e-9
        mid = slerp_many(a[keep], b[keep], np.full(int(keep.sum()), 0.5))
        bad += int(np.sum(~cell.contains(mid, tol)))
    return bad


def verify_partition(partition: ConvexPartition, samples: int = 1_000_000, seed: int = 0,
                     convexity_pairs: int = 1000, sigmas: float = 4.0) -> PartitionReport:
    """Monte Carlo equal-area test (``sigmas``-sigma per cell) and convexity tally."""
    if samples < 1:
        raise ValueError("samples must be positive")
    freq, uncovered = cell_frequencies(partition, samples, seed)
    p = 1.0 / partition.N
    sigma = np.sqrt(p * (1 - p) / samples) if partition.N > 1 else 1.0
    z = (freq - p) / sigma
    fails = convexity_failures(partition, convexity_pairs, seed + 7919)
    norm = partition_norm(partition)
    scale = partition.N ** (1.0 / partition.d)
    return PartitionReport(
        d=partition.d, N=partition.N, samples=samples,
        frequencies=freq.tolist(), z_scores=z.tolist(), max_abs_z=float(np.abs(z).max()),
        uncovered=uncovered, equal_area_pass=bool(np.all(np.abs(z) <= sigmas)),
        convexity_pairs=convexity_pairs * partition.N, convexity_failures=fails,
        norm=norm, norm_scaled=norm * scale,
        min_inradius_scaled=float(partition.incenters()[1].min()) * scale,
    )


def corrupt_partition(partition: ConvexPartition, index: int = 0,
                      shrink: float = 0.01) -> ConvexPartition:
    """Negative control: copy of ``partition`` with one chart box shrunk about its centre."""
    cell = partition.cells[index]
    if cell.box is None:
        raise ValueError("only chart cells can be corrupted")
    c = np.array(cell.box.center)
    half = 0.5 * (np.array(cell.box.hi) - np.array(cell.box.lo)) * (1.0 - shrink)
    box = Rect(tuple(c - half), tuple(c + half))
    new = Cell(cell.index, _box_normals(cell.frame, cell.facet, box), cell.facet, box, cell.frame,
               measure=float("nan"))
    cells = list(partition.cells)
    cells[index] = new
    return ConvexPartition(partition.d, partition.N, cells, partition.frame,
                           partition.facet_partitions, dict(partition.metadata, corrupted=index))


# --------------------------------------------------------------------------
# Marcinkiewicz-Zygmund
# --------------------------------------------------------------------------

@dataclass
class MZReport:
    degree: int
    N: int
    partition_norm: float
    norm_times_degree: float
    int_abs: float
    int_grad: float
    ratio_abs: float
    ratio_grad: float
    diff_grad: float
    diff_grad_bound: float
    eta: float

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **_jsonable(asdict(self))}


def mz_check(partition: ConvexPartition, xs, ys, P: Poly, eta: float = 0.02) -> MZReport:
    """Sampling ratios of ``|P|`` and ``|grad P|`` on cell representatives.

    ``xs[i]`` and ``ys[i]`` must lie in cell ``i``.  Reports
    ``(1/N) sum |P(x_i)| / int |P|``, the same for ``|grad P|``, and
    ``(1/N) sum |grad P(x_i) - grad P(y_i)|`` next to ``8 d eta int |grad P|``.
    """
    P.space.require_explicit()
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    if xs.shape != (partition.N, partition.d + 1) or ys.shape != xs.shape:
        raise ValueError("need one x and one y per cell")
    for pts, name in ((xs, "x"), (ys, "y")):
        inside = np.array([c.contains(p)[0] for c, p in zip(partition.cells, pts)])
        if not inside.all():
            raise ValueError(f"{name}_i outside cell i for i = {np.nonzero(~inside)[0][:5].tolist()}")
    ia = integrate_abs(P)
    ig = grad_l1_norm(P)
    gx = spherical_gradient(P, xs)
    gy = spherical_gradient(P, ys)
    norm = partition_norm(partition)
    d = partition.d
    return MZReport(
        degree=P.space.t, N=partition.N, partition_norm=norm, norm_times_degree=norm * P.space.t,
        int_abs=ia, int_grad=ig,
        ratio_abs=float(np.mean(np.abs(P(xs)))) / ia,
        ratio_grad=float(np.mean(np.linalg.norm(gx, axis=1))) / ig,
        diff_grad=float(np.mean(np.linalg.norm(gx - gy, axis=1))),
        diff_grad_bound=8 * d * eta * ig, eta=eta,
    )


# --------------------------------------------------------------------------
# Faraday potential
# --------------------------------------------------------------------------

def _potential_dev(points: np.ndarray, x: np.ndarray):
    diff = x[:, None, :] - points[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    u = np.mean(1.0 / dist, axis=1)
    grad = -np.mean(diff / dist[:, :, None] ** 3, axis=1)
    return u - 1.0, grad


def faraday_potential(points, r: float, probe_count: int = 4096, ascent_steps: int = 10,
                      n_refine: int = 16) -> float:
    """``sup_{|x| = r} |(1/N) sum 1/|x - x_i| - 1|`` for unit charges on S^2.

    Maximum over quasi-uniform probes, then a few steps of projected ascent
    from the best ``n_refine`` probes.
    """
    if not 0.0 < r < 1.0:
        raise ValueError("r must lie in (0, 1)")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 3:
        raise ValueError("the potential is defined for points on S^2")
    probes = r * fibonacci_sphere(probe_count)
    val, _ = _potential_dev(pts, probes)
    best = float(np.abs(val).max())
    start = probes[np.argsort(-np.abs(val))[:n_refine]]
    f0 = np.abs(val[np.argsort(-np.abs(val))[:n_refine]])
    step = np.full(len(start), 0.5 * r * np.sqrt(4 * np.pi / probe_count))
    x = start
    for _ in range(ascent_steps):
        v, g = _potential_dev(pts, x)
        g = np.sign(v)[:, None] * g
        g -= np.sum(g * x, axis=1, keepdims=True) * x / r**2
        gn = np.linalg.norm(g, axis=1, keepdims=True)
        trial = x + step[:, None] * g / np.where(gn > 0, gn, 1.0)
        trial *= r / np.linalg.norm(trial, axis=1, keepdims=True)
        vt, _ = _potential_dev(pts, trial)
        up = np.abs(vt) > f0
        x = np.where(up[:, None], trial, x)
        f0 = np.where(up, np.abs(vt), f0)
        step = np.where(up, step * 1.5, step * 0.5)
    return max(best, float(f0.max()))


# --------------------------------------------------------------------------
# CSV summaries
# --------------------------------------------------------------------------

def csv_summary(rows: list[dict]) -> str:
    """Sweep rows as CSV with the fixed column set (missing entries blank)."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in CSV_COLUMNS})
    return buf.getvalue()
