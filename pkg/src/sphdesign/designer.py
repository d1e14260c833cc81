"""Point maps from polynomials to anchored configurations, and design solvers.

Each partition cell ``R_i`` carries an anchor ``x_i`` (its incenter) with
inradius ``r_i``.  A polynomial ``P`` moves every anchor along the geodesic
toward the cell point maximising ``(x, grad P(x_i))``; the design solvers
search for configurations whose normalised kernel sum vanishes while each
point stays at depth ``(delta/2) sin r_i`` inside its cell.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .geom import pairwise_distances, slerp_many, tangent_basis
from .harmonics import (
    HarmonicSpace,
    Poly,
    basis_values,
    grad_l1_norm,
    kernel,
    kernel_derivative,
    kernel_feature_gradients,
    kernel_features,
    spherical_gradient,
)
from .partition import Cell, ConvexPartition, project_to_cone

__all__ = [
    "AnchoredConfiguration",
    "DesignerConfig",
    "anchor_configuration",
    "argmax_on_cell",
    "design_residual",
    "g_eps",
    "map_point",
    "map_points",
    "pairing",
    "residual_gradient",
    "solve_fixed_point",
    "solve_positions",
]

log = logging.getLogger(__name__)

DEPTH_SLACK = 1e-12


@dataclass(frozen=True)
class DesignerConfig:
    """Map and solver knobs.  ``epsilon``, ``delta`` and ``eta`` are empirical defaults."""

    epsilon: float = 0.1
    delta: float = 0.3
    eta: float = 0.02
    tol_residual: float = 1e-9
    max_iters: int = 2000
    seed: int = 0
    armijo_c: float = 1e-4
    max_halvings: int = 30

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AnchoredConfiguration:
    """A partition, its incenter anchors and a current point per cell."""

    partition: ConvexPartition
    anchors: np.ndarray
    radii: np.ndarray
    points: np.ndarray

    @property
    def N(self) -> int:
        return self.partition.N

    def depth_targets(self, delta: float) -> np.ndarray:
        return 0.5 * delta * np.sin(self.radii)

    def depths(self, points: np.ndarray | None = None) -> np.ndarray:
        pts = self.points if points is None else points
        return _cell_depths(self.partition, pts)

    def depth_violations(self, delta: float) -> int:
        return int(np.sum(self.depths() < self.depth_targets(delta) - 1e-10))

    def with_points(self, points: np.ndarray) -> "AnchoredConfiguration":
        return replace(self, points=np.array(points, dtype=float))


def anchor_configuration(partition: ConvexPartition) -> AnchoredConfiguration:
    """Start configuration: every point at its cell's incenter."""
    centers, radii = partition.incenters()
    return AnchoredConfiguration(partition, centers.copy(), radii.copy(), centers.copy())


def _stacked_normals(partition: ConvexPartition) -> np.ndarray | None:
    ks = {c.normals.shape[0] for c in partition.cells}
    if len(ks) != 1:
        return None
    return partition.cell_normals()


def _cell_depths(partition: ConvexPartition, points: np.ndarray) -> np.ndarray:
    """Depth of point ``i`` inside cell ``i``."""
    normals = _stacked_normals(partition)
    if normals is not None and normals.shape[1] > 0:
        s = np.einsum("nkd,nd->nk", normals, points)
        return np.arcsin(np.clip(s, -1.0, 1.0)).min(axis=1)
    return np.array([c.depth(p)[0] for c, p in zip(partition.cells, points)])


# --------------------------------------------------------------------------
# maps
# --------------------------------------------------------------------------

def g_eps(config: DesignerConfig, v):
    """Clamp ``min(v / epsilon, 1)``."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("g_eps is defined for v >= 0")
    out = np.minimum(v / config.epsilon, 1.0)
    return float(out) if out.ndim == 0 else out


def _cell_vertices(cell: Cell) -> np.ndarray:
    if cell.box is not None:
        return cell.corners()
    d1 = cell.dim
    out = [np.eye(d1)[k] * s for k in range(2, d1) for s in (1.0, -1.0)]
    if cell.lune is not None and cell.normals.shape[0]:
        for a in cell.lune:
            v = np.zeros(d1)
            v[:2] = np.cos(a), np.sin(a)
            out.append(v)
    return np.array(out)


def _argmax_batch(cells: list, normals: np.ndarray, y: np.ndarray) -> np.ndarray:
    z = project_to_cone(normals, y)
    zn = np.linalg.norm(z, axis=1)
    yn = np.linalg.norm(y, axis=1)
    out = z / np.where(zn > 0, zn, 1.0)[:, None]
    # y in the polar cone: the functional is quasi-convex on the cell and
    # peaks at a vertex.
    for i in np.nonzero(zn <= 1e-12 * yn)[0]:
        V = _cell_vertices(cells[i])
        out[i] = V[np.argmax(V @ y[i])]
    return out


def argmax_on_cell(cell: Cell, y) -> np.ndarray:
    """Unique maximiser of ``x -> (x, y)`` over the cell.

    The cell is the trace of a convex cone ``K`` on the sphere; by Moreau's
    decomposition the maximiser is ``proj_K(y) / |proj_K(y)|`` whenever the
    projection is nonzero, which holds for any ``y`` tangent at an interior
    point.
    """
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        raise ValueError("direction must be nonzero; use the anchor for a zero gradient")
    return _argmax_batch([cell], cell.normals[None], y[None])[0]


def _argmax_all(partition: ConvexPartition, Y: np.ndarray) -> np.ndarray:
    normals = _stacked_normals(partition)
    if normals is not None:
        return _argmax_batch(partition.cells, normals, Y)
    return np.array([argmax_on_cell(c, y) for c, y in zip(partition.cells, Y)])


def map_points(config: DesignerConfig, anchored: AnchoredConfiguration, P: Poly) -> np.ndarray:
    """All ``x_i(P)``: geodesic from ``x_i`` toward ``z_i`` at fraction ``(1-delta) g_eps(|grad P(x_i)|)``."""
    anchors = anchored.anchors
    grads = spherical_gradient(P, anchors)
    gn = np.linalg.norm(grads, axis=1)
    z = anchors.copy()
    moving = gn > 0
    if np.any(moving):
        z_all = _argmax_all(anchored.partition, np.where(moving[:, None], grads, anchors))
        z[moving] = z_all[moving]
    h = (1.0 - config.delta) * g_eps(config, gn)
    return slerp_many(anchors, z, h)


def map_point(config: DesignerConfig, cell: Cell, anchor, P: Poly) -> np.ndarray:
    """Single-cell version of :func:`map_points`."""
    anchor = np.asarray(anchor, dtype=float)
    grad = spherical_gradient(P, anchor)
    gn = float(np.linalg.norm(grad))
    if gn == 0.0:
        return anchor.copy()
    z = argmax_on_cell(cell, grad)
    return slerp_many(anchor, z, (1.0 - config.delta) * g_eps(config, gn))


def pairing(config: DesignerConfig, anchored: AnchoredConfiguration, P: Poly) -> float:
    """``(1/N) sum_i P(x_i(P))``."""
    pts = map_points(config, anchored, P)
    return float(np.mean(basis_values(P.space.t, pts) @ P.coeffs))


# --------------------------------------------------------------------------
# residual
# --------------------------------------------------------------------------

def design_residual(space: HarmonicSpace, points, method: str = "features") -> tuple[float, list]:
    """Norm of ``(1/N) sum G_{x_i}`` and its squared per-degree parts.

    ``method="features"`` sums exact kernel features and takes a vector norm,
    which keeps full relative precision near zero; ``method="double-sum"``
    evaluates ``(1/N^2) sum_ij Z_k(x_i . x_j)`` directly.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    N = pts.shape[0]
    if space.t == 0:
        return 0.0, []
    if method == "features":
        F = kernel_features(space, pts, per_degree=True)
        per = [float(v) for v in np.sum(F.sum(axis=1) ** 2, axis=1) / N**2]
    elif method == "double-sum":
        G = np.clip(pts @ pts.T, -1.0, 1.0)
        Z = kernel(space, G).per_degree
        per = [max(float(v), 0.0) for v in Z.sum(axis=(1, 2)) / N**2]
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(np.sqrt(sum(per))), per


def residual_gradient(space: HarmonicSpace, points) -> np.ndarray:
    """Tangential gradient of ``r^2`` in each point: ``(2/N^2) sum_j K'(x_i.x_j) p_{x_i}(x_j)``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    N = pts.shape[0]
    C = np.clip(pts @ pts.T, -1.0, 1.0)
    Kp = kernel_derivative(space, C)
    amb = Kp @ pts
    tang = amb - np.sum(amb * pts, axis=1, keepdims=True) * pts
    return 2.0 * tang / N**2


def _residual_vector(space: HarmonicSpace, pts: np.ndarray) -> np.ndarray:
    return kernel_features(space, pts).mean(axis=0)


def _jacobian(space: HarmonicSpace, pts: np.ndarray, T: np.ndarray) -> np.ndarray:
    """``d e / d u`` for tangent coordinates ``u_i`` (``x_i + T_i u_i``), shape ``(Q, N*d)``."""
    N = pts.shape[0]
    D = kernel_feature_gradients(space, pts)          # (N, Q, d+1)
    J = np.einsum("nqa,nab->qnb", D, T) / N           # (Q, N, d)
    return J.reshape(J.shape[0], -1)


def _retract(pts: np.ndarray, T: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Exponential map at each point along tangent step ``T_i u_i``."""
    v = np.einsum("nab,nb->na", T, u)
    vn = np.linalg.norm(v, axis=1, keepdims=True)
    safe = np.where(vn > 0, vn, 1.0)
    out = np.cos(vn) * pts + np.sin(vn) * v / safe
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def _clip_to_shrunk(anchored: AnchoredConfiguration, prev: np.ndarray, cand: np.ndarray,
                    target: np.ndarray) -> np.ndarray:
    """Pull infeasible candidates back along the geodesic toward ``prev``."""
    depth = _cell_depths(anchored.partition, cand)
    bad = depth < target + DEPTH_SLACK
    if not np.any(bad):
        return cand
    out = cand.copy()
    a, b = prev[bad], cand[bad]
    tgt = target[bad] + DEPTH_SLACK
    sub = _SubPartition(anchored.partition, np.nonzero(bad)[0])
    lo = np.zeros(a.shape[0])
    hi = np.ones(a.shape[0])
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        ok = _cell_depths(sub, slerp_many(a, b, mid)) >= tgt
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    out[bad] = slerp_many(a, b, lo)
    return out


class _SubPartition:
    """Cell subset view accepted by :func:`_cell_depths`."""

    def __init__(self, partition: ConvexPartition, idx: np.ndarray):
        self.cells = [partition.cells[i] for i in idx]

    def cell_normals(self) -> np.ndarray:
        return np.stack([c.normals for c in self.cells])


def _min_separation(points: np.ndarray) -> float:
    if points.shape[0] < 2:
        return float("nan")
    D = pairwise_distances(points)
    np.fill_diagonal(D, np.inf)
    return float(D.min())


def _report(space, anchored, config, traj, iterations, status, extra=None) -> dict:
    total, per = design_residual(space, anchored.points)
    rep = {
        "residual_trajectory": [float(r) for r in traj],
        "final_residual": total,
        "per_degree": per,
        "min_separation": _min_separation(anchored.points),
        "depth_violations": anchored.depth_violations(config.delta),
        "iterations": int(iterations),
        "converged": bool(total <= config.tol_residual),
        "status": status,
        "config": config.to_dict(),
    }
    if extra:
        rep.update(extra)
    return rep


def solve_positions(space: HarmonicSpace, anchored: AnchoredConfiguration,
                    config: DesignerConfig = DesignerConfig()) -> tuple[AnchoredConfiguration, dict]:
    """Damped Gauss-Newton on ``r^2`` with points confined to their shrunk cells.

    Each iteration takes the minimum-norm least-squares step of the linearised
    residual in tangent coordinates, backtracks (Armijo, halving) after
    retraction and clipping, and stops once ``r <= tol_residual``.
    """
    if space.d != anchored.partition.d:
        raise ValueError("space and partition dimensions differ")
    N, d = anchored.N, space.d
    if N * d < space.total_dim:
        warnings.warn(f"under-determined: N*d = {N * d} < dim P_t = {space.total_dim}",
                      RuntimeWarning, stacklevel=2)
    target = anchored.depth_targets(config.delta)
    pts = _clip_to_shrunk(anchored, anchored.anchors, anchored.points.copy(), target)
    e = _residual_vector(space, pts)
    f = float(e @ e)
    traj = [np.sqrt(f)]
    status = "max_iters"
    it = 0
    while True:
        if np.sqrt(f) <= config.tol_residual:
            status = "converged"
            break
        if it >= config.max_iters:
            break
        T = tangent_basis(pts)
        J = _jacobian(space, pts, T)
        step = np.linalg.lstsq(J, -e, rcond=None)[0]
        slope = 2.0 * float(e @ (J @ step))
        if slope >= 0:
            step = -J.T @ e
            slope = -2.0 * float(step @ step)
        tau = 1.0
        accepted = False
        for _ in range(config.max_halvings + 1):
            cand = _retract(pts, T, tau * step.reshape(N, d))
            cand = _clip_to_shrunk(anchored, pts, cand, target)
            e_new = _residual_vector(space, cand)
            f_new = float(e_new @ e_new)
            if f_new <= f + config.armijo_c * tau * slope:
                accepted = True
                break
            tau *= 0.5
        it += 1
        if not accepted:
            status = "stalled"
            break
        pts, e, f = cand, e_new, f_new
        traj.append(np.sqrt(f))
    out = anchored.with_points(pts)
    return out, _report(space, out, config, traj, it, status)


def solve_fixed_point(space: HarmonicSpace, anchored: AnchoredConfiguration,
                      config: DesignerConfig = DesignerConfig(),
                      P0: Poly | None = None) -> tuple[Poly, AnchoredConfiguration, dict]:
    """Iterate ``P <- P - tau f(P)/N`` with ``f(P) = sum_i G_{x_i(P)}``.

    A step is accepted when the residual of the mapped points drops and
    ``P`` stays inside ``{int |grad P| < 1}``; otherwise ``tau`` is halved.
    Experimental: nothing guarantees convergence of this dynamic.
    """
    space.require_explicit()
    P = Poly(space) if P0 is None else P0

    def evaluate(Q: Poly):
        pts = map_points(config, anchored, Q)
        e = basis_values(space.t, pts).mean(axis=0)
        return pts, e

    pts, e = evaluate(P)
    r = float(np.linalg.norm(e))
    traj = [r]
    tau = 1.0
    status = "max_iters"
    it = 0
    while True:
        if r <= config.tol_residual:
            status = "converged"
            break
        if it >= config.max_iters:
            break
        accepted = False
        for _ in range(config.max_halvings + 1):
            Q = Poly(space, P.coeffs - tau * e)
            if grad_l1_norm(Q) < 1.0:
                q_pts, q_e = evaluate(Q)
                q_r = float(np.linalg.norm(q_e))
                if q_r < r:
                    accepted = True
                    break
            tau *= 0.5
        it += 1
        if not accepted:
            status = "stalled"
            break
        P, pts, e, r = Q, q_pts, q_e, q_r
        traj.append(r)
        tau = min(2.0 * tau, 1.0)
    out = anchored.with_points(pts)
    return P, out, _report(space, out, config, traj, it, status,
                           {"grad_l1_norm": grad_l1_norm(P), "poly": P.to_dict()})
