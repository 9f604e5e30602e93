"""Numerical enumeration and classification of critical points on [0, pi)^p.

Every cell of a uniform grid seeds a damped Newton iteration on the gradient
(Hessian by central differences of the gradient).  Converged points are
wrapped into the period box, de-duplicated on the torus and classified by the
signs of their Hessian eigenvalues.  This is only meant for small p.
"""
from dataclasses import dataclass, field
from itertools import product
from typing import List, Optional, Sequence

import numpy as np

from .errors import DegenerateLandscapeError, DimensionError
from .optimize import OptimizerConfig, minimize
from .trig import check_periodicity

HESS_STEP = 1e-4
EIG_TOL = 1e-6
GRAD_TOL = 1e-10
MAX_NEWTON = 60
MAX_STEP = 0.1
MAX_GRID_POINTS = 2 ** 19


class _Batched:
    """Give any loss/gradient pair a batch interface."""

    def __init__(self, problem, p):
        self.problem = problem
        self.p = p
        try:
            native = np.asarray(problem.loss(np.zeros((2, p)))).shape == (2,)
        except Exception:
            native = False
        self.native = native

    def loss(self, th):
        if self.native:
            return np.asarray(self.problem.loss(th))
        return np.array([self.problem.loss(t) for t in th])

    def gradient(self, th):
        if self.native:
            return np.asarray(self.problem.gradient(th)).reshape(-1, self.p)
        return np.array([self.problem.gradient(t) for t in th])


def fd_hessian(problem, theta, h: float = HESS_STEP) -> np.ndarray:
    """Symmetrized central-difference Hessian from the gradient; theta of shape (n, p)."""
    theta = np.atleast_2d(theta)
    n, p = theta.shape
    hess = np.empty((n, p, p))
    for l in range(p):
        e = np.zeros(p)
        e[l] = h
        hess[:, :, l] = (problem.gradient(theta + e) - problem.gradient(theta - e)) / (2 * h)
    return 0.5 * (hess + np.swapaxes(hess, 1, 2))


def wrap_distance(a, b) -> np.ndarray:
    """Euclidean distance on the torus with period pi in every coordinate."""
    d = np.abs(np.mod(np.asarray(a) - np.asarray(b), np.pi))
    return np.linalg.norm(np.minimum(d, np.pi - d), axis=-1)


@dataclass(frozen=True)
class CriticalPoint:
    theta: np.ndarray
    value: float
    kind: str
    hess_min: float
    hess_max: float
    grad_norm: float

    def to_dict(self) -> dict:
        return {"theta": [float(v) for v in self.theta], "value": self.value, "kind": self.kind,
                "hess_min": self.hess_min, "hess_max": self.hess_max, "grad_norm": self.grad_norm}

    @classmethod
    def from_dict(cls, d: dict) -> "CriticalPoint":
        return cls(np.array(d["theta"]), d["value"], d["kind"], d["hess_min"], d["hess_max"], d["grad_norm"])


def _newton(bp: _Batched, theta: np.ndarray):
    theta = theta.copy()
    active = np.arange(theta.shape[0])
    converged = np.zeros(theta.shape[0], dtype=bool)
    for _ in range(MAX_NEWTON):
        if active.size == 0:
            break
        th = theta[active]
        g = bp.gradient(th)
        done = np.linalg.norm(g, axis=1) <= GRAD_TOL
        converged[active[done]] = True
        active, th, g = active[~done], th[~done], g[~done]
        if active.size == 0:
            break
        hess = fd_hessian(bp, th)
        try:
            step = -np.linalg.solve(hess, g[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.empty_like(g)
            for i in range(len(g)):
                step[i] = -np.linalg.lstsq(hess[i], g[i], rcond=None)[0]
        norm = np.linalg.norm(step, axis=1, keepdims=True)
        step = np.where(norm > MAX_STEP, step * (MAX_STEP / np.maximum(norm, 1e-300)), step)
        step = np.where(np.isfinite(step), step, 0.0)
        theta[active] = th + step
    return theta[converged]


def _dedup(points: np.ndarray, radius: float) -> np.ndarray:
    pts = np.mod(points, np.pi)
    pts[np.pi - pts < radius] = 0.0
    _, first = np.unique(np.round(pts, 7), axis=0, return_index=True)
    pts = pts[np.sort(first)]
    kept: List[np.ndarray] = []
    for x in pts:
        if not kept or np.min(wrap_distance(np.array(kept), x)) > radius:
            kept.append(x)
    return np.array(kept).reshape(-1, points.shape[1])


def classify(eigs: np.ndarray, tol: float = EIG_TOL) -> str:
    if np.any(np.abs(eigs) < tol):
        return "degenerate"
    if eigs[0] > 0:
        return "minimum"
    if eigs[-1] < 0:
        return "maximum"
    return "saddle"


def find_critical_points(problem, p: int, grid_per_axis: int = 64, dedup_radius: float = 1e-4) -> List[CriticalPoint]:
    if grid_per_axis ** p > MAX_GRID_POINTS:
        raise DimensionError(f"grid of {grid_per_axis}^{p} seeds is too large for dense enumeration")
    bp = _Batched(problem, p)
    check_periodicity(lambda t: float(bp.loss(np.asarray(t)[None])[0]), p)
    axis = (np.arange(grid_per_axis) + 0.5) * np.pi / grid_per_axis
    seeds = np.stack(np.meshgrid(*([axis] * p), indexing="ij"), axis=-1).reshape(-1, p)
    found = _newton(bp, seeds)
    if found.size == 0:
        return []
    pts = _dedup(found, dedup_radius)
    hess = fd_hessian(bp, pts)
    eigs = np.linalg.eigvalsh(hess)
    values = bp.loss(pts)
    grads = np.linalg.norm(bp.gradient(pts), axis=1)
    out = []
    for x, v, ev, gn in zip(pts, values, eigs, grads):
        out.append(CriticalPoint(x, float(v), classify(ev), float(ev[0]), float(ev[-1]), float(gn)))
    n_deg = sum(c.kind == "degenerate" for c in out)
    if n_deg:
        raise DegenerateLandscapeError(
            f"{n_deg} of {len(out)} critical points have a Hessian eigenvalue below {EIG_TOL}; "
            "critical points are not isolated, refusing to count"
        )
    out.sort(key=lambda c: tuple(c.theta))
    return out


@dataclass
class LandscapeReport:
    instance: str
    p: int
    grid_per_axis: int
    points: List[CriticalPoint]
    minima_count: int
    global_value: float
    gaps: List[float]
    ceiling: int

    @property
    def ceiling_ok(self) -> bool:
        return len(self.points) <= self.ceiling

    @property
    def minima(self) -> List[CriticalPoint]:
        return [c for c in self.points if c.kind == "minimum"]

    def counts(self) -> dict:
        out = {"minimum": 0, "maximum": 0, "saddle": 0}
        for c in self.points:
            out[c.kind] += 1
        return out

    def to_dict(self) -> dict:
        return {
            "instance": self.instance,
            "p": self.p,
            "grid_per_axis": self.grid_per_axis,
            "period_box": [[0.0, float(np.pi)]] * self.p,
            "points": [c.to_dict() for c in self.points],
            "minima_count": self.minima_count,
            "global_value": self.global_value,
            "gaps": self.gaps,
            "ceiling": self.ceiling,
            "ceiling_ok": self.ceiling_ok,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LandscapeReport":
        return cls(d["instance"], d["p"], d["grid_per_axis"], [CriticalPoint.from_dict(c) for c in d["points"]],
                   d["minima_count"], d["global_value"], d["gaps"], d["ceiling"])


def landscape_report(problem, p: int, grid_per_axis: int = 64, instance: str = "") -> LandscapeReport:
    points = find_critical_points(problem, p, grid_per_axis)
    minima = [c for c in points if c.kind == "minimum"]
    if not minima:
        raise DegenerateLandscapeError("no strict local minimum found")
    best = min(c.value for c in minima)
    gaps = sorted(c.value - best for c in minima)[1:]
    return LandscapeReport(instance, p, grid_per_axis, points, len(minima), best, gaps, (4 * p) ** p)


def check_translation_symmetry(lossfn, p: int, n_probes: int, rng: np.random.Generator) -> float:
    """max |L(theta + (pi/2) e_l) - L(theta)| over random probes and all axes."""
    if n_probes < 1:
        raise ValueError("n_probes must be >= 1")
    worst = 0.0
    for _ in range(n_probes):
        theta = rng.uniform(0, np.pi, p)
        base = float(lossfn(theta))
        for l in range(p):
            shifted = theta.copy()
            shifted[l] += np.pi / 2
            worst = max(worst, abs(float(lossfn(shifted)) - base))
    return worst


@dataclass
class BasinResult:
    shift: tuple
    value: float
    theta: np.ndarray
    distance: float


def basin_minima(problem, theta_star, n_starts: int = 4, spread: float = 0.1, seed: int = 0,
                 cfg: Optional[OptimizerConfig] = None) -> List[BasinResult]:
    """Lowest value reached by L-BFGS from jittered starts around each theta* + (pi/2) zeta."""
    theta_star = np.asarray(theta_star, dtype=float)
    p = theta_star.size
    cfg = cfg or OptimizerConfig("lbfgs", max_iter=1000, grad_tol=1e-11)
    rng = np.random.default_rng(seed)
    out = []
    for zeta in product((0, 1), repeat=p):
        center = theta_star + np.pi / 2 * np.array(zeta)
        best = None
        for _ in range(n_starts):
            run = minimize(problem, center + rng.uniform(-spread, spread, p), cfg)
            if best is None or run.final_loss < best.final_loss:
                best = run
        out.append(BasinResult(zeta, best.final_loss, best.theta_final,
                               float(wrap_distance(best.theta_final, center))))
    return out
