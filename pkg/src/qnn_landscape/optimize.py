"""Gradient optimizers and randomized-restart sweeps.

Update rules follow the usual deep-learning library conventions (no weight
decay, no momentum for RMSProp).  A "problem" is any object with ``loss(theta)``
and ``gradient(theta)``; problems that also accept a batch of shape (n, p),
such as :class:`qnn_landscape.trig.PolyProblem`, are swept in batch for the
first-order methods.
"""
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

KINDS = ("gd", "adam", "rmsprop", "lbfgs")
ARMIJO_C = 1e-4
MAX_HALVINGS = 60


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "rmsprop"
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    alpha: float = 0.99
    eps: float = 1e-8
    history: int = 100
    max_iter: int = 200
    grad_tol: float = 1e-8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown optimizer {self.kind!r}; expected one of {KINDS}")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.history < 1:
            raise ValueError("history must be >= 1")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and 0 <= self.alpha < 1):
            raise ValueError("smoothing constants must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunRecord:
    config: dict
    seed: Optional[int]
    theta_init: np.ndarray
    trajectory: List[float]
    theta_final: np.ndarray
    final_loss: float
    iterations: int
    stop_reason: str

    @property
    def failed(self) -> bool:
        return self.stop_reason == "non_finite"

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "theta_init": [float(v) for v in self.theta_init],
            "trajectory": [float(v) for v in self.trajectory],
            "theta_final": [float(v) for v in self.theta_final],
            "final_loss": float(self.final_loss),
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(d["config"], d["seed"], np.array(d["theta_init"]), list(d["trajectory"]),
                   np.array(d["theta_final"]), d["final_loss"], d["iterations"], d["stop_reason"])


class _FirstOrder:
    """Per-coordinate update state shared by the single-run and batched loops."""

    def __init__(self, cfg: OptimizerConfig, shape):
        self.cfg = cfg
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, theta, g, rows=None):
        cfg = self.cfg
        sel = slice(None) if rows is None else rows
        if cfg.kind == "gd":
            return theta - cfg.lr * g
        if cfg.kind == "rmsprop":
            self.v[sel] = cfg.alpha * self.v[sel] + (1 - cfg.alpha) * g * g
            return theta - cfg.lr * g / (np.sqrt(self.v[sel]) + cfg.eps)
        # adam
        self.m[sel] = cfg.beta1 * self.m[sel] + (1 - cfg.beta1) * g
        self.v[sel] = cfg.beta2 * self.v[sel] + (1 - cfg.beta2) * g * g
        mhat = self.m[sel] / (1 - cfg.beta1 ** self.t)
        vhat = self.v[sel] / (1 - cfg.beta2 ** self.t)
        return theta - cfg.lr * mhat / (np.sqrt(vhat) + cfg.eps)


def _finite(loss, g) -> bool:
    return bool(np.isfinite(loss) and np.all(np.isfinite(g)))


def _first_order(problem, theta, cfg: OptimizerConfig):
    state = _FirstOrder(cfg, theta.shape)
    traj = []
    reason = "max_iter"
    for it in range(cfg.max_iter + 1):
        loss, g = problem.loss(theta), problem.gradient(theta)
        traj.append(float(loss))
        if not _finite(loss, g):
            reason = "non_finite"
            break
        if np.linalg.norm(g) <= cfg.grad_tol:
            reason = "gradient"
            break
        if it == cfg.max_iter:
            break
        state.t += 1
        theta = state.step(theta, g)
    return theta, traj, reason


def _two_loop(g, s_hist, y_hist):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        a = s @ q / (y @ s)
        alphas.append(a)
        q -= a * y
    s, y = s_hist[-1], y_hist[-1]
    r = q * (s @ y) / (y @ y)
    for (s, y), a in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = y @ r / (y @ s)
        r += s * (a - b)
    return -r


def _lbfgs(problem, theta, cfg: OptimizerConfig):
    """L-BFGS with two-loop recursion and Armijo backtracking (halving).

    The trial step is 1, except on the first iteration (or after a history
    reset) where the steepest-descent direction is scaled by min(1, 1/|g|_1).
    """
    loss, g = problem.loss(theta), problem.gradient(theta)
    traj = [float(loss)]
    s_hist, y_hist = [], []
    reason = "max_iter"
    for it in range(cfg.max_iter + 1):
        if not _finite(loss, g):
            reason = "non_finite"
            break
        if np.linalg.norm(g) <= cfg.grad_tol:
            reason = "gradient"
            break
        if it == cfg.max_iter:
            break
        if s_hist:
            d = _two_loop(g, s_hist, y_hist)
            t = 1.0
            if g @ d >= 0:
                s_hist, y_hist = [], []
        if not s_hist:
            d = -g
            t = min(1.0, 1.0 / np.sum(np.abs(g)))
        slope = g @ d
        for _ in range(MAX_HALVINGS):
            trial = theta + t * d
            new_loss = problem.loss(trial)
            if np.isfinite(new_loss) and new_loss <= loss + ARMIJO_C * t * slope:
                break
            t *= 0.5
        else:
            reason = "line_search"
            break
        new_g = problem.gradient(trial)
        s, y = trial - theta, new_g - g
        if y @ s > 1e-12:
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > cfg.history:
                s_hist.pop(0)
                y_hist.pop(0)
        theta, loss, g = trial, new_loss, new_g
        traj.append(float(loss))
    return theta, traj, reason


def minimize(problem, theta0, cfg: OptimizerConfig, seed: Optional[int] = None) -> RunRecord:
    theta0 = np.array(theta0, dtype=float)
    if theta0.ndim != 1:
        raise ValueError("theta0 must be a vector")
    run = _lbfgs if cfg.kind == "lbfgs" else _first_order
    theta, traj, reason = run(problem, theta0.copy(), cfg)
    final = float(problem.loss(theta))
    return RunRecord(cfg.to_dict(), seed, theta0, traj, theta, final, len(traj) - 1, reason)


def minimize_batch(problem, theta0, cfg: OptimizerConfig, seeds: Optional[Sequence[int]] = None) -> List[RunRecord]:
    """Run first-order optimizers on many starts at once.

    Rows that hit the gradient threshold or a non-finite value are frozen, so
    each row follows the same update sequence as :func:`minimize`.
    """
    if cfg.kind == "lbfgs":
        raise ValueError("batched runs support first-order optimizers only")
    theta0 = np.array(theta0, dtype=float)
    n, p = theta0.shape
    theta = theta0.copy()
    state = _FirstOrder(cfg, theta.shape)
    trajs = [[] for _ in range(n)]
    reasons = ["max_iter"] * n
    active = np.arange(n)
    for it in range(cfg.max_iter + 1):
        if active.size == 0:
            break
        th = theta[active]
        loss = np.atleast_1d(problem.loss(th))
        g = np.atleast_2d(problem.gradient(th))
        for i, v in zip(active, loss):
            trajs[i].append(float(v))
        bad = ~(np.isfinite(loss) & np.all(np.isfinite(g), axis=1))
        done = np.linalg.norm(g, axis=1) <= cfg.grad_tol
        for i in active[bad]:
            reasons[i] = "non_finite"
        for i in active[done & ~bad]:
            reasons[i] = "gradient"
        keep = ~(bad | done)
        if it == cfg.max_iter:
            break
        active, g, th = active[keep], g[keep], th[keep]
        state.t += 1
        theta[active] = state.step(th, g, rows=active)
    seeds = [None] * n if seeds is None else list(seeds)
    out = []
    for i in range(n):
        final = float(problem.loss(theta[i]))
        out.append(RunRecord(cfg.to_dict(), seeds[i], theta0[i], trajs[i], theta[i].copy(),
                             final, len(trajs[i]) - 1, reasons[i]))
    return out


@dataclass
class SweepSummary:
    instance: str
    p: int
    config: dict
    seed: int
    n_inits: int
    threshold: float
    success_count: int
    success_rate: float
    n_failed: int
    hist_edges: List[float]
    hist_counts: List[int]
    runs: List[RunRecord] = field(default_factory=list, repr=False, compare=False)

    @property
    def final_losses(self) -> np.ndarray:
        return np.array([r.final_loss for r in self.runs])

    def to_dict(self) -> dict:
        return {
            "instance": self.instance,
            "p": self.p,
            "config": self.config,
            "seed": self.seed,
            "n_inits": self.n_inits,
            "threshold": self.threshold,
            "success_count": self.success_count,
            "success_rate": self.success_rate,
            "n_failed": self.n_failed,
            "hist_edges": [float(e) for e in self.hist_edges],
            "hist_counts": [int(c) for c in self.hist_counts],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSummary":
        keys = ("instance", "p", "config", "seed", "n_inits", "threshold", "success_count",
                "success_rate", "n_failed", "hist_edges", "hist_counts")
        return cls(**{k: d[k] for k in keys})


def initial_points(p: int, n_inits: int, seed: int) -> np.ndarray:
    """One uniform point of [0, 2pi)^p per run, each from its own spawned stream."""
    streams = np.random.SeedSequence(seed).spawn(n_inits)
    return np.array([np.random.default_rng(s).uniform(0.0, 2 * np.pi, p) for s in streams])


def loss_histogram(losses: np.ndarray, bins: int = 40):
    upper = float(losses.max()) if losses.size else 1.0
    edges = np.linspace(0.0, max(upper, 1e-12), bins + 1)
    counts, _ = np.histogram(losses, bins=edges)
    return edges, counts


def sweep(
    problem,
    p: int,
    cfg: OptimizerConfig,
    n_inits: int,
    seed: int,
    success_threshold: Optional[float] = None,
    instance: str = "",
    bins: int = 40,
) -> SweepSummary:
    if n_inits < 1:
        raise ValueError("n_inits must be >= 1")
    threshold = 0.25 / p if success_threshold is None else float(success_threshold)
    starts = initial_points(p, n_inits, seed)
    batched = cfg.kind != "lbfgs" and getattr(problem, "loss", None) is not None and _supports_batch(problem, p)
    if batched:
        runs = minimize_batch(problem, starts, cfg, seeds=[seed] * n_inits)
    else:
        runs = [minimize(problem, t0, cfg, seed=seed) for t0 in starts]
    finals = np.array([r.final_loss for r in runs])
    ok = np.array([not r.failed and np.isfinite(r.final_loss) for r in runs])
    success = int(np.sum(ok & (finals < threshold)))
    edges, counts = loss_histogram(finals[ok], bins)
    return SweepSummary(instance, p, cfg.to_dict(), seed, n_inits, threshold, success,
                        success / n_inits, int(np.sum(~ok)), list(edges), list(counts), runs)


def _supports_batch(problem, p: int) -> bool:
    try:
        out = np.asarray(problem.loss(np.zeros((2, p))))
    except Exception:
        return False
    return out.shape == (2,)
