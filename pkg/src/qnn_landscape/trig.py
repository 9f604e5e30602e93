"""Heisenberg-picture trigonometric expansion of circuit outputs.

For a two-level generator H the maps

    phi0(A) = (A + HAH)/2,   phi1(A) = (A - HAH)/2,   phi2(A) = (i/2)[H, A]

split A so that exp(itH) A exp(-itH) = phi0(A) + phi1(A) cos 2t + phi2(A) sin 2t.
Composing them over the circuit gives

    M(theta) = sum_xi Phi_xi(M) prod_{xi_l=1} cos 2theta_l prod_{xi_l=2} sin 2theta_l,

with Phi_xi = phi_1^{xi_1} o ... o phi_p^{xi_p}: the last generator's map is
applied to M first.  Multi-indices are tuples with ``xi[0]`` belonging to the
first generator; dense arrays over {0,1,2}^p use C order (xi[0] most
significant).
"""
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .circuit import CircuitSpec, TwoLevelGenerator
from .errors import CapacityError, DimensionError, IntegrityError, PeriodicityError
from .numerics import check_hermitian

MultiIndex = Tuple[int, ...]

MAX_EXPANSION_P = 8
MAX_EXPANSION_ENTRIES = 2 ** 25


def _generator_matrix(h) -> np.ndarray:
    return h.hamiltonian if isinstance(h, TwoLevelGenerator) else np.asarray(h, dtype=complex)


def phi_map(h, j: int, a: np.ndarray) -> np.ndarray:
    """Apply phi^(j) of generator ``h`` to ``a`` (broadcasts over leading axes)."""
    hm = _generator_matrix(h)
    a = np.asarray(a, dtype=complex)
    if a.shape[-1] != hm.shape[0] or a.shape[-2] != hm.shape[0]:
        raise DimensionError(f"operator shape {a.shape[-2:]} does not match generator dim {hm.shape[0]}")
    if j == 0:
        return 0.5 * (a + hm @ a @ hm)
    if j == 1:
        return 0.5 * (a - hm @ a @ hm)
    if j == 2:
        return 0.5j * (hm @ a - a @ hm)
    raise ValueError(f"phi index must be 0, 1 or 2, got {j}")


def all_indices(p: int) -> List[MultiIndex]:
    return list(product(range(3), repeat=p))


def index_position(xi: Sequence[int]) -> int:
    pos = 0
    for x in xi:
        pos = 3 * pos + int(x)
    return pos


def xi_string(xi: Sequence[int]) -> str:
    return "".join(str(int(x)) for x in xi)


def parse_xi(s: str) -> MultiIndex:
    xi = tuple(int(c) for c in s)
    if any(x not in (0, 1, 2) for x in xi):
        raise ValueError(f"bad multi-index {s!r}")
    return xi


def monomial(xi: Sequence[int], theta) -> np.ndarray:
    """prod_{xi_l=1} cos 2theta_l * prod_{xi_l=2} sin 2theta_l (broadcasts over leading axes)."""
    theta = np.asarray(theta, dtype=float)
    out = np.ones(theta.shape[:-1])
    for l, x in enumerate(xi):
        if x == 1:
            out = out * np.cos(2 * theta[..., l])
        elif x == 2:
            out = out * np.sin(2 * theta[..., l])
    return out


@dataclass(frozen=True)
class OperatorExpansion:
    """All 3^p coefficient operators Phi_xi(M), stacked in C order."""

    p: int
    coefficients: np.ndarray

    @property
    def dim(self) -> int:
        return self.coefficients.shape[-1]

    def __getitem__(self, xi: Sequence[int]) -> np.ndarray:
        if len(xi) != self.p:
            raise DimensionError(f"multi-index must have length {self.p}")
        return self.coefficients[index_position(xi)]

    def items(self):
        for xi in all_indices(self.p):
            yield xi, self.coefficients[index_position(xi)]

    def nonzero_block(self) -> np.ndarray:
        """Coefficients for every xi != 0 (drops the first entry)."""
        return self.coefficients[1:]

    def evaluate(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        weights = np.array([monomial(xi, theta) for xi in all_indices(self.p)])
        return np.tensordot(weights, self.coefficients, axes=1)


def expand_observable(circuit: CircuitSpec) -> OperatorExpansion:
    p, d = circuit.p, circuit.dim
    if p > MAX_EXPANSION_P or (3 ** p) * d * d > MAX_EXPANSION_ENTRIES:
        raise CapacityError(
            f"full expansion needs 3^{p} matrices of size {d}x{d}; "
            "evaluate through circuit simulation instead"
        )
    ops = circuit.observable[None].astype(complex)
    for gen in reversed(circuit.generators):
        stacked = np.stack([phi_map(gen, j, ops) for j in range(3)])
        ops = stacked.reshape(-1, d, d)
    return OperatorExpansion(p, ops)


@dataclass
class ScalarTrigPoly:
    """Real combination of the monomials prod cos 2theta_l prod sin 2theta_l."""

    p: int
    coeffs: Dict[MultiIndex, float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for xi, c in self.coeffs.items():
            xi = tuple(int(x) for x in xi)
            if len(xi) != self.p:
                raise DimensionError(f"multi-index {xi} does not have length {self.p}")
            if np.iscomplexobj(c):
                if abs(np.imag(c)) > 1e-10:
                    raise IntegrityError(f"coefficient at {xi} is not real: {c}")
                c = np.real(c)
            clean[xi] = clean.get(xi, 0.0) + float(c)
        self.coeffs = clean

    @classmethod
    def constant(cls, p: int, value: float = 1.0) -> "ScalarTrigPoly":
        return cls(p, {(0,) * p: value})

    def __call__(self, theta) -> np.ndarray:
        return eval_poly(self, theta)

    def __add__(self, other: "ScalarTrigPoly") -> "ScalarTrigPoly":
        if other.p != self.p:
            raise DimensionError("cannot add polynomials over different parameter counts")
        out = dict(self.coeffs)
        for xi, c in other.coeffs.items():
            out[xi] = out.get(xi, 0.0) + c
        return ScalarTrigPoly(self.p, out)

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def scale(self, s: float) -> "ScalarTrigPoly":
        return ScalarTrigPoly(self.p, {xi: s * c for xi, c in self.coeffs.items()})

    def times_factor(self, l: int, factor: Mapping[int, float]) -> "ScalarTrigPoly":
        """Multiply by a_0 + a_1 cos 2theta_l + a_2 sin 2theta_l.

        Only defined when no existing term already depends on theta_l.
        """
        out: Dict[MultiIndex, float] = {}
        for xi, c in self.coeffs.items():
            if xi[l] != 0:
                raise ValueError(f"polynomial already depends on theta_{l}")
            for j, a in factor.items():
                if a == 0:
                    continue
                new = list(xi)
                new[l] = j
                key = tuple(new)
                out[key] = out.get(key, 0.0) + c * a
        return ScalarTrigPoly(self.p, out)

    def shift_half_pi(self, l: int) -> "ScalarTrigPoly":
        """Coefficients of theta -> theta + (pi/2) e_l: terms with xi_l != 0 flip sign."""
        return ScalarTrigPoly(
            self.p, {xi: (-c if xi[l] else c) for xi, c in self.coeffs.items()}
        )

    def pruned(self, tol: float = 0.0) -> "ScalarTrigPoly":
        return ScalarTrigPoly(self.p, {xi: c for xi, c in self.coeffs.items() if abs(c) > tol})

    def coefficient(self, xi: Sequence[int]) -> float:
        return self.coeffs.get(tuple(xi), 0.0)

    def to_records(self) -> List[Tuple[str, float]]:
        return [(xi_string(xi), c) for xi, c in sorted(self.coeffs.items())]

    @classmethod
    def from_records(cls, p: int, records: Iterable[Tuple[str, float]]) -> "ScalarTrigPoly":
        return cls(p, {parse_xi(s): float(c) for s, c in records})


def eval_poly(poly: ScalarTrigPoly, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != poly.p:
        raise DimensionError(f"expected {poly.p} angles, got {theta.shape[-1]}")
    total = np.zeros(theta.shape[:-1])
    for xi, c in poly.coeffs.items():
        total = total + c * monomial(xi, theta)
    return total if total.ndim else float(total)


def project_datum(expansion: OperatorExpansion, state) -> ScalarTrigPoly:
    """Scalar coefficients tr(rho Phi_xi(M)) of f(rho, theta)."""
    rho = np.asarray(state, dtype=complex)
    if rho.shape != (expansion.dim, expansion.dim):
        raise DimensionError(f"state shape {rho.shape} does not match expansion dim {expansion.dim}")
    vals = np.einsum("ij,kji->k", rho, expansion.coefficients)
    return ScalarTrigPoly(expansion.p, dict(zip(all_indices(expansion.p), vals)))


def linear_phase_polys(eta: Sequence[int], theta_star: Sequence[float]) -> Tuple[ScalarTrigPoly, ScalarTrigPoly]:
    """(cos, sin) of 2 * sum_l eta_l (theta_l - theta*_l) as trig polynomials.

    Built by the angle-addition recursion, one coordinate at a time.
    """
    p = len(eta)
    c = ScalarTrigPoly.constant(p, 1.0)
    s = ScalarTrigPoly(p, {})
    for l, e in enumerate(eta):
        if e == 0:
            continue
        if e not in (-1, 1):
            raise ValueError("direction entries must be in {-1, 0, 1}")
        t = 2 * theta_star[l]
        # cos(2e(x - t*)) = cos2x cos t + sin2x sin t;  sin(...) = e (sin2x cos t - cos2x sin t)
        cl = {1: np.cos(t), 2: np.sin(t)}
        sl = {1: -e * np.sin(t), 2: e * np.cos(t)}
        c, s = (
            c.times_factor(l, cl) - s.times_factor(l, sl),
            s.times_factor(l, cl) + c.times_factor(l, sl),
        )
    return c, s


@dataclass(frozen=True)
class FourierReport:
    grid_shape: Tuple[int, ...]
    support: Tuple[Tuple[int, ...], ...]
    degree: int
    bound: int
    peak: float
    max_out_of_band: float
    relative_threshold: float

    @property
    def bound_holds(self) -> bool:
        return self.degree <= self.bound

    def to_dict(self) -> dict:
        return {
            "grid_shape": list(self.grid_shape),
            "support": [list(k) for k in self.support],
            "degree": self.degree,
            "bound": self.bound,
            "peak": self.peak,
            "max_out_of_band": self.max_out_of_band,
            "relative_threshold": self.relative_threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FourierReport":
        return cls(
            tuple(d["grid_shape"]), tuple(tuple(k) for k in d["support"]), d["degree"],
            d["bound"], d["peak"], d["max_out_of_band"], d["relative_threshold"],
        )


def check_periodicity(lossfn: Callable, p: int, n_probes: int = 3, seed: int = 0, tol: float = 1e-9):
    rng = np.random.default_rng(seed)
    for _ in range(n_probes):
        theta = rng.uniform(0, np.pi, p)
        base = float(lossfn(theta))
        for l in range(p):
            shifted = theta.copy()
            shifted[l] += np.pi
            res = abs(float(lossfn(shifted)) - base)
            if res > tol * max(1.0, abs(base)):
                raise PeriodicityError(l, res)


def fourier_report(
    lossfn: Callable,
    p: int,
    samples_per_axis: int = 8,
    relative_threshold: float = 1e-8,
    strict: bool = True,
) -> FourierReport:
    """DFT of ``lossfn`` on a uniform grid of [0, pi)^p.

    Frequencies are integers in units of 2*theta.  The support K keeps every
    coefficient above ``relative_threshold`` times the peak magnitude; the
    degree is max over K of sum |k_l|, which must not exceed 2p.
    """
    n = int(samples_per_axis)
    if n < 8 or n & (n - 1):
        raise ValueError("samples_per_axis must be a power of two >= 8")
    check_periodicity(lossfn, p)
    axis = np.pi * np.arange(n) / n
    grid = np.stack(np.meshgrid(*([axis] * p), indexing="ij"), axis=-1).reshape(-1, p)
    values = np.array([float(lossfn(t)) for t in grid]).reshape((n,) * p)
    coeffs = np.fft.fftn(values) / values.size
    mags = np.abs(coeffs)
    peak = float(mags.max())
    freqs = np.fft.fftfreq(n, 1.0 / n).astype(int)
    kgrid = np.stack(np.meshgrid(*([freqs] * p), indexing="ij"), axis=-1)
    l1 = np.abs(kgrid).sum(axis=-1)
    bound = 2 * p
    if peak == 0.0:
        support, degree, oob = (), 0, 0.0
    else:
        mask = mags > relative_threshold * peak
        support = tuple(sorted(tuple(int(v) for v in k) for k in kgrid[mask]))
        degree = int(l1[mask].max())
        outside = mags[l1 > bound]
        oob = float(outside.max() / peak) if outside.size else 0.0
    report = FourierReport((n,) * p, support, degree, bound, peak, oob, relative_threshold)
    if strict and not report.bound_holds:
        raise IntegrityError(f"Fourier degree {degree} exceeds the two-level bound {bound}")
    return report


class PolyProblem:
    """Square loss whose per-datum outputs are given as trig polynomials.

    This is the closed-form fast path: evaluation never forms 2^p-dimensional
    matrices, so instances with dozens of parameters are cheap.  ``loss`` and
    ``gradient`` accept a single parameter vector or a batch of shape (n, p).
    """

    def __init__(self, polys: Sequence[ScalarTrigPoly], labels, weights=None, name: str = ""):
        if not polys:
            raise ValueError("need at least one datum")
        p = polys[0].p
        if any(q.p != p for q in polys):
            raise DimensionError("all per-datum polynomials must share p")
        self.p = p
        self.name = name
        self.polys = [q.pruned() for q in polys]
        self.labels = np.asarray(labels, dtype=float)
        self.weights = np.ones(len(polys)) if weights is None else np.asarray(weights, dtype=float)
        if self.labels.shape != (len(polys),) or self.weights.shape != (len(polys),):
            raise DimensionError("labels and weights must have one entry per datum")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        terms = sorted({xi for q in self.polys for xi in q.coeffs})
        if not terms:
            terms = [(0,) * p]
        self._xi = np.array(terms, dtype=int).reshape(len(terms), p)
        pos = {xi: t for t, xi in enumerate(terms)}
        self._coef = np.zeros((len(self.polys), len(terms)))
        for i, q in enumerate(self.polys):
            for xi, c in q.coeffs.items():
                self._coef[i, pos[xi]] = c

    def __len__(self):
        return len(self.polys)

    def with_labels(self, labels) -> "PolyProblem":
        return PolyProblem(self.polys, labels, self.weights, self.name)

    def _factors(self, theta: np.ndarray):
        # theta: (n, p) -> factor tables of shape (3, p, n)
        c, s = np.cos(2 * theta).T, np.sin(2 * theta).T
        ones = np.ones_like(c)
        base = np.stack([ones, c, s])
        deriv = np.stack([np.zeros_like(c), -2 * s, 2 * c])
        cols = np.arange(self.p)[None, :]
        return base[self._xi, cols], deriv[self._xi, cols]  # (T, p, n)

    def _batch(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.p:
            raise DimensionError(f"expected {self.p} angles, got shape {theta.shape}")
        return theta.reshape(-1, self.p), theta.ndim == 1

    def outputs(self, theta) -> np.ndarray:
        th, single = self._batch(theta)
        fac, _ = self._factors(th)
        vals = self._coef @ fac.prod(axis=1)  # (m, n)
        return vals[:, 0] if single else vals.T

    def loss(self, theta):
        th, single = self._batch(theta)
        fac, _ = self._factors(th)
        r = self._coef @ fac.prod(axis=1) - self.labels[:, None]
        val = (self.weights[:, None] * r * r).mean(axis=0)
        return float(val[0]) if single else val

    def gradient(self, theta):
        th, single = self._batch(theta)
        fac, dfac = self._factors(th)
        t, p, n = fac.shape
        ones = np.ones((t, 1, n))
        prefix = np.concatenate([ones, np.cumprod(fac[:, :-1], axis=1)], axis=1)
        suffix = np.concatenate([np.cumprod(fac[:, :0:-1], axis=1)[:, ::-1], ones], axis=1)
        dterm = prefix * suffix * dfac  # (T, p, n)
        terms = (prefix[:, -1] * fac[:, -1])  # full products, (T, n)
        r = self._coef @ terms - self.labels[:, None]  # (m, n)
        weighted = self.weights[:, None] * r  # (m, n)
        df = np.einsum("mt,tln->mln", self._coef, dterm)
        g = 2.0 * np.einsum("mn,mln->nl", weighted, df) / len(self.polys)
        return g[0] if single else g


def poly_problem_from_circuit(circuit: CircuitSpec, states: Sequence[np.ndarray], labels, weights=None) -> PolyProblem:
    """Expand a (small) circuit once and reuse the scalar polynomials for fast evaluation."""
    exp = expand_observable(circuit)
    polys = [project_datum(exp, check_hermitian(s, name="state")).pruned(1e-14) for s in states]
    return PolyProblem(polys, labels, weights, circuit.name)
