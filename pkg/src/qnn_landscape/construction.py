"""Hard training sets for under-parameterized QNNs.

* ``build_symmetric`` makes a dataset S0 whose loss is invariant under every
  shift theta_l -> theta_l + pi/2 and vanishes at theta*, so the single
  minimum at theta* is copied into 2^p minima per period.
* ``build_breaking`` makes S1, whose loss is -c sum_l cos 2(theta_l - theta*_l)
  plus a shift-invariant remainder, so only the copy at theta* stays global.
* ``hard_instance`` mixes the two with the 4:1 reweighting.

Both builders solve for traceless Hermitian D with prescribed inner products
tr(D Phi_xi(M)) and use states I/d + kappa D.  The canonical product-state
examples and the classical concept dataset live here as well.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .circuit import CircuitSpec, Dataset, QuantumDatum, TwoLevelGenerator, one_layer_circuit
from .errors import ConstructionError, DimensionError
from .independence import gram_report
from .numerics import I2, X, Y, Z, basis_matrix, check_density, eigh, kron_all, local_operator
from .trig import (
    OperatorExpansion,
    PolyProblem,
    ScalarTrigPoly,
    expand_observable,
    index_position,
    linear_phase_polys,
    project_datum,
)

SOLVE_TOL = 1e-9

RHO0 = (I2 + Z) / 2
RHO1 = (I2 + X) / 2
RHO2 = (I2 + Y) / 2

EXAMPLE_KINDS = ("base", "shifted", "coupled")
EXAMPLE_SHIFT = np.pi / 100
MAX_MATRIX_P = 8


@dataclass(frozen=True)
class SymmetricTargetSpec:
    theta_star: np.ndarray
    directions: Optional[np.ndarray] = None

    def __post_init__(self):
        ts = np.asarray(self.theta_star, dtype=float)
        p = ts.shape[0]
        eta = np.eye(p, dtype=int) if self.directions is None else np.asarray(self.directions, dtype=int)
        if eta.ndim != 2 or eta.shape[1] != p:
            raise DimensionError(f"directions must have shape (m0, {p})")
        if not np.isin(eta, (-1, 0, 1)).all():
            raise ValueError("direction entries must be in {-1, 0, 1}")
        if np.linalg.matrix_rank(eta) < p:
            raise ValueError("directions must span R^p")
        object.__setattr__(self, "theta_star", ts)
        object.__setattr__(self, "directions", eta)


@dataclass(frozen=True)
class BreakingSpec:
    c: float
    r: float
    l0: float
    eps: float = 0.1

    @property
    def bound_per_p(self) -> float:
        return self.l0 / (2 * self.r ** 2)

    def c_bound(self, p: int) -> float:
        return self.l0 / (2 * p * self.r ** 2)

    def __post_init__(self):
        if not (self.c > 0 and self.r > 0 and self.l0 > 0):
            raise ValueError("c, r and L0 must be positive")
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")


@dataclass
class ConstructionOutput:
    dataset: Dataset
    kappa: float
    operators: List[np.ndarray]
    polys: List[ScalarTrigPoly]
    notes: Dict[str, float] = field(default_factory=dict)

    def problem(self) -> PolyProblem:
        return PolyProblem(self.polys, self.dataset.labels, self.dataset.weights)


def _require_independent(circuit: CircuitSpec):
    if not circuit.traceless:
        raise ConstructionError("construction needs a traceless observable")
    rep = gram_report(circuit)
    if not rep.independent:
        raise ConstructionError(
            f"Phi_xi(M) family is dependent (lambda_min = {rep.lambda_min:.3e}, tol {rep.tol:.3e})"
        )


def _solve_operator(exp: OperatorExpansion, target: ScalarTrigPoly, extra_zero=None) -> Tuple[np.ndarray, float]:
    """Minimum-norm traceless Hermitian D with tr(D Phi_xi) = target_xi for xi != 0.

    ``extra_zero`` optionally adds tr(D A) = 0 for one more operator A.
    Returns D and the relative residual of the linear system.
    """
    d = exp.dim
    basis = basis_matrix(d)
    flat_b = basis.reshape(basis.shape[0], -1)
    ops = [np.eye(d, dtype=complex)] + list(exp.nonzero_block())
    rhs = [0.0] + [target.coefficient(xi) for xi, _ in list(exp.items())[1:]]
    if extra_zero is not None:
        ops.append(extra_zero)
        rhs.append(0.0)
    flat_ops = np.stack(ops).reshape(len(ops), -1)
    # tr(B_j A) for Hermitian B_j, A: sum of B_j entries times A^T entries
    a = np.real(flat_ops.conj() @ flat_b.T)
    rhs = np.array(rhs)
    x, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    resid = float(np.linalg.norm(a @ x - rhs) / max(1.0, np.linalg.norm(rhs)))
    dmat = np.tensordot(x, basis, axes=1)
    return 0.5 * (dmat + dmat.conj().T), resid


def _kappa(ops: Sequence[np.ndarray]) -> float:
    d = ops[0].shape[0]
    vals = []
    for dm in ops:
        lam = eigh(dm)[0][0]
        if lam >= 0:
            raise ConstructionError("solved operator has no negative eigenvalue; it cannot be traceless and non-zero")
        vals.append((1.0 / d) / -lam)
    return float(min(vals))


def build_symmetric(circuit: CircuitSpec, spec: SymmetricTargetSpec, check: bool = True) -> ConstructionOutput:
    """S0: one datum per direction eta, residual kappa * sin(2 eta.(theta - theta*))."""
    if spec.theta_star.shape != (circuit.p,):
        raise DimensionError("theta* length does not match circuit p")
    if check:
        _require_independent(circuit)
    exp = expand_observable(circuit)
    targets, ops, worst = [], [], 0.0
    for eta in spec.directions:
        _, s = linear_phase_polys(eta, spec.theta_star)
        dm, resid = _solve_operator(exp, s)
        if resid > SOLVE_TOL:
            raise ConstructionError(f"linear system for direction {eta.tolist()} is singular (residual {resid:.3e})")
        worst = max(worst, resid)
        targets.append(s)
        ops.append(dm)
    kappa = _kappa(ops)
    d = circuit.dim
    phi0 = exp.coefficients[0]
    data, polys = [], []
    for dm in ops:
        rho = np.eye(d) / d + kappa * dm
        datum = QuantumDatum(rho, np.real(np.trace(rho @ phi0)))
        data.append(datum)
        polys.append(project_datum(exp, datum.state).pruned(1e-14))
    return ConstructionOutput(Dataset(tuple(data)), kappa, ops, polys, {"max_residual": worst})


def build_breaking(
    circuit: CircuitSpec,
    theta_star,
    spec: BreakingSpec,
    loss_scale: Optional[float] = None,
    check: bool = True,
) -> ConstructionOutput:
    """S1: one datum per coordinate whose loss has linear part -c sum cos 2(theta_l - theta*_l).

    ``loss_scale`` is the factor multiplying the sum of these data's squared
    residuals in the final loss (default 1/p, i.e. S1 on its own).  States are
    I/d + eps*kappa*D_l and labels are offset so the cross term carries -c;
    the leftover quadratic term is a sum of cos^2 and so shift invariant.
    """
    theta_star = np.asarray(theta_star, dtype=float)
    p = circuit.p
    if theta_star.shape != (p,):
        raise DimensionError("theta* length does not match circuit p")
    bound = spec.c_bound(p)
    if spec.c >= bound:
        raise ConstructionError(f"c = {spec.c:.6g} violates the bound c < L0/(2 p r^2) = {bound:.6g}")
    if check:
        _require_independent(circuit)
    scale = 1.0 / p if loss_scale is None else float(loss_scale)
    exp = expand_observable(circuit)
    phi0 = exp.coefficients[0]
    has_phi0 = bool(np.any(np.abs(phi0) > 1e-12))
    ops, targets, notes = [], [], {"phi0_constrained": 0.0}
    for l in range(p):
        xi1, xi2 = [0] * p, [0] * p
        xi1[l], xi2[l] = 1, 2
        t = 2 * theta_star[l]
        target = ScalarTrigPoly(p, {tuple(xi1): np.cos(t), tuple(xi2): np.sin(t)})
        dm, resid = (None, np.inf)
        if has_phi0:
            dm, resid = _solve_operator(exp, target, extra_zero=phi0)
            notes["phi0_constrained"] = float(resid <= SOLVE_TOL)
        if resid > SOLVE_TOL:
            dm, resid = _solve_operator(exp, target)
        if resid > SOLVE_TOL:
            raise ConstructionError(f"linear system for coordinate {l} is singular (residual {resid:.3e})")
        ops.append(dm)
        targets.append(target)
    kappa = _kappa(ops)
    amp = spec.eps * kappa
    offset = spec.c / (2 * scale * amp)
    d = circuit.dim
    data, polys = [], []
    for dm in ops:
        rho = np.eye(d) / d + amp * dm
        base = np.real(np.trace(rho @ phi0))
        datum = QuantumDatum(rho, base + offset)
        data.append(datum)
        polys.append(project_datum(exp, datum.state).pruned(1e-14))
    notes.update({"c": spec.c, "c_bound": bound, "eps": spec.eps, "label_offset": offset})
    return ConstructionOutput(Dataset(tuple(data)), kappa, ops, polys, notes)


def linear_term(out: ConstructionOutput, theta, loss_scale: float) -> float:
    """Part of the S1 loss that is linear in the circuit outputs: -2 * scale * sum_i y_i f_i."""
    f = np.array([q(theta) for q in out.polys])
    return float(-2.0 * loss_scale * np.dot(out.dataset.labels, f))


def _group_scales(weight_a: float, weight_b: float) -> Tuple[float, float]:
    if weight_a < 0 or weight_b < 0 or not (weight_a > 0 or weight_b > 0):
        raise ValueError("group weights must be non-negative and not both zero")
    top = max(weight_a, weight_b)
    return weight_a / top, weight_b / top


def combine(a: Dataset, b: Dataset, weight_a: float, weight_b: float) -> Dataset:
    """Concatenate two datasets, rescaling each group's datum weights by its share.

    The larger group weight maps to a factor 1, so 4:1 keeps the first group's
    weights and quarters the second's.  A zero weight drops that group.
    """
    sa, sb = _group_scales(weight_a, weight_b)
    if sa > 0 and sb > 0 and a.dim != b.dim:
        raise DimensionError(f"cannot combine datasets of dim {a.dim} and {b.dim}")
    data = []
    for ds, s in ((a, sa), (b, sb)):
        if s > 0:
            data += [QuantumDatum(d.state, d.label, d.weight * s) for d in ds]
    return Dataset(tuple(data))


def combine_problems(a: PolyProblem, b: PolyProblem, weight_a: float, weight_b: float) -> PolyProblem:
    """Same reweighting as :func:`combine`, on the fast-path representation."""
    sa, sb = _group_scales(weight_a, weight_b)
    polys, labels, weights = [], [], []
    for pr, s in ((a, sa), (b, sb)):
        if s > 0:
            polys += pr.polys
            labels += list(pr.labels)
            weights += list(pr.weights * s)
    return PolyProblem(polys, labels, weights)


@dataclass
class HardInstance:
    circuit: CircuitSpec
    theta_star: np.ndarray
    symmetric: ConstructionOutput
    breaking: ConstructionOutput
    dataset: Dataset
    spec: BreakingSpec

    def problem(self) -> PolyProblem:
        exp = expand_observable(self.circuit)
        polys = [project_datum(exp, s).pruned(1e-14) for s in self.dataset.states]
        return PolyProblem(polys, self.dataset.labels, self.dataset.weights, "hard-instance")

    @property
    def gap_floor(self) -> float:
        return self.spec.c * (2 - self.spec.r ** 2 / 2)


def sphere_samples(center, r: float, n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal((n, len(center)))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.asarray(center) + r * v


def hard_instance(
    circuit: CircuitSpec,
    theta_star,
    weights: Tuple[float, float] = (4.0, 1.0),
    r: float = 0.4,
    eps: float = 0.1,
    c: Optional[float] = None,
    c_fraction: float = 0.5,
    n_sphere: int = 10_000,
    seed: int = 0,
    directions=None,
) -> HardInstance:
    """S0 and S1 combined so that exactly one of the 2^p shifted minima is global.

    L0 is the smallest value of S0's contribution to the combined loss over
    ``n_sphere`` random points at distance r from theta*; c defaults to
    ``c_fraction`` times the admissible bound L0 / (2 p r^2).
    """
    theta_star = np.asarray(theta_star, dtype=float)
    p = circuit.p
    s0 = build_symmetric(circuit, SymmetricTargetSpec(theta_star, directions))
    sa, sb = _group_scales(*weights)
    if sa == 0 or sb == 0:
        raise ValueError("hard instance needs both groups")
    m_total = len(s0.dataset) + p
    s0_part = s0.problem()
    share0 = sa * len(s0.dataset) / m_total
    pts = sphere_samples(theta_star, r, n_sphere, np.random.default_rng(seed))
    l0 = float(share0 * np.min(s0_part.loss(pts)))
    bound = l0 / (2 * p * r ** 2)
    c = c_fraction * bound if c is None else c
    spec = BreakingSpec(c, r, l0, eps)
    s1 = build_breaking(circuit, theta_star, spec, loss_scale=sb / m_total, check=False)
    data = combine(s0.dataset, s1.dataset, *weights)
    return HardInstance(circuit, theta_star, s0, s1, data, spec)


def traceless_example_circuit(p: int) -> CircuitSpec:
    """Z generators with M = (Y + I)^{(x)p} - I: traceless, same Phi_xi for xi != 0."""
    base = one_layer_circuit(Z, Y + I2, p)
    m = base.observable - np.eye(base.dim)
    return CircuitSpec(base.generators, m, name=f"traceless-example-p{p}")


@dataclass(frozen=True)
class ExampleForm:
    """Closed-form description of a canonical example; valid for any p."""

    kind: str
    p: int

    def __post_init__(self):
        if self.kind not in EXAMPLE_KINDS:
            raise ValueError(f"unknown example kind {self.kind!r}; expected one of {EXAMPLE_KINDS}")
        if self.p < 1:
            raise ValueError("p must be >= 1")

    @property
    def target(self) -> float:
        return 0.0 if self.kind == "base" else EXAMPLE_SHIFT

    @property
    def n_data(self) -> int:
        return 2 * self.p + (self.p - 1 if self.kind == "coupled" else 0)

    def weights(self) -> np.ndarray:
        p, m = self.p, self.n_data
        w = [m / (2 * p)] * p + [m / (8 * p)] * p
        if self.kind == "coupled":
            w += [m / 8] * (p - 1)
        return np.array(w)

    def polys(self) -> List[ScalarTrigPoly]:
        p = self.p
        zero = (0,) * p
        out = []
        for j in (2, 1):
            for l in range(p):
                xi = [0] * p
                xi[l] = j
                out.append(ScalarTrigPoly(p, {zero: 1.0, tuple(xi): 1.0}))
        if self.kind == "coupled":
            for l in range(p - 1):
                xi = [0] * p
                xi[l] = xi[l + 1] = 1
                out.append(ScalarTrigPoly(p, {zero: 1.0, tuple(xi): 1.0}))
        return out

    def labels(self) -> np.ndarray:
        th = np.full(self.p, self.target)
        return np.array([q(th) for q in self.polys()])

    def problem(self) -> PolyProblem:
        return PolyProblem(self.polys(), self.labels(), self.weights(), f"{self.kind}-p{self.p}")

    def closed_form(self, theta) -> float:
        """The loss written out directly, independent of the datum polynomials."""
        theta = np.asarray(theta, dtype=float)
        t2 = 2 * self.target
        s, c = np.sin(2 * theta), np.cos(2 * theta)
        val = np.sum((s - np.sin(t2)) ** 2 + 0.25 * (c - np.cos(t2)) ** 2, axis=-1) / (2 * self.p)
        if self.kind == "coupled":
            val = val + np.sum((c[..., :-1] * c[..., 1:] - np.cos(t2) ** 2) ** 2, axis=-1) / 8
        return val

    def minima_values(self) -> List[float]:
        """Values at the 2^p shifted minima for the separable kinds."""
        if self.kind != "base":
            raise ValueError("closed-form minima values are only tabulated for the base example")
        return [k / (2 * self.p) for k in range(self.p + 1)]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "p": self.p}


def _example_states(form: ExampleForm) -> List[np.ndarray]:
    p = form.p
    states = []
    for special in (RHO1, RHO2):
        for l in range(p):
            f = [RHO0] * p
            f[l] = special
            states.append(kron_all(f))
    if form.kind == "coupled":
        for l in range(p - 1):
            pair = (np.eye(4) + np.kron(Y, Y)) / 4
            left = [RHO0] * l
            right = [RHO0] * (p - l - 2)
            states.append(kron_all(left + [pair] + right) if (left or right) else pair)
    return states


def canonical_example(kind: str, p: int):
    """(circuit, dataset, closed form) for the three canonical examples.

    Circuit and dataset are None when p exceeds MAX_MATRIX_P; the closed form
    and its :class:`PolyProblem` cover any p.
    """
    form = ExampleForm(kind, p)
    if p > MAX_MATRIX_P:
        return None, None, form
    circuit = one_layer_circuit(Z, Y + I2, p)
    circuit = CircuitSpec(circuit.generators, circuit.observable, name=f"example-{kind}-p{p}")
    data = Dataset(tuple(
        QuantumDatum(s, y, w) for s, y, w in zip(_example_states(form), form.labels(), form.weights())
    ))
    return circuit, data, form


@dataclass(frozen=True)
class ClassicalConceptConfig:
    p: int
    w: Optional[np.ndarray] = None
    m: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.p < 1 or self.m < 1:
            raise ValueError("p and m must be >= 1")
        if self.w is not None:
            w = np.asarray(self.w, dtype=float)
            if w.shape != (2 * self.p,):
                raise DimensionError(f"w must have length {2 * self.p}")
            if not np.any(w):
                raise ValueError("w must be non-zero")
            object.__setattr__(self, "w", w)


def concept_state(x) -> np.ndarray:
    """|psi><psi| for psi = (x)_l exp(-i x_{p+l} Y) exp(-i x_l X) |0>."""
    x = np.asarray(x, dtype=float)
    p = len(x) // 2
    psi = np.ones(1, dtype=complex)
    for l in range(p):
        ket = np.array([1, 0], dtype=complex)
        ket = (np.cos(x[l]) * I2 - 1j * np.sin(x[l]) * X) @ ket
        ket = (np.cos(x[p + l]) * I2 - 1j * np.sin(x[p + l]) * Y) @ ket
        psi = np.kron(psi, ket)
    return np.outer(psi, psi.conj())


def classical_concept(cfg: ClassicalConceptConfig) -> Tuple[Dataset, np.ndarray, np.ndarray]:
    """Dataset plus the feature matrix and normal vector used to label it."""
    w_rng, x_rng = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(2)]
    w = w_rng.standard_normal(2 * cfg.p) if cfg.w is None else cfg.w
    xs = x_rng.uniform(0, 2 * np.pi, (cfg.m, 2 * cfg.p))
    data = tuple(QuantumDatum(concept_state(x), float(w @ x > 0)) for x in xs)
    return Dataset(data), xs, w


def concept_circuit(p: int) -> CircuitSpec:
    c = one_layer_circuit(Z, Y + I2, p)
    return CircuitSpec(c.generators, c.observable, name=f"concept-p{p}")


def add_label_noise(data: Dataset, sigma: float, rng: np.random.Generator) -> Dataset:
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return data
    return data.with_labels(data.labels + rng.normal(0.0, sigma, len(data)))


def noisy_problem(problem: PolyProblem, sigma: float, rng: np.random.Generator) -> PolyProblem:
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return problem
    return problem.with_labels(problem.labels + rng.normal(0.0, sigma, len(problem)))
