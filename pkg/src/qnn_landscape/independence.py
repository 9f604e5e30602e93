"""Linear independence of the Phi_xi(M) family and the Haar-random circuit model.

A circuit is "independent" when the 3^p - 1 operators Phi_xi(M), xi != 0, are
linearly independent.  We test this through the Gram matrix
G[a, b] = tr(Phi_a(M) Phi_b(M)), which is positive definite exactly when the
family is independent.
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .circuit import CircuitSpec, TwoLevelGenerator
from .errors import DimensionError, IntegrityError
from .numerics import balanced_two_level, check_hermitian, dagger, eigh, haar_unitary, random_hermitian
from .trig import all_indices, expand_observable, index_position, xi_string

INDEPENDENCE_RTOL = 1e-8
MAX_MOMENT_P = 4
MIN_MOMENT_SAMPLES = 30


def gram_matrix(ops: np.ndarray) -> np.ndarray:
    """Real Gram matrix tr(A_a A_b) of a stack of Hermitian operators."""
    flat = ops.reshape(ops.shape[0], -1)
    g = np.real(flat @ flat.conj().T)
    return 0.5 * (g + g.T)


def gershgorin_margin(g: np.ndarray) -> float:
    off = np.abs(g).sum(axis=1) - np.abs(np.diag(g))
    return float(np.min(np.diag(g) - off))


@dataclass(frozen=True)
class GramReport:
    p: int
    gram: np.ndarray
    lambda_min: float
    gershgorin_margin: float
    tol: float
    independent: bool

    @property
    def order(self) -> int:
        return self.gram.shape[0]

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "order": self.order,
            "gram": self.gram.tolist(),
            "lambda_min": self.lambda_min,
            "gershgorin_margin": self.gershgorin_margin,
            "tol": self.tol,
            "independent": self.independent,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GramReport":
        return cls(d["p"], np.array(d["gram"], dtype=float), d["lambda_min"],
                   d["gershgorin_margin"], d["tol"], d["independent"])


def gram_report(circuit: CircuitSpec) -> GramReport:
    exp = expand_observable(circuit)
    g = gram_matrix(exp.nonzero_block())
    lam = float(eigh(g.astype(complex))[0][0])
    tol = INDEPENDENCE_RTOL * float(np.max(np.diag(g)))
    independent = bool(tol > 0 and lam > tol)
    return GramReport(circuit.p, g, lam, gershgorin_margin(g), tol, independent)


@dataclass(frozen=True)
class RandomModelConfig:
    dim: int
    p: int
    hamiltonian: Optional[np.ndarray] = None
    seed: int = 0

    def __post_init__(self):
        if self.dim < 2:
            raise DimensionError("random model needs dim >= 2")
        if self.p < 1:
            raise DimensionError("random model needs p >= 1")
        h = balanced_two_level(self.dim) if self.hamiltonian is None else self.hamiltonian
        gen = TwoLevelGenerator(h)  # validates traceless / H^2 = I
        if gen.dim != self.dim:
            raise DimensionError("base Hamiltonian dimension does not match dim")
        object.__setattr__(self, "hamiltonian", gen.hamiltonian)


def _check_observable(m, dim: int) -> np.ndarray:
    m = check_hermitian(m, name="observable")
    if m.shape[0] != dim:
        raise DimensionError(f"observable dim {m.shape[0]} does not match model dim {dim}")
    if abs(np.trace(m)) > 1e-10:
        raise IntegrityError("random-model observable must be traceless")
    if not np.any(np.abs(m) > 0):
        raise IntegrityError("random-model observable must be non-zero")
    return m


def sample_random_qnn(cfg: RandomModelConfig, m, rng: Optional[np.random.Generator] = None) -> CircuitSpec:
    """Circuit with generators W_l H W_l^dagger, W_l Haar distributed."""
    m = _check_observable(m, cfg.dim)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    gens = []
    for l in range(cfg.p):
        w = haar_unitary(cfg.dim, rng)
        gens.append(TwoLevelGenerator(w @ cfg.hamiltonian @ dagger(w), label=f"W{l}HW{l}^+"))
    return CircuitSpec(tuple(gens), m, name=f"haar-d{cfg.dim}-p{cfg.p}")


def random_traceless_observable(dim: int, rng: np.random.Generator, norm2: float = 1.0) -> np.ndarray:
    """Random traceless Hermitian M scaled so tr(M^2) = norm2."""
    m = random_hermitian(dim, rng)
    m = m - np.trace(m).real / dim * np.eye(dim)
    return m * np.sqrt(norm2 / np.real(np.trace(m @ m)))


def _streams(seed: int, n: int) -> List[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def independence_fraction(cfg: RandomModelConfig, m, n_circuits: int) -> Tuple[float, List[float]]:
    """Fraction of sampled circuits passing the Gram test, plus each lambda_min."""
    lams, passed = [], 0
    for rng in _streams(cfg.seed, n_circuits):
        rep = gram_report(sample_random_qnn(cfg, m, rng))
        lams.append(rep.lambda_min)
        passed += rep.independent
    return passed / n_circuits, lams


def representative_indices(p: int) -> List[Tuple[int, ...]]:
    """Weight-one multi-indices (both cos and sin type) plus the all-ones index."""
    out = []
    for l in range(p):
        for j in (1, 2):
            xi = [0] * p
            xi[l] = j
            out.append(tuple(xi))
    ones = (1,) * p
    if ones not in out:
        out.append(ones)
    return out


@dataclass(frozen=True)
class MomentReport:
    n_samples: int
    dim: int
    p: int
    indices: Tuple[str, ...]
    norm2: float
    predicted_diag: float
    diag_mean: float
    diag_se: float
    diag_var: float
    offdiag_mean: float
    offdiag_se: float
    offdiag_var: float

    def diag_z(self) -> float:
        return (self.diag_mean - self.predicted_diag) / self.diag_se

    def offdiag_z(self) -> float:
        return self.offdiag_mean / self.offdiag_se

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["indices"] = list(self.indices)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MomentReport":
        d = dict(d)
        d["indices"] = tuple(d["indices"])
        return cls(**d)


def moment_study(cfg: RandomModelConfig, m, n_samples: int, full: bool = False) -> MomentReport:
    """Monte-Carlo estimates of the Gram entries' first moments.

    Each sample contributes the mean of its diagonal and of its off-diagonal
    entries over the chosen index set; means and standard errors are taken
    across samples, so samples are the independent units.
    """
    if n_samples < MIN_MOMENT_SAMPLES:
        raise ValueError(f"moment study needs at least {MIN_MOMENT_SAMPLES} samples, got {n_samples}")
    if cfg.p > MAX_MOMENT_P:
        raise DimensionError(f"moment study supports p <= {MAX_MOMENT_P}")
    m = _check_observable(m, cfg.dim)
    idx = all_indices(cfg.p)[1:] if full else representative_indices(cfg.p)
    rows = [index_position(xi) for xi in idx]
    k = len(rows)
    off_mask = ~np.eye(k, dtype=bool)
    diag_means, off_means, diag_all, off_all = [], [], [], []
    for rng in _streams(cfg.seed, n_samples):
        exp = expand_observable(sample_random_qnn(cfg, m, rng))
        g = gram_matrix(exp.coefficients[rows])
        diag_all.append(np.diag(g))
        off_all.append(g[off_mask])
        diag_means.append(np.diag(g).mean())
        off_means.append(g[off_mask].mean())
    n = n_samples
    diag_means, off_means = np.array(diag_means), np.array(off_means)
    norm2 = float(np.real(np.trace(m @ m)))
    return MomentReport(
        n_samples=n,
        dim=cfg.dim,
        p=cfg.p,
        indices=tuple(xi_string(xi) for xi in idx),
        norm2=norm2,
        predicted_diag=norm2 / 2 ** cfg.p,
        diag_mean=float(diag_means.mean()),
        diag_se=float(diag_means.std(ddof=1) / np.sqrt(n)),
        diag_var=float(np.var(np.concatenate(diag_all), ddof=1)),
        offdiag_mean=float(off_means.mean()),
        offdiag_se=float(off_means.std(ddof=1) / np.sqrt(n)),
        offdiag_var=float(np.var(np.concatenate(off_all), ddof=1)),
    )
