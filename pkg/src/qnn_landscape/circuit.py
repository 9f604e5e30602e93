"""Parameterized circuits built from two-level generators.

The circuit unitary is ``U(theta) = V_p(theta_p) ... V_1(theta_1)`` with
``V_l(t) = exp(-i t H_l)``: generator index 1 (position 0 in Python) acts on
the state first.  The trig expansion in :mod:`qnn_landscape.trig` depends on
this ordering.

The square loss is the mean over the ``m`` data of ``w_i (f_i - y_i)^2``.
With unit weights this is the plain empirical risk; non-unit weights are the
per-datum reweighting used by the canonical examples.
"""
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, IntegrityError
from .numerics import check_density, check_hermitian, dagger, local_operator

GENERATOR_TOL = 1e-10
IMAG_TOL = 1e-10


@dataclass(frozen=True)
class TwoLevelGenerator:
    """Traceless Hermitian H with H^2 = I."""

    hamiltonian: np.ndarray
    qubit: Optional[int] = None
    label: Optional[str] = None

    def __post_init__(self):
        h = check_hermitian(self.hamiltonian, name="generator")
        tr = abs(np.trace(h))
        if tr > GENERATOR_TOL:
            raise IntegrityError(f"generator must be traceless, |tr H| = {tr:.3e}")
        sq = float(np.max(np.abs(h @ h - np.eye(h.shape[0]))))
        if sq > GENERATOR_TOL:
            raise IntegrityError(f"generator must satisfy H^2 = I, residual {sq:.3e}")
        h.setflags(write=False)
        object.__setattr__(self, "hamiltonian", h)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @classmethod
    def pauli(cls, op: np.ndarray, qubit: int, n_qubits: int, label: Optional[str] = None):
        return cls(local_operator(op, qubit, n_qubits), qubit=qubit, label=label)


def gate_matrix(gen: TwoLevelGenerator, angle: float) -> np.ndarray:
    """exp(-i angle H) = cos(angle) I - i sin(angle) H."""
    h = gen.hamiltonian
    return np.cos(angle) * np.eye(h.shape[0]) - 1j * np.sin(angle) * h


@dataclass(frozen=True)
class CircuitSpec:
    generators: Tuple[TwoLevelGenerator, ...]
    observable: np.ndarray
    name: str = ""

    def __post_init__(self):
        gens = tuple(self.generators)
        if not gens:
            raise DimensionError("a circuit needs at least one generator")
        m = check_hermitian(self.observable, name="observable")
        dims = {g.dim for g in gens} | {m.shape[0]}
        if len(dims) != 1:
            raise DimensionError(f"generators and observable disagree on dimension: {sorted(dims)}")
        m.setflags(write=False)
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "observable", m)

    @property
    def p(self) -> int:
        return len(self.generators)

    @property
    def dim(self) -> int:
        return self.observable.shape[0]

    @property
    def traceless(self) -> bool:
        return abs(np.trace(self.observable)) <= 1e-10

    def unitary(self, theta) -> np.ndarray:
        theta = self._check_theta(theta)
        u = np.eye(self.dim, dtype=complex)
        for gen, t in zip(self.generators, theta):
            u = gate_matrix(gen, t) @ u
        return u

    def heisenberg(self, theta) -> np.ndarray:
        """M(theta) = U(theta)^dagger M U(theta)."""
        u = self.unitary(theta)
        return dagger(u) @ self.observable @ u

    def _check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.ndim == 0 and self.p == 1:
            theta = theta.reshape(1)
        if theta.shape != (self.p,):
            raise DimensionError(f"expected {self.p} angles, got shape {theta.shape}")
        return theta


def one_layer_circuit(h_local: np.ndarray, m_local: np.ndarray, p: int) -> CircuitSpec:
    """H_l = h acting on qubit l, M = m tensored over all p qubits."""
    gens = [TwoLevelGenerator.pauli(h_local, l, p) for l in range(p)]
    obs = m_local
    for _ in range(p - 1):
        obs = np.kron(obs, m_local)
    return CircuitSpec(tuple(gens), obs)


@dataclass(frozen=True)
class QuantumDatum:
    state: np.ndarray
    label: float
    weight: float = 1.0

    def __post_init__(self):
        rho = check_density(self.state)
        if not self.weight > 0:
            raise ValueError(f"datum weight must be positive, got {self.weight}")
        rho.setflags(write=False)
        object.__setattr__(self, "state", rho)
        object.__setattr__(self, "label", float(self.label))
        object.__setattr__(self, "weight", float(self.weight))


@dataclass(frozen=True)
class Dataset:
    data: Tuple[QuantumDatum, ...]
    _states: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        data = tuple(self.data)
        object.__setattr__(self, "data", data)
        if data:
            dims = {d.state.shape[0] for d in data}
            if len(dims) != 1:
                raise DimensionError(f"dataset states have mixed dimensions {sorted(dims)}")
            states = np.stack([d.state for d in data])
        else:
            states = np.zeros((0, 0, 0), dtype=complex)
        states.setflags(write=False)
        object.__setattr__(self, "_states", states)

    def __len__(self):
        return len(self.data)

    def __iter__(self):
        return iter(self.data)

    @property
    def dim(self) -> int:
        return self._states.shape[1] if self.data else 0

    @property
    def states(self) -> np.ndarray:
        return self._states

    @property
    def labels(self) -> np.ndarray:
        return np.array([d.label for d in self.data])

    @property
    def weights(self) -> np.ndarray:
        return np.array([d.weight for d in self.data])

    def with_labels(self, labels: Sequence[float]) -> "Dataset":
        if len(labels) != len(self.data):
            raise DimensionError("label count does not match dataset size")
        return Dataset(tuple(QuantumDatum(d.state, y, d.weight) for d, y in zip(self.data, labels)))


def _outputs_from_heisenberg(states: np.ndarray, m_theta: np.ndarray) -> np.ndarray:
    vals = np.einsum("kij,ji->k", states, m_theta)
    scale = max(1.0, float(np.max(np.abs(vals.real))) if vals.size else 1.0)
    bad = float(np.max(np.abs(vals.imag))) if vals.size else 0.0
    if bad > IMAG_TOL * scale:
        raise IntegrityError(f"circuit output has imaginary residue {bad:.3e}")
    return vals.real


def _check_state_dim(circuit: CircuitSpec, dim: int):
    if dim != circuit.dim:
        raise DimensionError(f"state dimension {dim} does not match circuit dimension {circuit.dim}")


def evaluate(circuit: CircuitSpec, state, theta) -> float:
    """f(rho, theta) = tr(U rho U^dagger M)."""
    rho = np.asarray(state, dtype=complex)
    _check_state_dim(circuit, rho.shape[0])
    return float(_outputs_from_heisenberg(rho[None], circuit.heisenberg(theta))[0])


def outputs(circuit: CircuitSpec, data: Dataset, theta) -> np.ndarray:
    """Vector of f(rho_i, theta) over the dataset."""
    _check_state_dim(circuit, data.dim)
    return _outputs_from_heisenberg(data.states, circuit.heisenberg(theta))


def _require_data(data: Dataset):
    if len(data) == 0:
        raise ValueError("loss needs a non-empty dataset")


def loss(circuit: CircuitSpec, data: Dataset, theta) -> float:
    _require_data(data)
    r = outputs(circuit, data, theta) - data.labels
    return float(np.mean(data.weights * r * r))


def output_gradients(circuit: CircuitSpec, data: Dataset, theta) -> np.ndarray:
    """d f_i / d theta_l via the pi/4 parameter shift; shape (m, p)."""
    theta = circuit._check_theta(theta)
    jac = np.empty((len(data), circuit.p))
    for l in range(circuit.p):
        shift = np.zeros(circuit.p)
        shift[l] = np.pi / 4
        jac[:, l] = outputs(circuit, data, theta + shift) - outputs(circuit, data, theta - shift)
    return jac


def gradient(circuit: CircuitSpec, data: Dataset, theta) -> np.ndarray:
    _require_data(data)
    r = outputs(circuit, data, theta) - data.labels
    jac = output_gradients(circuit, data, theta)
    return 2.0 * (data.weights * r) @ jac / len(data)


class CircuitProblem:
    """Loss/gradient pair of a circuit and dataset, simulated with dense matrices."""

    def __init__(self, circuit: CircuitSpec, data: Dataset):
        _require_data(data)
        _check_state_dim(circuit, data.dim)
        self.circuit = circuit
        self.data = data
        self.p = circuit.p

    def loss(self, theta) -> float:
        return loss(self.circuit, self.data, theta)

    def gradient(self, theta) -> np.ndarray:
        return gradient(self.circuit, self.data, theta)

    def with_labels(self, labels) -> "CircuitProblem":
        return CircuitProblem(self.circuit, self.data.with_labels(labels))
